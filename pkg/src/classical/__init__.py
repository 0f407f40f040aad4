# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Classical layer: frequency arithmetic, Weyl-monomial symbols and flows.
"""

from .frequency import (
    FrequencySpec,
    ResonanceModule,
    ReducedHamiltonianSet,
    DenominatorProfile,
    resonance_module,
    reduced_hamiltonians,
    project_degenerate,
    denominator_profile,
    fourier_index,
)
from .phase_point import PhasePoint
from .symbols import (
    WeylSymbol,
    FourierDecomposition,
    evaluate,
    poisson,
    flow_compose,
    average,
    average_numeric,
    solve_cohomological,
    solve_cohomological_periodic,
    second_order_symbol,
    fourier_decomposition,
    compose_linear,
)
from .flow import (
    HamiltonianField,
    LinearizedFrame,
    TorusMeasure,
    BirkhoffReport,
    oscillator_flow,
    hamiltonian_flow,
    flow_matrix_oscillator,
    averaged_flow,
    orbit,
    integrate_variational,
    VariationalSolution,
    linearized_flow,
    symplectic_renormalize,
    theta_growth,
    ehrenfest_time,
    birkhoff_average_measure,
    transport_points,
    detect_tangent_flow,
)

__all__ = [
    "FrequencySpec",
    "ResonanceModule",
    "ReducedHamiltonianSet",
    "DenominatorProfile",
    "resonance_module",
    "reduced_hamiltonians",
    "project_degenerate",
    "denominator_profile",
    "fourier_index",
    "PhasePoint",
    "WeylSymbol",
    "FourierDecomposition",
    "evaluate",
    "poisson",
    "flow_compose",
    "average",
    "average_numeric",
    "solve_cohomological",
    "solve_cohomological_periodic",
    "second_order_symbol",
    "fourier_decomposition",
    "compose_linear",
    "HamiltonianField",
    "LinearizedFrame",
    "TorusMeasure",
    "BirkhoffReport",
    "oscillator_flow",
    "hamiltonian_flow",
    "flow_matrix_oscillator",
    "averaged_flow",
    "orbit",
    "integrate_variational",
    "VariationalSolution",
    "linearized_flow",
    "symplectic_renormalize",
    "theta_growth",
    "ehrenfest_time",
    "birkhoff_average_measure",
    "transport_points",
    "detect_tangent_flow",
]
