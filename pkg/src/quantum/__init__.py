# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Quantum layer: Weyl quantization on a truncated Hermite basis, the quantum
Birkhoff normal form and coherent-state propagation.
"""

from .quantization import (
    HermiteBasisSpec,
    OperatorMatrix,
    Eigenpairs,
    Cluster,
    ClusterReport,
    ProjectionResult,
    quantize,
    hamiltonian_matrix,
    spectrum,
    resonant_mask,
    quantum_average,
    operator_norm,
    cluster_spectrum,
    project_to_cluster,
    wigner_pairing,
    band_leakage,
    check_band,
    hermite_functions,
    fock_state,
)
from .normal_form import (
    NormalFormStep,
    NormalFormResult,
    NormalFormQuasimode,
    ObservableStability,
    solve_quantum_cohomological,
    unitary_exponential,
    conjugate,
    conjugate_step,
    first_order_residual,
    second_order_remainder,
    normal_form_iterate,
    observable_stability,
    normal_form_quasimodes,
)
from .coherent import (
    CoherentFrame,
    PropagationResult,
    coherent_coefficients,
    coherent_state,
    displacement,
    sqrt_det_branch,
    metaplectic_state,
    action_integral,
    leading_states_along_s,
    propagate_leading,
    propagate_exact,
    reduced_operator_phases,
    hermitian_propagator,
)

__all__ = [
    "HermiteBasisSpec",
    "OperatorMatrix",
    "Eigenpairs",
    "Cluster",
    "ClusterReport",
    "ProjectionResult",
    "quantize",
    "hamiltonian_matrix",
    "spectrum",
    "resonant_mask",
    "quantum_average",
    "operator_norm",
    "cluster_spectrum",
    "project_to_cluster",
    "wigner_pairing",
    "band_leakage",
    "check_band",
    "hermite_functions",
    "fock_state",
    "NormalFormStep",
    "NormalFormResult",
    "NormalFormQuasimode",
    "ObservableStability",
    "solve_quantum_cohomological",
    "unitary_exponential",
    "conjugate",
    "conjugate_step",
    "first_order_residual",
    "second_order_remainder",
    "normal_form_iterate",
    "observable_stability",
    "normal_form_quasimodes",
    "CoherentFrame",
    "PropagationResult",
    "coherent_coefficients",
    "coherent_state",
    "displacement",
    "sqrt_det_branch",
    "metaplectic_state",
    "action_integral",
    "leading_states_along_s",
    "propagate_leading",
    "propagate_exact",
    "reduced_operator_phases",
    "hermitian_propagator",
]
