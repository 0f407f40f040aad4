# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Quasimode layer: synthesis from propagated coherent states and empirical
semiclassical-measure analysis.
"""

from .synthesis import (
    BumpFunction,
    SynthesisGrid,
    QuasimodeResult,
    nearest_lattice,
    quasi_eigenvalue,
    torus_filter,
    normalizing_constant,
    synthesize,
    width,
    superpose,
    target_pairing,
)
from .measures import (
    EmpiricalMeasure,
    InvarianceReport,
    PositionMarginal,
    coherent_rows,
    husimi_cloud,
    invariance_test,
    localization_test,
    single_torus_mass,
    position_marginal,
    marginal_wasserstein,
    bracket_defect,
    pairing_table,
    default_observables,
)

__all__ = [
    "BumpFunction",
    "SynthesisGrid",
    "QuasimodeResult",
    "nearest_lattice",
    "quasi_eigenvalue",
    "torus_filter",
    "normalizing_constant",
    "synthesize",
    "width",
    "superpose",
    "target_pairing",
    "EmpiricalMeasure",
    "InvarianceReport",
    "PositionMarginal",
    "coherent_rows",
    "husimi_cloud",
    "invariance_test",
    "localization_test",
    "single_torus_mass",
    "position_marginal",
    "marginal_wasserstein",
    "bracket_defect",
    "pairing_table",
    "default_observables",
]
