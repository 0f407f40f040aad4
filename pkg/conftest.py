# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""Shared pytest fixtures for oscilab tests."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.classical.frequency import FrequencySpec
from src.classical.phase_point import PhasePoint
from src.classical.symbols import WeylSymbol
from src.quantum.quantization import HermiteBasisSpec
from src.quasimodes.synthesis import BumpFunction, synthesize


@pytest.fixture
def resonant_spec():
    """ω = (1, 1)."""
    return FrequencySpec.from_dict({"d": 2, "nu": [[1, 1]], "v": [1]})


@pytest.fixture
def diophantine_spec():
    """ω = (1, √2)."""
    return FrequencySpec.from_dict({"d": 2, "nu": [[1, 0], [0, 1]], "v": [1, {"surd": {"rat": [1, 1], "root": 2}}]})


@pytest.fixture
def oscillator_1d():
    """ω = (1) in one dimension."""
    return FrequencySpec.from_dict({"d": 1, "nu": [[1]], "v": [1]})


@pytest.fixture
def x1x2():
    """V = x₁x₂."""
    return WeylSymbol.from_polynomial(2, {((1, 1), (0, 0)): 1.0})


@pytest.fixture(scope="session")
def x1x2_quasimodes():
    """
    Synthesized quasimodes for ω = (1, 1), V = x₁x₂, ε = ℏ², T = 4 at ℏ = 0.1 and 0.05.

    z₀ = (x, ξ) = ((0.8, 0.3), (0.1, 0.5)); the basis covers E₀ + 6√(ℏE₀).
    """
    spec = FrequencySpec.from_dict({"d": 2, "nu": [[1, 1]], "v": [1]})
    V = WeylSymbol.from_polynomial(2, {((1, 1), (0, 0)): 1.0})
    z0 = PhasePoint(np.array([0.8, 0.3]), np.array([0.1, 0.5]))
    E0 = float(np.sum(z0.actions))
    chi = BumpFunction()
    out = {}
    for hbar in (0.1, 0.05):
        top = E0 + 6 * math.sqrt(hbar * E0)
        basis = HermiteBasisSpec.for_window(2, hbar, (1.0, 1.0), top)
        out[hbar] = synthesize(z0, 4.0, chi, V, hbar ** 2, basis, spec)
    return out
