#!/usr/bin/env python3
"""Tests for exact frequency arithmetic and resonance detection."""

import math

import numpy as np
import pytest

from src.classical.flow import hamiltonian_flow, oscillator_flow
from src.classical.frequency import (
    FrequencySpec,
    denominator_profile,
    fourier_index,
    integer_kernel,
    project_degenerate,
    reduced_hamiltonians,
    resonance_module,
)
from src.classical.phase_point import PhasePoint
from src.core.errors import ValidationError


def _up_to_sign(k):
    return {tuple(k), tuple(-c for c in k)}


def test_resonance_module_resonant(resonant_spec):
    rm = resonance_module(resonant_spec)
    assert rm.rank == 1
    assert tuple(rm.lattice_basis[0]) in _up_to_sign((1, -1))
    assert rm.contains((3, -3))
    assert not rm.contains((1, 0))


def test_resonance_module_diophantine(diophantine_spec):
    rm = resonance_module(diophantine_spec)
    assert rm.rank == 0
    assert rm.lattice_basis == ()


def test_resonance_module_one_two():
    spec = FrequencySpec.from_dict({"d": 2, "nu": [[1, 2]], "v": [1]})
    rm = resonance_module(spec)
    assert rm.rank == 1
    assert tuple(rm.lattice_basis[0]) in _up_to_sign((2, -1))
    assert rm.rank + spec.d_omega == spec.d


def test_integer_kernel_is_saturated():
    A = np.array([[2, 4, 6]])
    K = integer_kernel(A)
    assert K.shape == (3, 2)
    assert not np.any(A.astype(object).dot(K))
    # Plücker coordinates of a saturated rank-2 kernel are coprime
    minors = [K[i, 0] * K[j, 1] - K[j, 0] * K[i, 1] for i, j in ((0, 1), (0, 2), (1, 2))]
    assert math.gcd(*(int(m) for m in minors)) == 1

    K = integer_kernel(np.array([[1, 1, 1], [1, -1, 3]]))
    assert tuple(int(c) for c in K[:, 0]) in _up_to_sign((-2, 1, 1))
    assert integer_kernel(np.eye(2, dtype=int)).shape == (2, 0)


def test_rational_components_collapse():
    """ω = (1, 2) given as two rational coefficients collapses to one ν."""
    spec = FrequencySpec.from_dict({"d": 2, "nu": [[1, 0], [0, 1]], "v": [1, 2]})
    assert spec.d_omega == 1
    assert spec.nu[0] == (1, 2)
    np.testing.assert_allclose(spec.omega, [1.0, 2.0])


def test_spec_rejects_invalid_vectors():
    with pytest.raises(ValidationError):
        FrequencySpec.from_dict({"d": 2, "nu": [[2, 2]], "v": [1]})
    with pytest.raises(ValidationError):
        FrequencySpec.from_dict({"d": 2, "nu": [[1, 1], [1, 0]], "v": [1, {"surd": {"root": 2}}]})
    with pytest.raises(ValidationError):
        FrequencySpec.from_dict({"d": 2, "nu": [[1, -1]], "v": [1]})


def test_float_frequency_warns(caplog):
    FrequencySpec.from_dict({"d": 2, "nu": [[1, 0], [0, 1]], "v": [1.0, 1.4142135623730951]})
    assert any("Float frequency" in r.message for r in caplog.records)


def test_spec_round_trips_exact_surd(diophantine_spec):
    again = FrequencySpec.from_dict(diophantine_spec.to_dict())
    assert again.nu == diophantine_spec.nu
    np.testing.assert_allclose(again.omega, [1.0, math.sqrt(2)])


def test_project_degenerate():
    np.testing.assert_array_equal(project_degenerate([1, 1], [3, 4]), [3, 4])
    np.testing.assert_array_equal(project_degenerate([1, 0], [3, 4]), [3, 0])
    np.testing.assert_array_equal(project_degenerate([0, 0], [3, 4]), [0, 0])
    with pytest.raises(ValidationError):
        project_degenerate([-1, 1], [3, 4])


def test_reduced_hamiltonians_resonant(resonant_spec):
    reduced = reduced_hamiltonians(resonant_spec, [0.5, 0.5])
    assert reduced.d_E == 1
    assert reduced.coefficients == ((1, 1),)
    np.testing.assert_allclose(reduced.v_tilde, [1.0])


def test_reduced_hamiltonians_degenerate_torus(diophantine_spec):
    reduced = reduced_hamiltonians(diophantine_spec, [1.0, 0.0])
    assert reduced.d_E == 1
    assert reduced.coefficients == ((1, 0),)
    np.testing.assert_allclose(reduced.v_tilde, [1.0])
    assert reduced.null_modes == (1,)


def test_reduced_hamiltonians_nondegenerate(diophantine_spec):
    reduced = reduced_hamiltonians(diophantine_spec, [0.5, 0.25])
    assert reduced.d_E == 2
    np.testing.assert_allclose(reduced.v_tilde, [1.0, math.sqrt(2)])


def test_reduced_hamiltonians_reject_zero_torus(resonant_spec):
    with pytest.raises(ValidationError):
        reduced_hamiltonians(resonant_spec, [0.0, 0.0])


def test_reduced_flow_matches_harmonic_flow(diophantine_spec):
    """Φ^{𝓗̃}_{tṽ}(z₀) = φ^H_t(z₀) on the torus through z₀."""
    rng = np.random.default_rng(7)
    z0 = PhasePoint(np.array([0.8, 0.3]), np.array([0.1, -0.5]))
    reduced = reduced_hamiltonians(diophantine_spec, z0.actions)
    for t in rng.uniform(0, 10, 20):
        angles = reduced.mode_angles(t * reduced.v_tilde)
        lhs = oscillator_flow(z0, angles)
        rhs = hamiltonian_flow(z0, t, diophantine_spec.omega)
        np.testing.assert_allclose(lhs.as_array(), rhs.as_array(), atol=1e-9)


def test_fourier_index(resonant_spec):
    # z1 z̄2 is resonant for ω = (1, 1)
    assert fourier_index(resonant_spec, (1, 0), (0, 1)) == (0,)
    assert fourier_index(resonant_spec, (1, 0), (0, 0)) == (-1,)


def test_denominator_profile_resonant(resonant_spec):
    profile = denominator_profile(resonant_spec, 10)
    assert all(m == pytest.approx(1.0) for _, m in profile.shells)
    assert profile.gamma_hat == 0.0
    assert profile.gamma_slope == 0.0


def test_denominator_profile_one_two():
    spec = FrequencySpec.from_dict({"d": 2, "nu": [[1, 2]], "v": [1]})
    profile = denominator_profile(spec, 10)
    assert all(m == pytest.approx(1.0) for _, m in profile.shells)
    assert profile.gamma_hat == 0.0


def test_denominator_profile_golden_type(diophantine_spec):
    profile = denominator_profile(diophantine_spec, 50)
    minima = [m for _, m in profile.shells]
    assert all(m > 0 for m in minima)
    assert all(a >= b for a, b in zip(minima, minima[1:]))
    assert profile.sigma0 == pytest.approx(1.0)
    # records at |k| = 1, 2, 5, 12, 29 with minima (√2 − 1)^j; the ratio peaks at |k| = 2
    assert [n for n, _, _ in profile.records] == [1, 2, 5, 12, 29]
    assert profile.records[-1][2] == pytest.approx((math.sqrt(2) - 1) ** 4)
    assert profile.gamma_hat == pytest.approx(math.log(1 + math.sqrt(2)) / math.log(2))
    assert 0.7 < profile.gamma_hat < 1.3
    assert 0.7 < profile.gamma_slope < 1.3
    assert profile.to_dict()["gamma_hat"] == profile.gamma_hat


def test_denominator_profile_rejects_bad_cutoff(resonant_spec):
    with pytest.raises(ValidationError):
        denominator_profile(resonant_spec, 0)
