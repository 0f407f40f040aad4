#!/usr/bin/env python3
"""Tests for the matrix-level quantum Birkhoff normal form."""

import numpy as np
import pytest

from src.classical.frequency import resonance_module
from src.classical.symbols import WeylSymbol, second_order_symbol
from src.core.errors import BandOverflowError, ValidationError
from src.quantum.normal_form import (
    conjugate_step,
    first_order_residual,
    normal_form_iterate,
    normal_form_quasimodes,
    observable_stability,
    second_order_remainder,
    solve_quantum_cohomological,
    unitary_exponential,
)
from src.quantum.quantization import (
    HermiteBasisSpec,
    OperatorMatrix,
    hamiltonian_matrix,
    operator_norm,
    quantize,
    quantum_average,
)


@pytest.fixture
def setup_1d(oscillator_1d):
    basis = HermiteBasisSpec(d=1, hbar=0.1, nmax=20)
    rm = resonance_module(oscillator_1d)
    H = hamiltonian_matrix(basis)
    return basis, rm, H


def _x_plus_x2():
    x = WeylSymbol.x(1, 0)
    return x + x * x


def test_cohomological_equation_is_exact(setup_1d):
    basis, rm, H = setup_1d
    V = quantize(_x_plus_x2(), basis)
    F = solve_quantum_cohomological(V, rm)
    lhs = (1j / basis.hbar) * (F.entries @ H.entries - H.entries @ F.entries)
    rhs = quantum_average(V, rm).entries - V.entries
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    assert F.is_hermitian()


def test_generator_of_position_is_minus_momentum(setup_1d):
    basis, rm, _ = setup_1d
    F = solve_quantum_cohomological(quantize(WeylSymbol.x(1, 0), basis), rm)
    Xi = quantize(WeylSymbol.xi(1, 0), basis)
    np.testing.assert_allclose(F.entries, -Xi.entries, atol=1e-12)


def test_unitary_exponential(setup_1d):
    basis, rm, _ = setup_1d
    F = solve_quantum_cohomological(quantize(_x_plus_x2(), basis), rm)
    U = unitary_exponential(F, 0.3)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(basis.dim), atol=1e-10)
    np.testing.assert_allclose(unitary_exponential(F, 0.0), np.eye(basis.dim), atol=1e-12)
    skew = OperatorMatrix(basis, np.triu(np.ones((basis.dim, basis.dim)), 1))
    with pytest.raises(ValidationError):
        unitary_exponential(skew, 1.0)


def test_first_step_residual_is_second_order(setup_1d):
    """‖U*P̂U − Ĥ − ε⟨V̂⟩‖ shrinks by about 4 when ε halves."""
    basis, rm, H = setup_1d
    V = quantize(_x_plus_x2(), basis)
    Vavg = quantum_average(V, rm)
    F = solve_quantum_cohomological(V, rm)
    residuals = []
    for eps in (0.004, 0.002):
        P1 = conjugate_step(H + V.scaled(eps), F, eps)
        residuals.append(first_order_residual(P1, H, Vavg, eps))
    assert 3.0 < residuals[0] / residuals[1] < 5.0


def test_conjugate_step_without_perturbation(setup_1d):
    basis, rm, H = setup_1d
    F = solve_quantum_cohomological(quantize(WeylSymbol.x(1, 0), basis), rm)
    assert conjugate_step(H, F, 0.0) is H


def test_second_order_remainder_of_position(setup_1d):
    """⟨R̂₂⟩ = −½ for V = x in one dimension."""
    basis, rm, _ = setup_1d
    V = quantize(WeylSymbol.x(1, 0), basis)
    Vavg = quantum_average(V, rm)
    F = solve_quantum_cohomological(V, rm)
    R2 = second_order_remainder(F, V, Vavg, rm)
    # the last basis state sees the truncation
    np.testing.assert_allclose(np.diag(R2.entries)[:-1].real, -0.5, atol=1e-12)
    assert R2.is_diagonal


def test_iteration_matches_second_order_remainder(setup_1d):
    basis, rm, H = setup_1d
    V = quantize(WeylSymbol.x(1, 0), basis)
    eps = 0.01
    result = normal_form_iterate(H + V.scaled(eps), rm, eps, 2, V=V)
    assert result.order == 2
    F = solve_quantum_cohomological(V, rm)
    expected = second_order_remainder(F, V, quantum_average(V, rm), rm)
    np.testing.assert_allclose(result.steps[1].remainder.entries, expected.entries, atol=1e-10)
    np.testing.assert_allclose(result.steps[0].remainder.entries, 0.0, atol=1e-14)


def test_iteration_reduces_offresonant_part(setup_1d):
    basis, rm, H = setup_1d
    V = quantize(_x_plus_x2(), basis)
    eps = 0.01
    one = normal_form_iterate(H + V.scaled(eps), rm, eps, 1)
    two = normal_form_iterate(H + V.scaled(eps), rm, eps, 2)
    assert two.offresonant_residual < one.offresonant_residual
    for step in two.steps:
        assert step.unitary_defect < 1e-10
    summary = two.to_dict()
    assert summary["order"] == 2
    assert len(summary["steps"]) == 2


def test_iteration_validation(setup_1d):
    basis, rm, H = setup_1d
    with pytest.raises(ValidationError):
        normal_form_iterate(H, rm, 0.01, 0)
    with pytest.raises(ValidationError):
        normal_form_iterate(H, rm, 0.01, 5)
    with pytest.raises(ValidationError):
        normal_form_iterate(H, rm, 0.0, 1)


def test_normal_form_quasimodes_beat_fock_states(setup_1d):
    basis, rm, H = setup_1d
    V = quantize(_x_plus_x2(), basis)
    eps = 0.01
    P = H + V.scaled(eps)
    result = normal_form_iterate(P, rm, eps, 2)
    modes = normal_form_quasimodes(result, P, (0.5, 0.6))
    assert len(modes) == 1
    mode = modes[0]
    assert np.linalg.norm(mode.state) == pytest.approx(1.0)

    fock = np.zeros(basis.dim, dtype=complex)
    fock[5] = 1.0
    mean = np.vdot(fock, P.entries @ fock).real
    naive = np.linalg.norm(P.entries @ fock - mean * fock)
    assert mode.width < 1e-3
    assert mode.width < naive / 5


def test_observable_stability_of_identity(setup_1d):
    basis, _, _ = setup_1d
    U = np.eye(basis.dim, dtype=complex)
    stability = observable_stability(U, WeylSymbol.x(1, 0), basis, eps=0.0)
    assert stability.norm == pytest.approx(0.0)
    assert np.isnan(stability.constant)
    with pytest.raises(ValidationError):
        observable_stability(U, WeylSymbol.x(1, 0), basis, eps=-0.1)


def test_observable_stability_is_first_order(setup_1d):
    """Halving ε halves ‖U Op(a) U* − Op(a)‖; for a = H the constant is ‖⟨V̂⟩ − V̂‖."""
    basis, rm, _ = setup_1d
    V = quantize(_x_plus_x2(), basis)
    F = solve_quantum_cohomological(V, rm)
    x = WeylSymbol.x(1, 0)
    norms = [
        observable_stability(unitary_exponential(F, eps / basis.hbar), x, basis, eps).norm
        for eps in (0.01, 0.005)
    ]
    assert norms[0] / norms[1] == pytest.approx(2.0, rel=0.15)

    eps = 0.005
    H = WeylSymbol.harmonic_hamiltonian([1.0])
    stability = observable_stability(unitary_exponential(F, eps / basis.hbar), H, basis, eps)
    expected = operator_norm(quantum_average(V, rm).entries - V.entries, basis.reliable_mask(2))
    assert stability.constant == pytest.approx(expected, rel=0.05)
    assert stability.to_dict()["eps"] == eps


def test_iteration_rejects_empty_residual_band(resonant_spec, x1x2):
    """nmax = 16 at ℏ = 0.1 leaves no state below the degree-4 band."""
    basis = HermiteBasisSpec(d=2, hbar=0.1, nmax=16)
    rm = resonance_module(resonant_spec)
    V = quantize(x1x2, basis)
    assert not basis.reliable_mask(4).any()
    with pytest.raises(BandOverflowError):
        normal_form_iterate(hamiltonian_matrix(basis) + V.scaled(0.01), rm, 0.01, 1, V=V)


@pytest.mark.parametrize("order, expected, rel", [(1, 4.0, 0.2), (2, 8.0, 0.3)])
def test_residual_scales_as_next_power_of_eps(resonant_spec, x1x2, order, expected, rel):
    """Off-resonant residual after N steps is O(ε^{N+1}) for ω = (1, 1), V = x₁x₂."""
    basis = HermiteBasisSpec(d=2, hbar=0.1, nmax=30)
    rm = resonance_module(resonant_spec)
    H = hamiltonian_matrix(basis)
    V = quantize(x1x2, basis)
    residuals = [
        normal_form_iterate(H + V.scaled(eps), rm, eps, order, V=V, H=H).offresonant_residual
        for eps in (0.004, 0.002)
    ]
    assert residuals[1] > 0
    assert residuals[0] / residuals[1] == pytest.approx(expected, rel=rel)


def test_second_order_remainder_approaches_averaged_symbol(oscillator_1d):
    """‖⟨R̂₂⟩ − Op(⟨L⟩)‖ on E ≤ 1 is O(ℏ) for the quartic perturbation."""
    rm = resonance_module(oscillator_1d)
    x = WeylSymbol.x(1, 0)
    V = x * x * x * x
    L = second_order_symbol(V, oscillator_1d, rm)
    hbars = (0.2, 0.1, 0.05)
    errors = []
    for hbar in hbars:
        basis = HermiteBasisSpec.for_window(1, hbar, (1.0,), 1.0, degree=8)
        Vq = quantize(V, basis)
        F = solve_quantum_cohomological(Vq, rm)
        R2 = second_order_remainder(F, Vq, quantum_average(Vq, rm), rm)
        errors.append(operator_norm(R2.entries - quantize(L, basis).entries, basis.energies <= 1.0))
    for hbar, error in zip(hbars, errors):
        assert error <= 2.0 * hbar
    slope = np.polyfit(np.log(hbars), np.log(errors), 1)[0]
    assert slope >= 0.8
