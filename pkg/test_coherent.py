#!/usr/bin/env python3
"""Tests for coherent states, Gaussian wavepackets and leading-order propagation."""

import math

import numpy as np
import pytest

from src.classical.flow import flow_matrix_oscillator
from src.classical.frequency import reduced_hamiltonians, resonance_module
from src.classical.phase_point import PhasePoint
from src.classical.symbols import WeylSymbol, average
from src.core.errors import BranchDiscontinuityError, ValidationError
from src.quantum.coherent import (
    CoherentFrame,
    action_integral,
    coherent_state,
    displacement,
    leading_states_along_s,
    metaplectic_state,
    propagate_exact,
    propagate_leading,
    sqrt_det_branch,
)
from src.quantum.quantization import HermiteBasisSpec, fock_state, wigner_pairing


def _pt(x, xi):
    return PhasePoint(np.array(x, dtype=float), np.array(xi, dtype=float))


@pytest.fixture
def basis_1d():
    return HermiteBasisSpec(d=1, hbar=0.1, nmax=24)


def test_coherent_state_moments(basis_1d):
    z0 = _pt([0.5], [0.3])
    psi = coherent_state(z0, basis_1d)
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-9)
    assert wigner_pairing(psi, WeylSymbol.x(1, 0), basis_1d) == pytest.approx(0.5, abs=1e-8)
    assert wigner_pairing(psi, WeylSymbol.xi(1, 0), basis_1d) == pytest.approx(0.3, abs=1e-8)
    energy = wigner_pairing(psi, WeylSymbol.harmonic_hamiltonian([1.0]), basis_1d)
    assert energy == pytest.approx(0.5 * (0.25 + 0.09) + 0.05, abs=1e-8)


def test_coherent_state_at_origin_is_ground_state(basis_1d):
    psi = coherent_state(_pt([0.0], [0.0]), basis_1d)
    np.testing.assert_allclose(psi, fock_state(basis_1d, (0,)), atol=1e-15)


def test_displacement_first_column(basis_1d):
    z0 = _pt([0.5], [0.3])
    D = displacement(z0, basis_1d)
    np.testing.assert_allclose(D[:, 0], coherent_state(z0, basis_1d), atol=1e-7)


def test_coherent_state_checks(basis_1d):
    with pytest.raises(ValidationError):
        coherent_state(_pt([0.5, 0.1], [0.3, 0.0]), basis_1d)


def test_identity_frame_gives_coherent_state(basis_1d):
    z0 = _pt([0.5], [0.3])
    psi = metaplectic_state(CoherentFrame.identity(1, z0), (0,), basis_1d)
    np.testing.assert_allclose(psi, coherent_state(z0, basis_1d), atol=1e-7)


def test_excited_wavepacket_at_origin_is_fock_state(basis_1d):
    psi = metaplectic_state(CoherentFrame.identity(1), (3,), basis_1d)
    np.testing.assert_allclose(psi, fock_state(basis_1d, (3,)), atol=1e-8)


def test_metaplectic_state_validation(basis_1d):
    frame = CoherentFrame.identity(1)
    with pytest.raises(ValidationError):
        metaplectic_state(frame, (7,), basis_1d)
    with pytest.raises(ValidationError):
        metaplectic_state(frame, (1, 0), basis_1d)


def test_sqrt_det_branch_follows_full_turn():
    frames = [flow_matrix_oscillator([t]) for t in np.linspace(0.0, 2 * math.pi, 33)]
    branch = sqrt_det_branch(frames)
    assert branch[0] == pytest.approx(1.0)
    assert branch[-1] == pytest.approx(-1.0)
    np.testing.assert_allclose(np.abs(branch), 1.0)


def test_sqrt_det_branch_rejects_coarse_path():
    with pytest.raises(BranchDiscontinuityError):
        sqrt_det_branch([flow_matrix_oscillator([0.0]), flow_matrix_oscillator([2.0])])


def test_action_integral_of_harmonic_generator():
    """The Legendre part cancels the value term for a rotation."""
    H = WeylSymbol.harmonic_hamiltonian([1.0])
    assert action_integral(_pt([0.5], [0.3]), 1.7, H) == pytest.approx(0.0, abs=1e-9)


def test_leading_order_is_exact_for_harmonic_generator(basis_1d):
    z0 = _pt([0.5], [0.3])
    L = WeylSymbol.harmonic_hamiltonian([0.5])
    result = propagate_leading(z0, [1.0], 2.0, L, basis_1d)
    exact = propagate_exact(z0, [1.0], 2.0, L, basis_1d)
    np.testing.assert_allclose(result.state, exact, atol=1e-6)
    assert result.to_dict()["norm"] == pytest.approx(1.0, abs=1e-6)


def test_leading_order_is_exact_for_quadratic_average(resonant_spec, x1x2):
    """⟨x₁x₂⟩ is quadratic, so the Gaussian ansatz propagates it exactly."""
    basis = HermiteBasisSpec(d=2, hbar=0.1, nmax=20)
    Vavg = average(x1x2, resonance_module(resonant_spec))
    z0 = _pt([0.4, 0.2], [0.1, 0.3])
    reduced = reduced_hamiltonians(resonant_spec, z0.actions)
    result = propagate_leading(z0, [0.8], 1.5, Vavg, basis, reduced)
    exact = propagate_exact(z0, [0.8], 1.5, Vavg, basis, reduced)
    np.testing.assert_allclose(result.state, exact, atol=1e-6)


def test_leading_order_error_for_quartic_average():
    """For ⟨L⟩ = H² the Gaussian ansatz misses the cubic terms; its L² error decays like ℏ^{1/2}."""
    H = WeylSymbol.harmonic_hamiltonian([1.0])
    L = H * H
    z0 = _pt([0.8], [0.0])
    hbars = (0.2, 0.1, 0.05)
    errors = []
    for hbar in hbars:
        basis = HermiteBasisSpec.for_window(1, hbar, (1.0,), 4.0, degree=4)
        leading = propagate_leading(z0, [0.0], 1.0, L, basis, ehrenfest_epsilon=None)
        exact = propagate_exact(z0, [0.0], 1.0, L, basis)
        errors.append(float(np.linalg.norm(leading.state - exact)))
    assert all(a > b for a, b in zip(errors, errors[1:]))
    slope = np.polyfit(np.log(hbars), np.log(errors), 1)[0]
    assert slope >= 0.4


def test_propagate_leading_rejects_negative_time(basis_1d):
    with pytest.raises(ValidationError):
        propagate_leading(_pt([0.5], [0.3]), [0.0], -1.0, WeylSymbol.harmonic_hamiltonian([1.0]), basis_1d)


def test_leading_states_along_s(basis_1d):
    z0 = _pt([0.5], [0.3])
    L = WeylSymbol.harmonic_hamiltonian([1.0])
    states, sol, branch = leading_states_along_s(z0, np.linspace(0.0, 1.0, 9), L, basis_1d)
    assert states.shape == (9, basis_1d.dim)
    np.testing.assert_allclose(states[0], coherent_state(z0, basis_1d), atol=1e-7)
    np.testing.assert_allclose(states[-1], propagate_exact(z0, [0.0], 1.0, L, basis_1d), atol=1e-6)
    with pytest.raises(ValidationError):
        leading_states_along_s(z0, [0.5, 1.0], L, basis_1d)
