#!/usr/bin/env python3
"""Tests for oscillator multiflows, averaged flows and linearized flows."""

import math

import numpy as np
import pytest

from src.classical.flow import (
    HamiltonianField,
    TorusMeasure,
    averaged_flow,
    birkhoff_average_measure,
    detect_tangent_flow,
    ehrenfest_budget,
    ehrenfest_time,
    flow_matrix_oscillator,
    hamiltonian_flow,
    integrate_variational,
    linearized_flow,
    orbit,
    oscillator_flow,
    symplectic_defect,
    symplectic_renormalize,
    theta_growth,
    transport_points,
)
from src.classical.frequency import reduced_hamiltonians, resonance_module
from src.classical.phase_point import PhasePoint
from src.classical.symbols import WeylSymbol, average
from src.core.errors import ValidationError


def _pt(x, xi):
    return PhasePoint(np.array(x, dtype=float), np.array(xi, dtype=float))


def _total_energy(w):
    return 0.5 * float(np.sum(w ** 2))


def test_oscillator_flow_quarter_turn():
    z = oscillator_flow(_pt([1, 0], [0, 0]), [math.pi / 2, 0.0])
    np.testing.assert_allclose(z.x, [0.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(z.xi, [-1.0, 0.0], atol=1e-14)


def test_oscillator_flow_is_periodic():
    z0 = _pt([0.3, -1.2], [0.7, 0.4])
    z = oscillator_flow(z0, [2 * math.pi, 4 * math.pi])
    np.testing.assert_allclose(z.as_array(), z0.as_array(), atol=1e-12)


def test_oscillator_flow_rejects_wrong_angles():
    with pytest.raises(ValidationError):
        oscillator_flow(_pt([1, 0], [0, 0]), [1.0])


def test_flow_matrix_matches_multiflow():
    z0 = _pt([0.3, -1.2], [0.7, 0.4])
    tau = [0.4, -2.1]
    F = flow_matrix_oscillator(tau)
    assert symplectic_defect(F) < 1e-13
    np.testing.assert_allclose(F @ z0.as_array(), oscillator_flow(z0, tau).as_array(), atol=1e-13)


def test_hamiltonian_flow_scales_angles():
    z0 = _pt([1.0, 0.5], [0.0, 0.2])
    lhs = hamiltonian_flow(z0, 0.7, [1.0, 2.0])
    rhs = oscillator_flow(z0, [0.7, 1.4])
    np.testing.assert_allclose(lhs.as_array(), rhs.as_array())


def test_orbit_conserves_energy_and_average(resonant_spec, x1x2):
    """Both H and ⟨V⟩ are constant along the flow of ⟨V⟩."""
    Vavg = average(x1x2, resonance_module(resonant_spec))
    z0 = _pt([1.0, 0.4], [0.2, 0.8])
    times = np.linspace(0.0, 5.0, 11)
    pts = orbit(z0, times, Vavg)
    assert pts.shape == (11, 4)
    start = float(Vavg(z0).real)
    for w in pts:
        assert _total_energy(w) == pytest.approx(_total_energy(z0.as_array()), abs=1e-9)
        assert float(Vavg(PhasePoint.from_array(w)).real) == pytest.approx(start, abs=1e-9)


def test_orbit_rejects_unsorted_times(x1x2):
    with pytest.raises(ValidationError):
        orbit(_pt([1, 0], [0, 0]), [1.0, 0.5], x1x2)
    with pytest.raises(ValidationError):
        orbit(_pt([1, 0], [0, 0]), [], x1x2)


def test_orbit_at_zero_time_repeats_start(x1x2):
    z0 = _pt([1, 0], [0, 0])
    pts = orbit(z0, [0.0, 0.0], x1x2)
    np.testing.assert_allclose(pts, np.tile(z0.as_array(), (2, 1)))


def test_averaged_flow_forward_then_back(resonant_spec, x1x2):
    Vavg = average(x1x2, resonance_module(resonant_spec))
    z0 = _pt([1.0, 0.4], [0.2, 0.8])
    assert averaged_flow(z0, 0.0, Vavg) is z0
    there = averaged_flow(z0, 2.5, Vavg)
    back = averaged_flow(there, -2.5, Vavg)
    np.testing.assert_allclose(back.as_array(), z0.as_array(), atol=1e-9)


def test_harmonic_generator_gives_rotation():
    """The flow of ½(x²+ξ²) is Φ_s itself."""
    H = WeylSymbol.harmonic_hamiltonian([1.0])
    z0 = _pt([0.6], [-0.3])
    end = averaged_flow(z0, 1.3, H)
    np.testing.assert_allclose(end.as_array(), oscillator_flow(z0, [1.3]).as_array(), atol=1e-9)


def test_variational_frames_and_action():
    H = WeylSymbol.harmonic_hamiltonian([1.0])
    z0 = _pt([0.6], [-0.3])
    s_nodes = [0.0, 1.0, -0.5, 2.0]
    sol = integrate_variational(z0, s_nodes, H)
    energy = _total_energy(z0.as_array())
    for i, s in enumerate(s_nodes):
        np.testing.assert_allclose(sol.frames[i], flow_matrix_oscillator([s]), atol=1e-9)
        np.testing.assert_allclose(sol.points[i], oscillator_flow(z0, [s]).as_array(), atol=1e-9)
        assert sol.action[i] == pytest.approx(s * energy, abs=1e-9)
    np.testing.assert_allclose(sol.frames[0], np.eye(2))


def test_variational_frames_are_symplectic(resonant_spec, x1x2):
    Vavg = average(x1x2, resonance_module(resonant_spec))
    sol = integrate_variational(_pt([1.0, 0.4], [0.2, 0.8]), [0.5, 1.5, 3.0], Vavg)
    for F in sol.frames:
        assert symplectic_defect(F) < 1e-8


def test_linearized_flow_composes_rotation(resonant_spec, x1x2):
    Vavg = average(x1x2, resonance_module(resonant_spec))
    z0 = _pt([1.0, 0.4], [0.2, 0.8])
    reduced = reduced_hamiltonians(resonant_spec, z0.actions)
    frames = linearized_flow(z0, [((0.7,), 1.0), ((0.0,), 0.0)], Vavg, reduced)
    D = integrate_variational(z0, [1.0], Vavg).frames[0]
    np.testing.assert_allclose(frames[0].F, flow_matrix_oscillator([0.7, 0.7]) @ D, atol=1e-9)
    np.testing.assert_allclose(frames[1].F, np.eye(4), atol=1e-12)
    assert frames[0].defect < 1e-8
    assert linearized_flow(z0, [], Vavg) == []


def test_linearized_flow_rejects_bad_tau(x1x2):
    with pytest.raises(ValidationError):
        linearized_flow(_pt([1.0, 0.4], [0.2, 0.8]), [((0.1, 0.2, 0.3), 0.5)], x1x2)


def test_symplectic_renormalize_reduces_defect():
    rng = np.random.default_rng(3)
    F = flow_matrix_oscillator([0.3, 1.1]) + 1e-6 * rng.normal(size=(4, 4))
    before = symplectic_defect(F)
    after = symplectic_defect(symplectic_renormalize(F))
    assert after < before * 1e-3


def test_theta_growth_at_zero_horizon(resonant_spec, x1x2):
    theta = theta_growth(_pt([1.0, 0.4], [0.2, 0.8]), 0.0, x1x2, resonant_spec.omega)
    assert theta == pytest.approx(2.0)


def test_theta_growth_rejects_negative_horizon(x1x2):
    with pytest.raises(ValidationError):
        theta_growth(_pt([1.0, 0.4], [0.2, 0.8]), -1.0, x1x2, [1.0, 1.0])


def test_ehrenfest_time_for_rotation_flow():
    """Rotations never grow, so the budget only depends on ℏ."""
    H = WeylSymbol.harmonic_hamiltonian([1.0, 1.0])
    z0 = _pt([1.0, 0.4], [0.2, 0.8])
    assert ehrenfest_time(z0, H, [1.0, 1.0], hbar=1e-4, ladder=[1.0, 2.0, 4.0], samples=8) == 4.0
    assert ehrenfest_time(z0, H, [1.0, 1.0], hbar=0.5, ladder=[1.0, 2.0], samples=8) == 0.0


def test_ehrenfest_budget():
    assert ehrenfest_budget(1.0, 1e-4, 0.05)
    assert not ehrenfest_budget(100.0, 1e-2, 0.05)


def test_torus_measure_samples_stay_on_torus(resonant_spec):
    z0 = _pt([1.0, 0.4], [0.2, 0.8])
    mu = TorusMeasure.through(z0, resonant_spec)
    assert mu.d_E == 1
    pts = mu.sample(12)
    assert pts.shape == (12, 4)
    actions = 0.5 * (pts[:, :2] ** 2 + pts[:, 2:] ** 2)
    np.testing.assert_allclose(actions, np.tile(z0.actions, (12, 1)), atol=1e-12)
    mean_x1 = mu.expectation(lambda x, xi: x[..., 0], n=12)
    assert mean_x1 == pytest.approx(0.0, abs=1e-12)


def test_birkhoff_average_of_conserved_quantity(resonant_spec, x1x2):
    Vavg = average(x1x2, resonance_module(resonant_spec))
    z0 = _pt([1.0, 0.4], [0.2, 0.8])
    mu = TorusMeasure.through(z0, resonant_spec)
    energy = lambda x, xi: 0.5 * np.sum(x ** 2 + xi ** 2, axis=-1)
    report = birkhoff_average_measure(mu, Vavg, 2.0, {"H": energy}, torus_points=4, time_steps=32)
    assert report.values["H"] == pytest.approx(_total_energy(z0.as_array()), abs=1e-8)
    assert report.converged
    assert set(report.to_dict()) >= {"values", "values_doubled", "converged"}


def test_birkhoff_rejects_nonpositive_horizon(resonant_spec, x1x2):
    mu = TorusMeasure.through(_pt([1.0, 0.4], [0.2, 0.8]), resonant_spec)
    with pytest.raises(ValidationError):
        birkhoff_average_measure(mu, x1x2, 0.0, {})


def test_transport_points_matches_orbit(resonant_spec, x1x2):
    Vavg = average(x1x2, resonance_module(resonant_spec))
    cloud = np.array([[1.0, 0.4, 0.2, 0.8], [0.0, 1.0, -0.5, 0.1]])
    moved = transport_points(cloud, 1.5, Vavg)
    for start, end in zip(cloud, moved):
        expected = orbit(PhasePoint.from_array(start), [0.0, 1.5], Vavg)[-1]
        np.testing.assert_allclose(end, expected, atol=1e-9)
    np.testing.assert_allclose(transport_points(cloud, 0.0, Vavg), cloud)


def test_detect_tangent_flow(resonant_spec, x1x2):
    Vavg = average(x1x2, resonance_module(resonant_spec))
    # ⟨V⟩ = (x₁x₂ + ξ₁ξ₂)/2 rotates along the torus at x = (1, 1), ξ = 0
    on = _pt([1.0, 1.0], [0.0, 0.0])
    assert detect_tangent_flow(on, Vavg, reduced_hamiltonians(resonant_spec, on.actions))
    off = _pt([1.0, 0.0], [0.0, 0.0])
    assert not detect_tangent_flow(off, Vavg, reduced_hamiltonians(resonant_spec, off.actions))


def test_gradient_field_consistency_check():
    value = lambda x, xi: 0.5 * (x[..., 0] ** 2 + xi[..., 0] ** 2)
    good = lambda x, xi: np.stack([x[..., 0], xi[..., 0]], axis=-1)
    bad = lambda x, xi: np.stack([2 * x[..., 0], xi[..., 0]], axis=-1)
    z0 = _pt([0.6], [-0.3])
    field = HamiltonianField(1, gradient=good, value=value)
    end = averaged_flow(z0, 1.3, field)
    np.testing.assert_allclose(end.as_array(), oscillator_flow(z0, [1.3]).as_array(), atol=1e-8)
    np.testing.assert_allclose(field.hessian(z0.as_array()), np.eye(2), atol=1e-6)
    with pytest.raises(ValidationError):
        averaged_flow(z0, 1.0, HamiltonianField(1, gradient=bad, value=value))


def test_field_needs_symbol_or_gradient():
    with pytest.raises(ValidationError):
        HamiltonianField(2)
