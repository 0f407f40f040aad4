#!/usr/bin/env python3
"""Tests for Husimi clouds, invariance and localization checks and position marginals."""

import csv
import math

import numpy as np
import pytest

from src.classical.frequency import resonance_module
from src.classical.phase_point import PhasePoint
from src.classical.symbols import WeylSymbol, average
from src.core.errors import NumericalToleranceError, ValidationError
from src.quantum.coherent import coherent_state
from src.quantum.quantization import HermiteBasisSpec, OperatorMatrix, fock_state, hamiltonian_matrix, quantize, spectrum
from src.quasimodes.measures import (
    bracket_defect,
    default_observables,
    husimi_cloud,
    invariance_test,
    localization_test,
    marginal_wasserstein,
    pairing_table,
    position_marginal,
    single_torus_mass,
)

HBAR = 0.1


@pytest.fixture(scope="module")
def basis():
    return HermiteBasisSpec(d=1, hbar=HBAR, nmax=24)


@pytest.fixture(scope="module")
def coherent(basis):
    return coherent_state(PhasePoint(np.array([0.5]), np.array([0.3])), basis)


@pytest.fixture(scope="module")
def H1():
    return WeylSymbol.harmonic_hamiltonian([1.0])


def test_husimi_cloud_of_coherent_state(basis, coherent, H1):
    cloud = husimi_cloud(coherent, basis)
    assert cloud.captured_mass == pytest.approx(1.0, abs=1e-6)
    assert np.sum(cloud.weights) == pytest.approx(1.0)
    assert cloud.expectation(WeylSymbol.x(1, 0)) == pytest.approx(0.5, abs=1e-4)
    assert cloud.expectation(WeylSymbol.xi(1, 0)) == pytest.approx(0.3, abs=1e-4)
    # Husimi smoothing adds ℏ/2 per coordinate to the second moments
    assert cloud.expectation(H1) == pytest.approx(0.17 + HBAR, abs=1e-4)
    np.testing.assert_allclose(cloud.mode(), [0.5, 0.3], atol=0.25)


def test_husimi_cloud_validation(basis, coherent):
    with pytest.raises(ValidationError):
        husimi_cloud(np.zeros(basis.dim), basis)
    with pytest.raises(ValidationError):
        husimi_cloud(np.ones(3), basis)
    with pytest.raises(NumericalToleranceError):
        husimi_cloud(coherent, basis, radius=[0.1])


def test_empirical_measure_export(basis, coherent, tmp_path):
    cloud = husimi_cloud(coherent, basis, grid_points=8)
    path = tmp_path / "cloud.csv"
    cloud.to_csv(path)
    with open(path) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["x1", "xi1", "weight"]
    assert len(rows) == len(cloud.weights) + 1
    summary = cloud.to_dict()
    assert summary["points"] == len(cloud.weights)
    assert summary["hbar"] == HBAR


def test_invariance_under_harmonic_flow(basis, coherent):
    observables = {"x": WeylSymbol.x(1, 0)}
    report = invariance_test(coherent, basis, observables, WeylSymbol.zero(1), [0.0, math.pi / 2], [0.0])
    assert report.method == "weyl"
    # x∘Φ_{π/2} = ξ
    np.testing.assert_allclose(report.defects["x"], [[0.0], [0.2]], atol=1e-8)
    assert report.max_defect == pytest.approx(0.2, abs=1e-8)
    np.testing.assert_allclose(report.harmonic_defects()["x"], [0.0, 0.2], atol=1e-8)
    assert report.to_dict()["method"] == "weyl"


def test_fock_state_is_invariant(basis, H1):
    psi = fock_state(basis, (3,))
    observables = default_observables(1, 2)
    report = invariance_test(psi, basis, observables, H1 * 0.5, [0.0, 1.0, 2.0], [0.0, 0.7])
    assert report.method == "weyl"
    assert report.max_defect < 1e-10


def test_invariance_transport_method(basis, H1):
    """A quartic average rotates each circle at its own speed but keeps Fock clouds invariant."""
    psi = fock_state(basis, (2,))
    quartic = H1 * H1
    observables = {"x": WeylSymbol.x(1, 0), "H": H1}
    report = invariance_test(psi, basis, observables, quartic, [0.0, 1.0], [0.0, 0.5])
    assert report.method == "husimi"
    assert report.max_defect < 1e-6


def test_invariance_rejects_high_degree(basis, coherent):
    with pytest.raises(ValidationError):
        invariance_test(coherent, basis, {"x7": WeylSymbol.x(1, 0) ** 7}, WeylSymbol.zero(1), [0.0], [0.0])


def test_localization(basis, coherent, H1):
    r = 4 * math.sqrt(HBAR)
    out = localization_test(coherent, basis, {"near": (H1, 0.17), "far": (H1, 5.0)}, r)
    assert out["near"] < 1e-2
    assert out["far"] > 0.999
    with pytest.raises(ValidationError):
        localization_test(coherent, basis, {"near": (H1, 0.17)}, math.sqrt(HBAR))


def test_single_torus_mass(basis, oscillator_1d):
    cloud = husimi_cloud(fock_state(basis, (4,)), basis)
    E, mass = single_torus_mass(cloud, oscillator_1d, basis, 0.1)
    assert min(abs(E[0] - c) for c in (0.35, 0.45, 0.55)) < 1e-9
    assert 0.2 < mass < 0.6


@pytest.mark.parametrize("hbar", [0.1, 0.05])
def test_diophantine_eigenfunctions_sit_on_one_torus(diophantine_spec, x1x2, hbar):
    """ω = (1, √2), ε = ℏ³: every eigenfunction keeps ≥ 0.9 Husimi mass in the 4√ℏ-tube of one torus."""
    window = (0.70, 0.75)
    basis = HermiteBasisSpec.for_window(2, hbar, (1.0, math.sqrt(2)), window[1])
    H = hamiltonian_matrix(basis)
    P = OperatorMatrix(basis, H.entries + hbar ** 3 * quantize(x1x2, basis).entries, "P", 2)
    pairs = spectrum(P, window)
    assert len(pairs.values) > 0
    r = 4 * math.sqrt(hbar)
    for j in range(len(pairs.values)):
        cloud = husimi_cloud(pairs.vectors[:, j], basis)
        _, mass = single_torus_mass(cloud, diophantine_spec, basis, r)
        assert mass >= 0.9


def test_invariance_defect_decays_along_hbar(x1x2_quasimodes, resonant_spec, x1x2):
    """Harmonic-flow defects of synthesized quasimodes shrink with ℏ at ε = ℏ²."""
    Vavg = average(x1x2, resonance_module(resonant_spec))
    observables = default_observables(2, 2)
    defects = {}
    for hbar, q in x1x2_quasimodes.items():
        report = invariance_test(q.state, q.basis, observables, Vavg, [0.0, 1.0, 2.0], [0.0])
        assert report.method == "weyl"
        defects[hbar] = report.max_defect
    assert defects[0.1] > 0
    assert defects[0.05] < 0.75 * defects[0.1]


def test_position_marginal_of_ground_state(basis):
    marginal = position_marginal(fock_state(basis, (0,)), basis)
    assert marginal.mass == pytest.approx(1.0, abs=1e-6)
    mean, var = marginal.moments(0)
    assert mean == pytest.approx(0.0, abs=1e-10)
    assert var == pytest.approx(HBAR / 2, rel=1e-6)
    assert len(marginal.to_rows()) == len(marginal.axes[0])


def test_position_marginal_validation(basis, coherent):
    with pytest.raises(ValidationError):
        position_marginal(np.ones(3), basis)
    with pytest.raises(NumericalToleranceError):
        position_marginal(coherent, basis, x_grid=[-0.1, 0.0, 0.1])


def test_marginal_wasserstein(basis, coherent):
    """Gaussians with the same mean and widths √(ℏ/2), √ℏ."""
    marginal = position_marginal(coherent, basis)
    assert marginal.moments(0)[0] == pytest.approx(0.5, abs=1e-6)
    distance = marginal_wasserstein(marginal, husimi_cloud(coherent, basis, grid_points=128))
    expected = (math.sqrt(HBAR) - math.sqrt(HBAR / 2)) * math.sqrt(2 / math.pi)
    assert distance == pytest.approx(expected, rel=0.25)


def test_bracket_defect(basis, coherent, H1):
    x = WeylSymbol.x(1, 0)
    # {H, x} = ξ
    assert bracket_defect(coherent, H1, x, basis) == pytest.approx(0.3, abs=1e-8)
    assert bracket_defect(fock_state(basis, (3,)), H1, x, basis) == pytest.approx(0.0, abs=1e-12)


def test_pairing_table(basis, coherent):
    table = pairing_table(coherent, basis, {"x": WeylSymbol.x(1, 0)})
    assert table["x"]["weyl"] == pytest.approx(0.5, abs=1e-8)
    assert table["x"]["husimi"] == pytest.approx(0.5, abs=1e-4)


def test_default_observables():
    names = set(default_observables(1, 2))
    assert names == {"x1", "xi1", "x1^2", "x1*xi1", "xi1^2"}
    assert len(default_observables(2, 1)) == 4
