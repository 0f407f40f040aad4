#!/usr/bin/env python3
"""Tests for Weyl quantization in truncated Hermite bases and windowed spectra."""

import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from src.classical.frequency import resonance_module
from src.classical.symbols import WeylSymbol, average
from src.core.errors import BandOverflowError, ClusterAmbiguityError, ValidationError
from src.quantum.quantization import (
    HermiteBasisSpec,
    OperatorMatrix,
    check_band,
    cluster_spectrum,
    fock_state,
    hamiltonian_matrix,
    hermite_functions,
    operator_norm,
    project_to_cluster,
    quantize,
    quantum_average,
    spectrum,
    wigner_pairing,
)


@pytest.fixture
def basis_2d():
    """ω = (1, 1), ℏ = 0.1, reliable band above E = 0.6."""
    return HermiteBasisSpec.for_window(2, 0.1, (1.0, 1.0), 0.6)


def test_basis_validation():
    with pytest.raises(ValidationError):
        HermiteBasisSpec(d=1, hbar=0.1, nmax=1)
    with pytest.raises(ValidationError):
        HermiteBasisSpec(d=1, hbar=0.0, nmax=4)
    with pytest.raises(ValidationError):
        HermiteBasisSpec(d=2, hbar=0.1, nmax=4, omega=(1.0, -1.0))
    with pytest.raises(ValidationError):
        HermiteBasisSpec(d=3, hbar=0.1, nmax=20, max_dim=1000)


def test_basis_for_window_reaches_energy(basis_2d):
    assert basis_2d.reliable_energy(2) >= 0.6 - 1e-12
    smaller = HermiteBasisSpec(d=2, hbar=0.1, nmax=basis_2d.nmax - 1)
    assert smaller.reliable_energy(2) < 0.6
    assert basis_2d.dim == basis_2d.nmax ** 2


def test_basis_indexing(basis_2d):
    assert basis_2d.index_of((0, 0)) == 0
    assert basis_2d.index_of((1, 2)) == basis_2d.nmax + 2
    np.testing.assert_array_equal(basis_2d.multi_indices[basis_2d.index_of((3, 1))], [3, 1])
    with pytest.raises(ValidationError):
        basis_2d.index_of((basis_2d.nmax, 0))
    assert basis_2d.energies[0] == pytest.approx(0.1)


def test_quantized_hamiltonian_is_diagonal(basis_2d):
    Hq = quantize(WeylSymbol.harmonic_hamiltonian([1.0, 1.0]), basis_2d)
    np.testing.assert_allclose(Hq.entries, hamiltonian_matrix(basis_2d).entries, atol=1e-12)


def test_position_matrix_elements():
    basis = HermiteBasisSpec(d=1, hbar=0.2, nmax=6)
    X = quantize(WeylSymbol.x(1, 0), basis)
    assert X.element((0,), (1,)) == pytest.approx(math.sqrt(0.1))
    assert X.element((2,), (3,)) == pytest.approx(math.sqrt(0.1) * math.sqrt(3))
    assert X.element((0,), (0,)) == 0
    assert X.is_hermitian()


def test_canonical_commutator():
    basis = HermiteBasisSpec(d=1, hbar=0.2, nmax=8)
    X = quantize(WeylSymbol.x(1, 0), basis)
    Xi = quantize(WeylSymbol.xi(1, 0), basis)
    C = X.commutator(Xi)
    # exact away from the truncation edge
    for k in range(basis.nmax - 1):
        assert C.element((k,), (k,)) == pytest.approx(0.2j)


def test_real_symbol_gives_hermitian_matrix(basis_2d, x1x2):
    V = quantize(x1x2 + WeylSymbol.xi(2, 0) ** 3, basis_2d)
    assert V.is_hermitian()
    assert V.degree == 3


def test_quantize_rejects_dimension_mismatch(basis_2d):
    with pytest.raises(ValidationError):
        quantize(WeylSymbol.x(1, 0), basis_2d)


def test_operator_matrix_checks(basis_2d):
    with pytest.raises(ValidationError):
        OperatorMatrix(basis_2d, np.zeros((3, 3)))
    other = HermiteBasisSpec(d=2, hbar=0.05, nmax=basis_2d.nmax)
    with pytest.raises(ValidationError):
        hamiltonian_matrix(basis_2d) + hamiltonian_matrix(other)


def test_quantum_average_matches_symbol_average(resonant_spec, basis_2d, x1x2):
    rm = resonance_module(resonant_spec)
    lhs = quantum_average(quantize(x1x2, basis_2d), rm)
    rhs = quantize(average(x1x2, rm), basis_2d)
    np.testing.assert_allclose(lhs.entries, rhs.entries, atol=1e-12)
    H = hamiltonian_matrix(basis_2d)
    assert np.max(np.abs(H.commutator(lhs).entries)) < 1e-12


def test_spectrum_window(basis_2d):
    pairs = spectrum(hamiltonian_matrix(basis_2d), (0.45, 0.55))
    # k₁ + k₂ = 4
    assert len(pairs) == 5
    np.testing.assert_allclose(pairs.values, 0.5)
    assert pairs.residual < 1e-12


def test_spectrum_rejects_bad_windows(basis_2d):
    H = hamiltonian_matrix(basis_2d)
    with pytest.raises(ValidationError):
        spectrum(H, (0.6, 0.4))
    with pytest.raises(BandOverflowError):
        spectrum(H, (0.5, 1.5))
    skew = OperatorMatrix(basis_2d, 1j * np.eye(basis_2d.dim) + np.triu(np.ones((basis_2d.dim, basis_2d.dim)), 1))
    with pytest.raises(ValidationError):
        spectrum(skew, (0.1, 0.2))


def test_cluster_spectrum(basis_2d, x1x2):
    H = hamiltonian_matrix(basis_2d)
    eps = 0.01
    P = H + quantize(x1x2, basis_2d).scaled(eps)
    report = cluster_spectrum(P, H, eps, (0.45, 0.55))
    assert len(report.clusters) == 1
    cluster = report.clusters[0]
    assert cluster.center == pytest.approx(0.5)
    assert cluster.multiplicity == 5
    assert len(cluster.members) == 5
    assert report.min_gap == pytest.approx(0.1)
    assert report.max_width <= report.width_bound + 1e-12
    assert report.accepted
    assert report.to_dict()["clusters"][0]["multiplicity"] == 5


def test_cluster_spectrum_ambiguous(basis_2d, x1x2):
    H = hamiltonian_matrix(basis_2d)
    P = H + quantize(x1x2, basis_2d)
    with pytest.raises(ClusterAmbiguityError):
        cluster_spectrum(P, H, 1.0, (0.45, 0.55))


def test_cluster_spectrum_needs_a_level(basis_2d):
    H = hamiltonian_matrix(basis_2d)
    with pytest.raises(ValidationError):
        cluster_spectrum(H, H, 0.0, (0.52, 0.58))


def test_operator_norm():
    assert operator_norm(np.diag([1.0, -3.0])) == pytest.approx(3.0)
    assert operator_norm(np.array([[0.0, 2.0], [0.0, 0.0]])) == pytest.approx(2.0)
    assert operator_norm(np.diag([1.0, -3.0]), mask=np.array([True, False])) == pytest.approx(1.0)


def test_operator_norm_rejects_empty_band():
    with pytest.raises(BandOverflowError):
        operator_norm(np.diag([1.0, -3.0]), mask=np.array([False, False]))

    # Degree-4 band of a 1-D basis with nmax = 3 lies below the ground state
    basis = HermiteBasisSpec(d=1, hbar=0.1, nmax=3)
    assert not basis.reliable_mask(4).any()
    with pytest.raises(BandOverflowError):
        operator_norm(hamiltonian_matrix(basis), basis.reliable_mask(4))


def test_project_to_cluster(basis_2d):
    H = hamiltonian_matrix(basis_2d)
    psi = fock_state(basis_2d, (2, 2)) + 0.1 * fock_state(basis_2d, (0, 0))
    result = project_to_cluster(psi, H, 0.5, 0.01)
    assert result.eigenvalue == pytest.approx(0.5)
    np.testing.assert_allclose(np.abs(result.state), np.abs(fock_state(basis_2d, (2, 2))), atol=1e-12)
    assert result.residual == pytest.approx(0.1 / math.sqrt(1.01))
    with pytest.raises(ClusterAmbiguityError):
        project_to_cluster(psi, H, 0.45, 0.1)
    with pytest.raises(ValidationError):
        project_to_cluster(np.zeros(basis_2d.dim), H, 0.5, 0.01)


def test_wigner_pairing(basis_2d):
    ground = fock_state(basis_2d, (0, 0))
    H = WeylSymbol.harmonic_hamiltonian([1.0, 1.0])
    assert wigner_pairing(ground, H, basis_2d) == pytest.approx(0.1)
    assert wigner_pairing(ground, hamiltonian_matrix(basis_2d)) == pytest.approx(0.1)
    with pytest.raises(ValidationError):
        wigner_pairing(ground, H)


def test_check_band(basis_2d):
    check_band(fock_state(basis_2d, (1, 1)), basis_2d, degree=2)
    top = basis_2d.nmax - 1
    with pytest.raises(BandOverflowError):
        check_band(fock_state(basis_2d, (top, 0)), basis_2d, degree=2)


def test_hermite_functions_orthonormal():
    y = np.linspace(-12.0, 12.0, 4001)
    h = hermite_functions(6, y)
    gram = np.array([[trapezoid(h[m] * h[n], y) for n in range(6)] for m in range(6)])
    np.testing.assert_allclose(gram, np.eye(6), atol=1e-10)
