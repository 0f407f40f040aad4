# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Truncated Hermite-basis quantization.

Weyl quantization of monomial symbols through the ladder substitution
z_j → √(2ℏ) a_j, z̄_j → √(2ℏ) a_j† with full symmetrization. Matrices are
exact compressions of the infinite operators onto the multi-indices k with
k_j < nmax, stored in C order.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.special import comb, gammaln

from ..classical.frequency import ResonanceModule
from ..classical.symbols import WeylSymbol
from ..core.errors import BandOverflowError, ClusterAmbiguityError, NumericalToleranceError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_MAX_DIM = 4000
DEFAULT_BAND_MARGIN = 3.0
RESIDUAL_TOLERANCE = 1e-10
HERMITIAN_TOLERANCE = 1e-12
# Relative tolerance for merging numerically equal eigenvalues
LEVEL_MERGE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class HermiteBasisSpec:
    """
    Tensor Hermite basis {Ψ_k : 0 ≤ k_j < nmax}.

    Features:
    - C-ordered multi-indices and unperturbed energies ℏω·k + ℏ|ω|₁/2
    - cutoff and reliable-band energies for a given symbol degree
    - minimal basis selection for a target energy window
    """
    d: int
    hbar: float
    nmax: int
    omega: Tuple[float, ...] = ()
    max_dim: int = DEFAULT_MAX_DIM
    band_margin: float = DEFAULT_BAND_MARGIN

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValidationError(f"Basis dimension must be positive, got {self.d}")
        if not self.hbar > 0:
            raise ValidationError(f"hbar must be positive, got {self.hbar}")
        if self.nmax < 2:
            raise ValidationError(f"nmax must be at least 2, got {self.nmax}")
        omega = tuple(float(w) for w in self.omega) if self.omega else (1.0,) * self.d
        if len(omega) != self.d or min(omega) <= 0:
            raise ValidationError(f"Basis frequencies {omega} invalid for d={self.d}")
        object.__setattr__(self, "omega", omega)
        if self.nmax ** self.d > self.max_dim:
            raise ValidationError(
                f"Basis size {self.nmax}^{self.d} = {self.nmax ** self.d} exceeds cap {self.max_dim}"
            )

    @property
    def dim(self) -> int:
        return self.nmax ** self.d

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.nmax,) * self.d

    @property
    def multi_indices(self) -> np.ndarray:
        """Integer array (dim, d) of multi-indices in C order."""
        return _multi_indices(self.d, self.nmax)

    @property
    def energies(self) -> np.ndarray:
        w = np.asarray(self.omega)
        return self.hbar * (self.multi_indices @ w + 0.5 * w.sum())

    @property
    def cutoff_energy(self) -> float:
        """Every basis state below this energy has all its neighbours in the basis."""
        w = np.asarray(self.omega)
        return self.hbar * (w.min() * self.nmax + 0.5 * w.sum())

    def reliable_energy(self, degree: int = 1) -> float:
        """Cutoff energy minus band_margin·ℏ|ω|₁ per unit of symbol degree."""
        return self.cutoff_energy - self.band_margin * self.hbar * float(np.sum(self.omega)) * max(1, degree)

    def reliable_mask(self, degree: int = 1) -> np.ndarray:
        return self.energies <= self.reliable_energy(degree)

    def index_of(self, k: Sequence[int]) -> int:
        k = tuple(int(x) for x in k)
        if len(k) != self.d or min(k) < 0 or max(k) >= self.nmax:
            raise ValidationError(f"Multi-index {k} outside basis with nmax={self.nmax}")
        return int(np.ravel_multi_index(k, self.shape))

    @classmethod
    def for_window(
        cls,
        d: int,
        hbar: float,
        omega: Sequence[float],
        energy: float,
        degree: int = 2,
        band_margin: float = DEFAULT_BAND_MARGIN,
        max_dim: int = DEFAULT_MAX_DIM,
    ) -> "HermiteBasisSpec":
        """
        Smallest basis whose reliable band reaches a target energy.

        Args:
            d: Dimension
            hbar: Semiclassical parameter
            omega: Frequency vector
            energy: Upper end of the window of interest
            degree: Maximal symbol degree acting on the window
            band_margin: Reliable-band margin in units of ℏ|ω|₁
            max_dim: Basis size cap

        Returns:
            HermiteBasisSpec
        """
        w = np.asarray(omega, dtype=float)
        needed = (energy / hbar - 0.5 * w.sum() + band_margin * w.sum() * max(1, degree)) / w.min()
        nmax = max(2, int(math.ceil(needed - 1e-9)))
        logger.debug(f"Basis for E<={energy}, hbar={hbar}: nmax={nmax}, dim={nmax ** d}")
        return cls(d=d, hbar=hbar, nmax=nmax, omega=tuple(w), max_dim=max_dim, band_margin=band_margin)

    def to_dict(self) -> Dict[str, Any]:
        return {"d": self.d, "hbar": self.hbar, "nmax": self.nmax, "omega": list(self.omega)}


@lru_cache(maxsize=16)
def _multi_indices(d: int, nmax: int) -> np.ndarray:
    grid = np.indices((nmax,) * d).reshape(d, -1).T
    grid.setflags(write=False)
    return grid


@lru_cache(maxsize=512)
def _normal_ordered(m: int, n: int, nmax: int) -> np.ndarray:
    """Compression of a†^m a^n onto span{|0⟩ … |nmax−1⟩}."""
    M = np.zeros((nmax, nmax))
    i = np.arange(n, nmax)
    j = i - n + m
    keep = j < nmax
    i, j = i[keep], j[keep]
    M[j, i] = np.exp(0.5 * (gammaln(i + 1) + gammaln(j + 1)) - gammaln(i - n + 1))
    M.setflags(write=False)
    return M


@lru_cache(maxsize=512)
def _weyl_mode_matrix(p: int, q: int, nmax: int) -> np.ndarray:
    """
    Single-mode Weyl-ordered a^p a†^q.

    sym(a^p a†^q) = Σ_k k! C(p,k) C(q,k) 2^{−k} a†^{q−k} a^{p−k}.
    """
    M = np.zeros((nmax, nmax))
    for k in range(min(p, q) + 1):
        c = math.factorial(k) * comb(p, k, exact=True) * comb(q, k, exact=True) / 2 ** k
        M = M + c * _normal_ordered(q - k, p - k, nmax)
    M.setflags(write=False)
    return M


@dataclass
class OperatorMatrix:
    """Matrix of an operator in a HermiteBasisSpec, with provenance."""
    basis: HermiteBasisSpec
    entries: np.ndarray
    symbol_tag: str = ""
    degree: int = 0

    def __post_init__(self) -> None:
        if self.entries.shape != (self.basis.dim, self.basis.dim):
            raise ValidationError(f"Matrix shape {self.entries.shape} does not match basis dim {self.basis.dim}")

    def _compatible(self, other: "OperatorMatrix") -> None:
        if other.basis != self.basis:
            raise ValidationError("Operators live in different bases")

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._compatible(other)
        return OperatorMatrix(
            self.basis, self.entries + other.entries, f"({self.symbol_tag})+({other.symbol_tag})",
            max(self.degree, other.degree),
        )

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return self + other.scaled(-1.0)

    def scaled(self, c: complex) -> "OperatorMatrix":
        return OperatorMatrix(self.basis, c * self.entries, f"{c}*({self.symbol_tag})", self.degree)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._compatible(other)
        return OperatorMatrix(
            self.basis, self.entries @ other.entries, f"({self.symbol_tag})@({other.symbol_tag})",
            self.degree + other.degree,
        )

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.basis, self.entries.conj().T, f"({self.symbol_tag})^*", self.degree)

    def commutator(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._compatible(other)
        return OperatorMatrix(
            self.basis,
            self.entries @ other.entries - other.entries @ self.entries,
            f"[{self.symbol_tag},{other.symbol_tag}]",
            self.degree + other.degree,
        )

    @property
    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0))

    def is_hermitian(self, tol: float = HERMITIAN_TOLERANCE) -> bool:
        return self.hermitian_defect <= tol * max(1.0, float(np.max(np.abs(self.entries), initial=0.0)))

    @property
    def is_diagonal(self) -> bool:
        off = self.entries - np.diag(np.diag(self.entries))
        return not np.any(off)

    def element(self, k: Sequence[int], kp: Sequence[int]) -> complex:
        """⟨Ψ_k | A | Ψ_{k′}⟩."""
        return complex(self.entries[self.basis.index_of(k), self.basis.index_of(kp)])


def quantize(s: WeylSymbol, basis: HermiteBasisSpec, tag: Optional[str] = None) -> OperatorMatrix:
    """
    Weyl quantization Op_ℏ(s) in a truncated Hermite basis.

    Args:
        s: Polynomial symbol
        basis: Hermite basis

    Returns:
        OperatorMatrix; Hermitian when s is real
    """
    if s.d != basis.d:
        raise ValidationError(f"Symbol dimension {s.d} does not match basis dimension {basis.d}")
    dtype = complex
    A = np.zeros((basis.dim, basis.dim), dtype=dtype)
    for (a, b), c in s.terms.items():
        scale = (2 * basis.hbar) ** ((sum(a) + sum(b)) / 2)
        block = np.ones((1, 1))
        for j in range(basis.d):
            block = np.kron(block, _weyl_mode_matrix(a[j], b[j], basis.nmax))
        A += (c * scale) * block
    return OperatorMatrix(basis, A, tag or _symbol_tag(s), s.max_degree)


def _symbol_tag(s: WeylSymbol) -> str:
    from ..core.schema import hash_document
    return f"symbol:{hash_document(s.to_dict())}"


def hamiltonian_matrix(basis: HermiteBasisSpec) -> OperatorMatrix:
    """Ĥ_ℏ = Op_ℏ(H) as the exact diagonal of energies."""
    return OperatorMatrix(basis, np.diag(basis.energies).astype(complex), "H", 2)


@dataclass
class Eigenpairs:
    """Eigenvalues in a window with their eigenvectors as columns."""
    values: np.ndarray
    vectors: np.ndarray
    window: Tuple[float, float]
    residual: float = 0.0

    def __len__(self) -> int:
        return len(self.values)


def spectrum(
    P: OperatorMatrix,
    window: Tuple[float, float],
    degree: Optional[int] = None,
    residual_tol: float = RESIDUAL_TOLERANCE,
) -> Eigenpairs:
    """
    Hermitian eigensolve restricted to an energy window.

    Args:
        P: Hermitian operator
        window: (lo, hi) energy interval
        degree: Symbol degree controlling the reliable band (default P.degree)
        residual_tol: Accepted ‖Pv − λv‖ relative to max(1, |λ|)

    Returns:
        Eigenpairs sorted by value
    """
    lo, hi = float(window[0]), float(window[1])
    if lo > hi:
        raise ValidationError(f"Empty window [{lo}, {hi}]")
    deg = P.degree if degree is None else degree
    limit = P.basis.reliable_energy(deg)
    if hi > limit:
        raise BandOverflowError(f"Window top {hi} exceeds reliable energy {limit:.6g} (nmax={P.basis.nmax})")
    if not P.is_hermitian():
        raise ValidationError(f"Operator {P.symbol_tag} is not Hermitian (defect {P.hermitian_defect:.3e})")
    try:
        values, vectors = linalg.eigh(P.entries, subset_by_value=(lo, hi))
    except linalg.LinAlgError as e:
        raise NumericalToleranceError(f"Eigensolve failed: {e}") from e

    residual = 0.0
    if len(values):
        R = P.entries @ vectors - vectors * values
        residual = float(np.max(np.linalg.norm(R, axis=0) / np.maximum(1.0, np.abs(values))))
        if residual > residual_tol:
            raise NumericalToleranceError(f"Eigen-residual {residual:.3e} exceeds {residual_tol}")
    return Eigenpairs(values=values, vectors=vectors, window=(lo, hi), residual=residual)


def _resonance_classes(basis: HermiteBasisSpec, rm: ResonanceModule) -> np.ndarray:
    """ν_n·k for every basis index, shape (dim, d_ω)."""
    nu = np.array(rm.perp_basis, dtype=np.int64)
    return basis.multi_indices @ nu.T


def resonant_mask(basis: HermiteBasisSpec, rm: ResonanceModule) -> np.ndarray:
    """Boolean (dim, dim) mask of entries with k − k′ ∈ Λ_ω."""
    cls = _resonance_classes(basis, rm)
    return np.all(cls[:, None, :] == cls[None, :, :], axis=-1)


def quantum_average(A: OperatorMatrix, rm: ResonanceModule) -> OperatorMatrix:
    """
    Quantum average ⟨A⟩: zero every entry with k − k′ ∉ Λ_ω.

    Args:
        A: Operator
        rm: Resonance module

    Returns:
        Resonant part of A
    """
    mask = resonant_mask(A.basis, rm)
    return OperatorMatrix(A.basis, np.where(mask, A.entries, 0), f"<{A.symbol_tag}>", A.degree)


def operator_norm(A: Union[OperatorMatrix, np.ndarray], mask: Optional[np.ndarray] = None) -> float:
    """
    Operator norm, optionally restricted to a subset of basis indices.

    Hermitian inputs use the largest-magnitude eigenvalue, others the
    largest singular value.
    """
    M = A.entries if isinstance(A, OperatorMatrix) else np.asarray(A)
    if mask is not None:
        if not np.any(mask):
            raise BandOverflowError("Reliable band is empty; enlarge nmax or lower the symbol degree")
        M = M[np.ix_(mask, mask)]
    if M.size == 0:
        return 0.0
    if np.allclose(M, M.conj().T, atol=HERMITIAN_TOLERANCE * max(1.0, float(np.max(np.abs(M))))):
        return float(np.max(np.abs(linalg.eigvalsh(M))))
    return float(linalg.norm(M, 2))


def _distinct_levels(values: np.ndarray) -> List[Tuple[float, int]]:
    """Group sorted eigenvalues into (level, multiplicity)."""
    levels: List[Tuple[float, int]] = []
    for v in np.sort(values):
        if levels and abs(v - levels[-1][0]) <= LEVEL_MERGE_TOLERANCE * max(1.0, abs(v)):
            levels[-1] = (levels[-1][0], levels[-1][1] + 1)
        else:
            levels.append((float(v), 1))
    return levels


@dataclass
class Cluster:
    center: float
    multiplicity: int
    members: List[float]

    @property
    def width(self) -> float:
        return max(self.members) - min(self.members) if self.members else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {"center": self.center, "multiplicity": self.multiplicity, "members": self.members, "width": self.width}


@dataclass
class ClusterReport:
    """
    Spectral clusters of P̂ around the levels of Ĥ in a window.

    Features:
    - per-cluster center, members and width
    - minimal unperturbed gap around the window
    - first-order width bound 2ε‖V‖
    """
    clusters: List[Cluster]
    min_gap: float
    eps: float
    v_norm: float
    window: Tuple[float, float] = (0.0, 0.0)
    notes: List[str] = field(default_factory=list)

    @property
    def max_width(self) -> float:
        return max((c.width for c in self.clusters), default=0.0)

    @property
    def width_bound(self) -> float:
        return 2 * self.eps * self.v_norm

    @property
    def accepted(self) -> bool:
        return self.max_width < self.min_gap

    def to_dict(self) -> Dict[str, Any]:
        return {
            "window": list(self.window),
            "eps": self.eps,
            "v_norm": self.v_norm,
            "min_gap": self.min_gap,
            "max_width": self.max_width,
            "width_bound": self.width_bound,
            "accepted": self.accepted,
            "clusters": [c.to_dict() for c in self.clusters],
        }


def cluster_spectrum(
    P: OperatorMatrix,
    H: OperatorMatrix,
    eps: float,
    window: Tuple[float, float],
    v_norm: Optional[float] = None,
) -> ClusterReport:
    """
    Assign the eigenvalues of P̂ = Ĥ + εV̂ to the nearest level of Ĥ.

    Args:
        P: Perturbed operator
        H: Unperturbed operator
        eps: Perturbation size
        window: Energy window selecting the unperturbed levels
        v_norm: ‖V̂‖ on the reliable band (computed from (P − H)/ε when omitted)

    Returns:
        ClusterReport
    """
    lo, hi = window
    basis = P.basis
    mask = basis.reliable_mask(max(P.degree, H.degree, 1))
    if v_norm is None:
        v_norm = operator_norm((P - H).entries / eps, mask) if eps else 0.0
    bound = abs(eps) * v_norm

    h_values = np.real(np.diag(H.entries)) if H.is_diagonal else linalg.eigvalsh(H.entries)
    h_values = h_values[h_values <= basis.reliable_energy(H.degree)]
    levels = _distinct_levels(h_values)
    centers = np.array([lv for lv, _ in levels])
    inside = [i for i, c in enumerate(centers) if lo <= c <= hi]
    if not inside:
        raise ValidationError(f"No unperturbed level in window [{lo}, {hi}]")

    neighbourhood = centers[max(0, inside[0] - 1): inside[-1] + 2]
    min_gap = float(np.min(np.diff(neighbourhood))) if len(neighbourhood) > 1 else math.inf
    if bound >= min_gap / 2:
        raise ClusterAmbiguityError(
            f"eps*||V|| = {bound:.3e} is not below half the unperturbed gap {min_gap:.3e}"
        )

    pairs = spectrum(P, (centers[inside[0]] - bound - 1e-12, centers[inside[-1]] + bound + 1e-12))
    clusters = [Cluster(center=float(centers[i]), multiplicity=levels[i][1], members=[]) for i in inside]
    for value in pairs.values:
        nearest = int(np.argmin(np.abs(centers - value)))
        if nearest in inside:
            clusters[inside.index(nearest)].members.append(float(value))

    for c in clusters:
        if len(c.members) != c.multiplicity:
            raise ClusterAmbiguityError(
                f"Level {c.center:.6g} has multiplicity {c.multiplicity} but {len(c.members)} perturbed eigenvalues"
            )
    report = ClusterReport(clusters=clusters, min_gap=min_gap, eps=eps, v_norm=v_norm, window=(lo, hi))
    if report.max_width > report.width_bound * (1 + 1e-9) + 1e-12:
        report.notes.append("max cluster width exceeds 2*eps*||V||")
        logger.warning(f"Cluster width {report.max_width:.3e} exceeds first-order bound {report.width_bound:.3e}")
    return report


@dataclass
class ProjectionResult:
    state: np.ndarray
    eigenvalue: float
    residual: float


def project_to_cluster(psi: np.ndarray, H: OperatorMatrix, lam: float, delta: float) -> ProjectionResult:
    """
    Spectral projection of ψ onto the eigenspace of Ĥ in [λ − δ, λ + δ].

    Args:
        psi: State vector
        H: Hermitian operator
        lam: Window center
        delta: Window half-width

    Returns:
        Normalized projected state, the unique eigenvalue Λ and ‖ψ − Πψ‖ (ψ normalized first)
    """
    psi = np.asarray(psi, dtype=complex)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValidationError("Cannot project the zero vector")
    psi = psi / norm
    if H.is_diagonal:
        values = np.real(np.diag(H.entries))
        idx = np.nonzero(np.abs(values - lam) <= delta)[0]
        levels = _distinct_levels(values[idx])
        projected = np.zeros_like(psi)
        projected[idx] = psi[idx]
    else:
        values, vectors = linalg.eigh(H.entries, subset_by_value=(lam - delta, lam + delta))
        levels = _distinct_levels(values)
        projected = vectors @ (vectors.conj().T @ psi)
    if len(levels) != 1:
        raise ClusterAmbiguityError(f"Window [{lam - delta}, {lam + delta}] contains {len(levels)} eigenvalues, expected one")
    residual = float(np.linalg.norm(psi - projected))
    pnorm = np.linalg.norm(projected)
    if pnorm == 0:
        raise ValidationError("State is orthogonal to the selected eigenspace")
    return ProjectionResult(state=projected / pnorm, eigenvalue=levels[0][0], residual=residual)


def wigner_pairing(
    psi: np.ndarray, a: Union[WeylSymbol, OperatorMatrix], basis: Optional[HermiteBasisSpec] = None
) -> Union[float, complex]:
    """
    W^ℏ_ψ(a) = ⟨ψ, Op_ℏ(a) ψ⟩.

    Args:
        psi: State vector
        a: Symbol (quantized in basis) or a quantized operator

    Returns:
        Real value for real symbols, complex otherwise
    """
    if isinstance(a, WeylSymbol):
        if basis is None:
            raise ValidationError("A basis is required to pair with a symbol")
        A = quantize(a, basis)
        real = a.is_real()
    else:
        A = a
        real = a.is_hermitian()
    value = complex(np.vdot(psi, A.entries @ psi))
    return value.real if real else value


def band_leakage(psi: np.ndarray, basis: HermiteBasisSpec, degree: int = 1) -> float:
    """Weight of ψ on basis states above the reliable band."""
    outside = ~basis.reliable_mask(degree)
    return float(np.sum(np.abs(np.asarray(psi)[outside]) ** 2))


def check_band(psi: np.ndarray, basis: HermiteBasisSpec, degree: int = 1, tol: float = 1e-6) -> None:
    """Raise BandOverflowError when ψ reaches above the reliable band."""
    leak = band_leakage(psi, basis, degree)
    if leak > tol:
        raise BandOverflowError(f"State has weight {leak:.3e} above the reliable band (nmax={basis.nmax})")


def hermite_functions(n: int, y: np.ndarray) -> np.ndarray:
    """
    Normalized Hermite functions h_0 … h_{n−1} on a grid.

    Uses h_{k+1} = √(2/(k+1)) y h_k − √(k/(k+1)) h_{k−1}, h_0 = π^{−1/4} e^{−y²/2}.

    Args:
        n: Number of functions
        y: Grid

    Returns:
        Array (n, len(y))
    """
    y = np.asarray(y, dtype=float)
    h = np.zeros((n,) + y.shape)
    h[0] = np.pi ** -0.25 * np.exp(-0.5 * y ** 2)
    if n > 1:
        h[1] = math.sqrt(2.0) * y * h[0]
    for k in range(1, n - 1):
        h[k + 1] = math.sqrt(2.0 / (k + 1)) * y * h[k] - math.sqrt(k / (k + 1)) * h[k - 1]
    return h


def fock_state(basis: HermiteBasisSpec, k: Sequence[int]) -> np.ndarray:
    """Unit vector Ψ_k."""
    psi = np.zeros(basis.dim, dtype=complex)
    psi[basis.index_of(k)] = 1.0
    return psi
