# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Exact frequency arithmetic.

Holds the factorized frequency vector ω = Σ v_n ν_n, its resonance lattice
Λ_ω = {k ∈ Z^d : k·ω = 0}, the reduced periodic Hamiltonians attached to a
torus 𝕄⁻¹(E) and small-denominator diagnostics.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy
from sympy.matrices.normalforms import smith_normal_decomp, smith_normal_form
from sympy.polys.domains import ZZ

from ..core.errors import ValidationError
from ..core.schema import encode_exact_number, parse_exact_number, require_fields

logger = logging.getLogger(__name__)

MAX_DIMENSION = 6
# Coefficient bound for the rational-dependence heuristic
RELATION_SEARCH_BOUND = 6
RELATION_TOLERANCE = 1e-12

IntVector = Tuple[int, ...]


@dataclass(frozen=True)
class FrequencySpec:
    """
    Exact factorization ω = Σ v_n ν_n of a positive frequency vector.

    The ν_n are primitive, pairwise orthogonal integer vectors and the v_n are
    declared rationally independent. Build instances with create() or
    from_dict() so the collapse of rationally related v_n is applied.
    """
    d: int
    nu: Tuple[IntVector, ...]
    v: Tuple[sympy.Expr, ...]
    exact: bool = True

    @property
    def d_omega(self) -> int:
        return len(self.nu)

    @property
    def nu_matrix(self) -> np.ndarray:
        """Integer matrix with rows ν_n, shape (d_ω, d)."""
        return np.array(self.nu, dtype=np.int64).reshape(self.d_omega, self.d)

    @property
    def v_float(self) -> np.ndarray:
        return np.array([float(x) for x in self.v])

    @property
    def omega_exact(self) -> Tuple[sympy.Expr, ...]:
        return tuple(
            sympy.expand(sum((self.v[n] * self.nu[n][j] for n in range(self.d_omega)), sympy.Integer(0)))
            for j in range(self.d)
        )

    @property
    def omega(self) -> np.ndarray:
        return self.v_float @ self.nu_matrix.astype(float)

    @property
    def is_homogeneous_periodic(self) -> bool:
        """True for ω = (1, …, 1)."""
        return self.d_omega == 1 and self.nu[0] == (1,) * self.d and self.v[0] == 1

    @classmethod
    def create(cls, d: int, nu: Sequence[Sequence[int]], v: Sequence[Any]) -> "FrequencySpec":
        """
        Validate and normalize a factorized frequency vector.

        Args:
            d: Phase-space half dimension
            nu: Integer vectors ν_n
            v: Coefficients (sympy numbers or floats)

        Returns:
            Normalized FrequencySpec
        """
        if not isinstance(d, int) or d < 1:
            raise ValidationError(f"Dimension must be a positive integer, got {d!r}")
        if d > MAX_DIMENSION:
            raise ValidationError(f"Dimension {d} exceeds supported maximum {MAX_DIMENSION}")
        if len(nu) == 0 or len(nu) != len(v):
            raise ValidationError("nu and v must be nonempty and of equal length")
        if len(nu) > d:
            raise ValidationError(f"d_omega={len(nu)} exceeds d={d}")

        vectors: List[IntVector] = []
        for vec in nu:
            if len(vec) != d or not all(isinstance(c, (int, np.integer)) for c in vec):
                raise ValidationError(f"nu vector {vec!r} must have {d} integer entries")
            vectors.append(tuple(int(c) for c in vec))
        _check_primitive_orthogonal(vectors)

        values = [sympy.sympify(x) for x in v]
        for x in values:
            if x == 0:
                raise ValidationError("Every v_n must be nonzero")
        exact = not any(isinstance(x, sympy.Float) for x in values)

        if exact:
            vectors, values = _collapse_rational_groups(vectors, values)
        else:
            logger.warning(
                "Float frequency coefficients supplied; rational independence is assumed, not checked exactly"
            )

        for n, value in enumerate(values):
            if float(value) < 0:
                values[n] = -value
                vectors[n] = tuple(-c for c in vectors[n])

        spec = cls(d=d, nu=tuple(vectors), v=tuple(values), exact=exact)
        if np.any(spec.omega <= 0):
            raise ValidationError(f"Every component of omega must be positive, got {spec.omega}")
        _warn_possible_relations(spec.v_float)
        return spec

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FrequencySpec":
        """Create a spec from its JSON form {"d", "nu", "v"}."""
        require_fields(data, ("d", "nu", "v"), "frequency spec")
        values = [parse_exact_number(x)[0] for x in data["v"]]
        return cls.create(data["d"], data["nu"], values)

    def to_dict(self) -> Dict[str, Any]:
        """Convert spec to its JSON form."""
        return {
            "d": self.d,
            "nu": [list(vec) for vec in self.nu],
            "v": [encode_exact_number(x) for x in self.v],
        }


def _check_primitive_orthogonal(vectors: List[IntVector]) -> None:
    for vec in vectors:
        if all(c == 0 for c in vec):
            raise ValidationError("nu vectors must be nonzero")
        if math.gcd(*vec) != 1:
            raise ValidationError(f"nu vector {vec} is not primitive")
    for a, b in itertools.combinations(vectors, 2):
        if sum(x * y for x, y in zip(a, b)) != 0:
            raise ValidationError(f"nu vectors {a} and {b} are not orthogonal")


def _collapse_rational_groups(
    vectors: List[IntVector], values: List[sympy.Expr]
) -> Tuple[List[IntVector], List[sympy.Expr]]:
    """Merge ν_n whose v_n have rational ratios into one primitive vector."""
    groups: List[List[int]] = []
    for i, value in enumerate(values):
        for group in groups:
            ratio = sympy.nsimplify(value / values[group[0]])
            if ratio.is_rational:
                group.append(i)
                break
        else:
            groups.append([i])

    merged_vectors: List[IntVector] = []
    merged_values: List[sympy.Expr] = []
    for group in groups:
        rep = values[group[0]]
        if len(group) == 1:
            merged_vectors.append(vectors[group[0]])
            merged_values.append(rep)
            continue
        combined = [sympy.Integer(0)] * len(vectors[0])
        for i in group:
            q = sympy.nsimplify(values[i] / rep)
            combined = [c + q * x for c, x in zip(combined, vectors[i])]
        lcm = sympy.ilcm(*[sympy.Rational(c).q for c in combined])
        ints = [int(c * lcm) for c in combined]
        g = math.gcd(*ints)
        primitive = tuple(x // g for x in ints)
        merged_vectors.append(primitive)
        merged_values.append(sympy.nsimplify(rep * g / lcm))
        logger.info(f"Collapsed rationally related components {group} into nu={primitive}")

    return merged_vectors, merged_values


def _warn_possible_relations(v: np.ndarray) -> None:
    """Warn when small integer combinations of v nearly vanish."""
    if len(v) < 2:
        return
    bound = RELATION_SEARCH_BOUND if len(v) <= 3 else max(2, RELATION_SEARCH_BOUND // (len(v) - 2))
    rng = range(-bound, bound + 1)
    q = np.array(list(itertools.product(rng, repeat=len(v))), dtype=float)
    q = q[np.any(q != 0, axis=1)]
    hits = np.abs(q @ v) < RELATION_TOLERANCE
    if np.any(hits):
        witness = tuple(int(c) for c in q[np.argmax(hits)])
        logger.warning(f"Frequency coefficients look rationally dependent: q={witness}")


@dataclass(frozen=True)
class ResonanceModule:
    """Integer basis of Λ_ω together with the ν_n spanning its orthogonal and ω itself."""
    lattice_basis: Tuple[IntVector, ...]
    perp_basis: Tuple[IntVector, ...]
    d: int
    omega: Tuple[float, ...] = ()

    @property
    def rank(self) -> int:
        return len(self.lattice_basis)

    def contains(self, k: Sequence[int]) -> bool:
        """Exact membership test k ∈ Λ_ω."""
        return all(sum(a * b for a, b in zip(k, nu)) == 0 for nu in self.perp_basis)

    def resonant_mask(self, differences: np.ndarray) -> np.ndarray:
        """
        Vectorized membership test.

        Args:
            differences: Integer array (..., d)

        Returns:
            Boolean array (...) true where the vector lies in Λ_ω
        """
        nu = np.array(self.perp_basis, dtype=np.int64)
        return np.all(differences @ nu.T == 0, axis=-1)


def integer_kernel(A: np.ndarray) -> np.ndarray:
    """
    Columns spanning the integer kernel of an integer matrix.

    With S = U·A·V the Smith decomposition, the columns of the unimodular V
    past the rank of S span ker A ∩ Z^d and are saturated.

    Args:
        A: Integer matrix of shape (m, d)

    Returns:
        Integer matrix of shape (d, d - rank)
    """
    M = sympy.Matrix([[int(x) for x in row] for row in np.asarray(A)])
    S, _, V = smith_normal_decomp(M, domain=ZZ)
    rank = sum(1 for i in range(min(S.shape)) if S[i, i] != 0)
    kernel = [[int(x) for x in V[i, rank:]] for i in range(V.rows)]
    return np.array(kernel, dtype=object).reshape(V.rows, V.cols - rank)


def _normalize_sign(vec: Sequence[int]) -> IntVector:
    for c in vec:
        if c != 0:
            return tuple(int(x) for x in vec) if c > 0 else tuple(-int(x) for x in vec)
    return tuple(int(x) for x in vec)


def resonance_module(spec: FrequencySpec) -> ResonanceModule:
    """
    Compute an integer basis of Λ_ω.

    Args:
        spec: Normalized frequency spec

    Returns:
        ResonanceModule with rank d − d_ω
    """
    _check_primitive_orthogonal(list(spec.nu))
    if spec.d_omega > spec.d:
        raise ValidationError(f"d_omega={spec.d_omega} exceeds d={spec.d}")

    kernel = integer_kernel(spec.nu_matrix)
    basis = tuple(_normalize_sign(kernel[:, j]) for j in range(kernel.shape[1]))

    for k in basis:
        for nu in spec.nu:
            if sum(a * b for a, b in zip(k, nu)) != 0:
                raise RuntimeError(f"Kernel vector {k} fails k·nu=0 for nu={nu}")
    if len(basis) != spec.d - spec.d_omega:
        raise RuntimeError(f"Kernel rank {len(basis)} != d - d_omega = {spec.d - spec.d_omega}")
    if basis:
        snf = smith_normal_form(sympy.Matrix([list(k) for k in basis]).T, domain=ZZ)
        factors = [abs(snf[i, i]) for i in range(min(snf.shape))]
        if any(f != 1 for f in factors):
            raise RuntimeError(f"Kernel basis is not saturated: invariant factors {factors}")

    return ResonanceModule(
        lattice_basis=basis,
        perp_basis=spec.nu,
        d=spec.d,
        omega=tuple(float(w) for w in spec.omega),
    )


def fourier_index(spec: FrequencySpec, a: Sequence[int], b: Sequence[int]) -> IntVector:
    """
    Torus frequency of the monomial z^a z̄^b.

    Args:
        spec: Frequency spec
        a: Exponents of z
        b: Exponents of z̄

    Returns:
        k ∈ Z^{d_ω} with z^a z̄^b ∘ Φ^𝓗_τ = e^{ik·τ} z^a z̄^b
    """
    diff = [x - y for x, y in zip(a, b)]
    return tuple(-sum(n * c for n, c in zip(nu, diff)) for nu in spec.nu)


def project_degenerate(E: Sequence[float], w: Sequence[float]) -> np.ndarray:
    """
    Zero the components of w where E vanishes.

    Args:
        E: Torus actions, componentwise ≥ 0
        w: Vector to project

    Returns:
        π_E(w)
    """
    E_arr = np.asarray(E, dtype=float)
    w_arr = np.asarray(w)
    if E_arr.shape != w_arr.shape:
        raise ValidationError(f"Shape mismatch between E {E_arr.shape} and w {w_arr.shape}")
    if np.any(E_arr < 0):
        raise ValidationError(f"E must be componentwise nonnegative, got {E_arr}")
    return np.where(E_arr > 0, w_arr, 0 * w_arr)


@dataclass(frozen=True)
class ReducedHamiltonianSet:
    """
    Reduced periodic Hamiltonians 𝓗̃^E_j attached to a torus 𝕄⁻¹(E).

    Features:
    - selection ℓ_E of linearly independent projected ν (0-based indices)
    - integer coprime coefficient vectors c_j with 𝓗̃_j = Σ_i c_{j,i} H_i
    - rational coefficients b_{n,j} and frequencies ṽ_E
    """
    E: Tuple[float, ...]
    hamiltonian_vectors: Tuple[IntVector, ...]
    selection: Tuple[int, ...]
    gcds: Tuple[int, ...]
    coefficients: Tuple[IntVector, ...]
    b: Dict[Tuple[int, int], sympy.Rational] = field(default_factory=dict)
    v_tilde_exact: Tuple[sympy.Expr, ...] = ()

    @property
    def d_E(self) -> int:
        return len(self.selection)

    @property
    def d(self) -> int:
        return len(self.E)

    @property
    def v_tilde(self) -> np.ndarray:
        return np.array([float(x) for x in self.v_tilde_exact])

    @property
    def coefficient_matrix(self) -> np.ndarray:
        """Integer matrix with rows c_j, shape (d_E, d)."""
        return np.array(self.coefficients, dtype=np.int64).reshape(self.d_E, self.d)

    def mode_angles(self, tau: Sequence[float]) -> np.ndarray:
        """Per-mode rotation angles of Φ^{𝓗̃}_τ."""
        return np.asarray(tau, dtype=float) @ self.coefficient_matrix.astype(float)

    def values(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """𝓗̃_j evaluated at (x, ξ); trailing axis d."""
        actions = 0.5 * (np.asarray(x) ** 2 + np.asarray(xi) ** 2)
        return actions @ self.coefficient_matrix.T.astype(float)

    @property
    def null_modes(self) -> Tuple[int, ...]:
        """Modes with E_i = 0."""
        return tuple(i for i, e in enumerate(self.E) if e <= 0)


def reduced_hamiltonians(spec: FrequencySpec, E: Sequence[float]) -> ReducedHamiltonianSet:
    """
    Build the reduced periodic Hamiltonians of the torus 𝕄⁻¹(E).

    Args:
        spec: Frequency spec
        E: Torus actions (H_1, …, H_d) values, componentwise ≥ 0

    Returns:
        ReducedHamiltonianSet with d_E, ℓ_E, K_{E,j}, b_{n,j} and ṽ_E
    """
    E_arr = np.asarray(E, dtype=float)
    if E_arr.shape != (spec.d,):
        raise ValidationError(f"E must have {spec.d} components")
    if np.any(E_arr < 0):
        raise ValidationError(f"E must be componentwise nonnegative, got {E_arr}")
    if not np.any(E_arr > 0):
        raise ValidationError("At least one component of E must be positive")

    projected = [
        tuple(int(c) for c in project_degenerate(E_arr, np.array(nu, dtype=np.int64)))
        for nu in spec.nu
    ]
    if all(all(c == 0 for c in vec) for vec in projected):
        raise ValidationError("All projected hamiltonian vectors vanish")

    selection: List[int] = []
    rank = 0
    for n, vec in enumerate(projected):
        candidate = sympy.Matrix([list(projected[i]) for i in selection + [n]])
        if candidate.rank() > rank:
            selection.append(n)
            rank += 1

    A = sympy.Matrix([list(projected[n]) for n in selection]).T
    gram_inv = (A.T * A).inv()
    b: Dict[Tuple[int, int], sympy.Rational] = {}
    for n in range(spec.d_omega):
        if n in selection:
            continue
        coeffs = gram_inv * A.T * sympy.Matrix(list(projected[n]))
        if A * coeffs != sympy.Matrix(list(projected[n])):
            raise RuntimeError(f"Projected vector {n} is not in the selected span")
        for j in range(len(selection)):
            b[(n, j)] = sympy.Rational(coeffs[j])

    gcds: List[int] = []
    coefficients: List[IntVector] = []
    v_tilde: List[sympy.Expr] = []
    for j, l in enumerate(selection):
        K = math.gcd(*projected[l])
        gcds.append(K)
        coefficients.append(tuple(c // K for c in projected[l]))
        total = spec.v[l] + sum(
            (b[(n, j)] * spec.v[n] for n in range(spec.d_omega) if (n, j) in b),
            sympy.Integer(0),
        )
        v_tilde.append(sympy.nsimplify(K * total) if spec.exact else K * total)

    logger.debug(f"Reduced hamiltonians for E={E_arr}: selection={selection}, coefficients={coefficients}")
    return ReducedHamiltonianSet(
        E=tuple(float(e) for e in E_arr),
        hamiltonian_vectors=spec.nu,
        selection=tuple(selection),
        gcds=tuple(gcds),
        coefficients=tuple(coefficients),
        b=b,
        v_tilde_exact=tuple(v_tilde),
    )


def _l1_sphere(d: int, n: int) -> List[IntVector]:
    """Integer vectors of ℓ¹ norm exactly n."""
    if d == 1:
        return [(n,), (-n,)] if n > 0 else [(0,)]
    out: List[IntVector] = []
    for first in range(-n, n + 1):
        for rest in _l1_sphere(d - 1, n - abs(first)):
            out.append((first,) + rest)
    return out


@dataclass
class DenominatorProfile:
    """
    Small-denominator diagnostics over ℓ¹ shells.

    gamma_hat is the max of log(ς₀/|ω·k|)/log|k| over record vectors with
    |k| > 1, an empirical lower-bound witness for γ(ω). gamma_slope is the
    log-log regression slope of the record minima against |k|.
    """
    shells: List[Tuple[int, float]]
    sigma0: float
    records: List[Tuple[int, IntVector, float]]
    gamma_hat: float
    gamma_slope: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "shells": [[n, m] for n, m in self.shells],
            "sigma0": self.sigma0,
            "records": [[n, list(k), m] for n, k, m in self.records],
            "gamma_hat": self.gamma_hat,
            "gamma_slope": self.gamma_slope,
        }


def denominator_profile(spec: FrequencySpec, K: int) -> DenominatorProfile:
    """
    Scan |ω·k| over non-resonant k with |k|₁ ≤ K.

    Args:
        spec: Frequency spec
        K: Shell cutoff (≥ 1)

    Returns:
        DenominatorProfile with running shell minima
    """
    if K < 1:
        raise ValidationError(f"Shell cutoff must be >= 1, got {K}")
    omega = spec.omega
    nu = spec.nu_matrix

    shells: List[Tuple[int, float]] = []
    records: List[Tuple[int, IntVector, float]] = []
    running = math.inf
    sigma0 = math.inf
    for n in range(1, K + 1):
        ks = np.array(_l1_sphere(spec.d, n), dtype=np.int64)
        nonresonant = np.any(ks @ nu.T != 0, axis=1)
        ks = ks[nonresonant]
        if len(ks) == 0:
            shells.append((n, running))
            continue
        values = np.abs(ks.astype(float) @ omega)
        idx = int(np.argmin(values))
        if n == 1:
            sigma0 = float(values[idx])
        if values[idx] < running * (1 - 1e-12):
            running = float(values[idx])
            records.append((n, tuple(int(c) for c in ks[idx]), running))
        shells.append((n, running))

    gamma_hat = 0.0
    for n, _, m in records:
        if n > 1:
            gamma_hat = max(gamma_hat, math.log(sigma0 / m) / math.log(n))

    gamma_slope = 0.0
    if len(records) >= 2:
        logs_n = np.log([r[0] for r in records])
        logs_m = np.log([r[2] for r in records])
        gamma_slope = max(0.0, float(-np.polyfit(logs_n, logs_m, 1)[0]))

    return DenominatorProfile(
        shells=shells,
        sigma0=sigma0,
        records=records,
        gamma_hat=gamma_hat,
        gamma_slope=gamma_slope,
    )
