# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Weyl-monomial symbol algebra.

Symbols are finite sums Σ c_{a,b} z^a z̄^b with z_j = x_j + iξ_j. The
Poisson bracket is {f, g} = Σ ∂_ξf ∂_xg − ∂_xf ∂_ξg, so {H, f} = X_H f and
{H, z^a z̄^b} = −i (a−b)·ω z^a z̄^b. The oscillator flow rotates z_j ↦ e^{−it} z_j.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import roots_legendre

from ..core.errors import CohomologicalObstructionError, ConvergenceError, ValidationError
from .frequency import FrequencySpec, ResonanceModule, fourier_index
from .phase_point import PhasePoint

logger = logging.getLogger(__name__)

IntVector = Tuple[int, ...]
Key = Tuple[IntVector, IntVector]
Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]

# Coefficients below this magnitude are dropped
PRUNE_TOLERANCE = 1e-15
OBSTRUCTION_TOLERANCE = 1e-12


def _unit(d: int, j: int) -> IntVector:
    return tuple(1 if i == j else 0 for i in range(d))


def _add(u: IntVector, v: IntVector) -> IntVector:
    return tuple(a + b for a, b in zip(u, v))


@dataclass(frozen=True)
class WeylSymbol:
    """
    Finite complex combination of monomials z^a z̄^b.

    Features:
    - arithmetic (+, −, scalar and symbol products, integer powers)
    - vectorized evaluation on arrays of phase points
    - exact derivatives, gradients and Hessians in (x, ξ)
    - JSON encoding {"terms": [{"a", "b", "re", "im"}, ...]}
    """
    d: int
    terms: Mapping[Key, complex] = field(default_factory=dict)

    # Construction

    @classmethod
    def from_terms(cls, d: int, items: Iterable[Tuple[Key, complex]]) -> "WeylSymbol":
        acc: Dict[Key, complex] = defaultdict(complex)
        for key, c in items:
            a, b = key
            if len(a) != d or len(b) != d or min(a + b, default=0) < 0:
                raise ValidationError(f"Invalid monomial exponents {key} for d={d}")
            acc[(tuple(int(x) for x in a), tuple(int(x) for x in b))] += complex(c)
        return cls(d, {k: v for k, v in acc.items() if abs(v) > PRUNE_TOLERANCE})

    @classmethod
    def zero(cls, d: int) -> "WeylSymbol":
        return cls(d, {})

    @classmethod
    def constant(cls, d: int, c: complex) -> "WeylSymbol":
        zero = (0,) * d
        return cls.from_terms(d, [((zero, zero), c)])

    @classmethod
    def z(cls, d: int, j: int) -> "WeylSymbol":
        return cls(d, {(_unit(d, j), (0,) * d): 1.0 + 0j})

    @classmethod
    def zbar(cls, d: int, j: int) -> "WeylSymbol":
        return cls(d, {((0,) * d, _unit(d, j)): 1.0 + 0j})

    @classmethod
    def x(cls, d: int, j: int) -> "WeylSymbol":
        """x_j = (z_j + z̄_j)/2."""
        return (cls.z(d, j) + cls.zbar(d, j)) * 0.5

    @classmethod
    def xi(cls, d: int, j: int) -> "WeylSymbol":
        """ξ_j = (z_j − z̄_j)/(2i)."""
        return (cls.z(d, j) - cls.zbar(d, j)) * (-0.5j)

    @classmethod
    def mode_hamiltonian(cls, d: int, j: int) -> "WeylSymbol":
        """H_j = ½(x_j² + ξ_j²) = ½ z_j z̄_j."""
        return cls(d, {(_unit(d, j), _unit(d, j)): 0.5 + 0j})

    @classmethod
    def reduced_hamiltonian(cls, coefficients: Sequence[float]) -> "WeylSymbol":
        """Σ_j c_j H_j for a coefficient vector c."""
        d = len(coefficients)
        return cls.from_terms(
            d, [((_unit(d, j), _unit(d, j)), 0.5 * c) for j, c in enumerate(coefficients) if c != 0]
        )

    @classmethod
    def harmonic_hamiltonian(cls, omega: Sequence[float]) -> "WeylSymbol":
        """H = ½ Σ ω_j (ξ_j² + x_j²)."""
        return cls.reduced_hamiltonian(omega)

    @classmethod
    def from_polynomial(cls, d: int, monomials: Mapping[Tuple[IntVector, IntVector], complex]) -> "WeylSymbol":
        """
        Build a symbol from a polynomial in (x, ξ).

        Args:
            d: Dimension
            monomials: Map (x exponents, ξ exponents) → coefficient

        Returns:
            Equivalent WeylSymbol
        """
        result = cls.zero(d)
        for (px, pxi), c in monomials.items():
            term = cls.constant(d, c)
            for j in range(d):
                if px[j]:
                    term = term * cls.x(d, j) ** px[j]
                if pxi[j]:
                    term = term * cls.xi(d, j) ** pxi[j]
            result = result + term
        return result

    # Arithmetic

    def _check(self, other: "WeylSymbol") -> None:
        if other.d != self.d:
            raise ValidationError(f"Dimension mismatch: {self.d} vs {other.d}")

    def __add__(self, other: Union["WeylSymbol", complex, float]) -> "WeylSymbol":
        if not isinstance(other, WeylSymbol):
            other = WeylSymbol.constant(self.d, other)
        self._check(other)
        return WeylSymbol.from_terms(self.d, list(self.terms.items()) + list(other.terms.items()))

    __radd__ = __add__

    def __neg__(self) -> "WeylSymbol":
        return WeylSymbol(self.d, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other: Union["WeylSymbol", complex, float]) -> "WeylSymbol":
        if not isinstance(other, WeylSymbol):
            other = WeylSymbol.constant(self.d, other)
        return self + (-other)

    def __rsub__(self, other: Union[complex, float]) -> "WeylSymbol":
        return (-self) + other

    def __mul__(self, other: Union["WeylSymbol", complex, float]) -> "WeylSymbol":
        if isinstance(other, WeylSymbol):
            self._check(other)
            items = [
                ((_add(a1, a2), _add(b1, b2)), c1 * c2)
                for (a1, b1), c1 in self.terms.items()
                for (a2, b2), c2 in other.terms.items()
            ]
            return WeylSymbol.from_terms(self.d, items)
        return WeylSymbol.from_terms(self.d, [(k, c * other) for k, c in self.terms.items()])

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "WeylSymbol":
        if not isinstance(n, int) or n < 0:
            raise ValidationError(f"Symbol powers must be nonnegative integers, got {n!r}")
        result = WeylSymbol.constant(self.d, 1.0)
        for _ in range(n):
            result = result * self
        return result

    def conj(self) -> "WeylSymbol":
        """Complex conjugate: c_{a,b} z^a z̄^b ↦ conj(c) z^b z̄^a."""
        return WeylSymbol(self.d, {(b, a): np.conj(c) for (a, b), c in self.terms.items()})

    def is_real(self, tol: float = 1e-12) -> bool:
        return (self - self.conj()).max_coefficient() <= tol

    def real_part(self) -> "WeylSymbol":
        return (self + self.conj()) * 0.5

    def max_coefficient(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def prune(self, tol: float) -> "WeylSymbol":
        return WeylSymbol(self.d, {k: c for k, c in self.terms.items() if abs(c) > tol})

    @property
    def max_degree(self) -> int:
        return max((sum(a) + sum(b) for a, b in self.terms), default=0)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def equals(self, other: "WeylSymbol", tol: float = 1e-12) -> bool:
        return (self - other).max_coefficient() <= tol

    # Evaluation and calculus

    def evaluate(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """
        Evaluate at arrays of points.

        Args:
            x: Positions, trailing axis d
            xi: Momenta, trailing axis d

        Returns:
            Complex array with the leading shape of x
        """
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        z = x + 1j * xi
        zb = np.conj(z)
        out = np.zeros(z.shape[:-1], dtype=complex)
        deg = self.max_degree
        zp = [np.ones_like(z)]
        zbp = [np.ones_like(zb)]
        for _ in range(deg):
            zp.append(zp[-1] * z)
            zbp.append(zbp[-1] * zb)
        for (a, b), c in self.terms.items():
            term = np.full(z.shape[:-1], c, dtype=complex)
            for j in range(self.d):
                if a[j]:
                    term = term * zp[a[j]][..., j]
                if b[j]:
                    term = term * zbp[b[j]][..., j]
            out = out + term
        return out

    def __call__(self, point: PhasePoint) -> complex:
        return complex(self.evaluate(point.x, point.xi))

    def d_z(self, j: int) -> "WeylSymbol":
        """∂/∂z_j."""
        items = []
        for (a, b), c in self.terms.items():
            if a[j]:
                a2 = tuple(p - (1 if i == j else 0) for i, p in enumerate(a))
                items.append(((a2, b), c * a[j]))
        return WeylSymbol.from_terms(self.d, items)

    def d_zbar(self, j: int) -> "WeylSymbol":
        """∂/∂z̄_j."""
        items = []
        for (a, b), c in self.terms.items():
            if b[j]:
                b2 = tuple(p - (1 if i == j else 0) for i, p in enumerate(b))
                items.append(((a, b2), c * b[j]))
        return WeylSymbol.from_terms(self.d, items)

    def d_x(self, j: int) -> "WeylSymbol":
        return self.d_z(j) + self.d_zbar(j)

    def d_xi(self, j: int) -> "WeylSymbol":
        return (self.d_z(j) - self.d_zbar(j)) * 1j

    def gradient_symbols(self) -> List["WeylSymbol"]:
        """[∂_x1 … ∂_xd, ∂_ξ1 … ∂_ξd]."""
        return [self.d_x(j) for j in range(self.d)] + [self.d_xi(j) for j in range(self.d)]

    def hessian_symbols(self) -> List[List["WeylSymbol"]]:
        grads = self.gradient_symbols()
        return [
            [g.d_x(k) if k < self.d else g.d_xi(k - self.d) for k in range(2 * self.d)]
            for g in grads
        ]

    def gradient(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Real gradient (∂_x, ∂_ξ) stacked on a trailing axis of length 2d."""
        return np.stack([g.evaluate(x, xi).real for g in self.gradient_symbols()], axis=-1)

    def hessian(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        return np.array([[h.evaluate(x, xi).real for h in row] for row in self.hessian_symbols()])

    # Serialization

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "terms": [
                {"a": list(a), "b": list(b), "re": float(np.real(c)), "im": float(np.imag(c))}
                for (a, b), c in sorted(self.terms.items())
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], d: Optional[int] = None) -> "WeylSymbol":
        """
        Parse a symbol document.

        Accepts {"terms": [{"a", "b", "re", "im"}]} in (z, z̄) exponents or
        {"poly": [{"x", "xi", "c"}]} in (x, ξ) exponents.
        """
        if "terms" in data:
            terms = data["terms"]
            dim = d or data.get("d") or (len(terms[0]["a"]) if terms else None)
            if dim is None:
                raise ValidationError("Cannot infer dimension of an empty symbol")
            items = []
            for t in terms:
                if "a" not in t or "b" not in t:
                    raise ValidationError(f"Symbol term missing exponents: {t}")
                items.append(((tuple(t["a"]), tuple(t["b"])), complex(t.get("re", 0.0), t.get("im", 0.0))))
            return cls.from_terms(int(dim), items)
        if "poly" in data:
            poly = data["poly"]
            dim = d or data.get("d") or (len(poly[0]["x"]) if poly else None)
            if dim is None:
                raise ValidationError("Cannot infer dimension of an empty symbol")
            monomials: Dict[Tuple[IntVector, IntVector], complex] = defaultdict(complex)
            for t in poly:
                c = t.get("c", 1.0)
                coeff = complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c)
                monomials[(tuple(t["x"]), tuple(t["xi"]))] += coeff
            return cls.from_polynomial(int(dim), monomials)
        raise ValidationError("Symbol document needs 'terms' or 'poly'")


def evaluate(s: WeylSymbol, z: PhasePoint) -> complex:
    """Evaluate a symbol at one phase point."""
    return s(z)


def poisson(f: WeylSymbol, g: WeylSymbol) -> WeylSymbol:
    """
    Poisson bracket {f, g} = 2i Σ_j (∂_{z_j}f ∂_{z̄_j}g − ∂_{z̄_j}f ∂_{z_j}g).

    Args:
        f: First symbol
        g: Second symbol

    Returns:
        Exact bracket
    """
    f._check(g)
    d = f.d
    items = []
    for (a, b), c1 in f.terms.items():
        for (p, q), c2 in g.terms.items():
            for j in range(d):
                pre = a[j] * q[j] - b[j] * p[j]
                if pre:
                    e = _unit(d, j)
                    key = (
                        tuple(x + y - u for x, y, u in zip(a, p, e)),
                        tuple(x + y - u for x, y, u in zip(b, q, e)),
                    )
                    items.append((key, 2j * pre * c1 * c2))
    return WeylSymbol.from_terms(d, items)


def _lift_angles(tau: Sequence[float], d: int, spec: Optional[FrequencySpec]) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    if tau.shape == (d,):
        return tau
    if spec is not None and tau.shape == (spec.d_omega,):
        return tau @ spec.nu_matrix.astype(float)
    raise ValidationError(f"Angle vector of shape {tau.shape} does not match d={d}")


def flow_compose(s: WeylSymbol, tau: Sequence[float], spec: Optional[FrequencySpec] = None) -> WeylSymbol:
    """
    Compose a symbol with the oscillator multiflow Φ_τ.

    Args:
        s: Symbol
        tau: Angles in R^d, or in T^{d_ω} when spec is given (lifted by ρ_ω)
        spec: Frequency spec for the lift

    Returns:
        s ∘ Φ_τ
    """
    angles = _lift_angles(tau, s.d, spec)
    return WeylSymbol(
        s.d,
        {
            (a, b): c * np.exp(-1j * float(np.dot(np.subtract(a, b), angles)))
            for (a, b), c in s.terms.items()
        },
    )


def _difference(key: Key) -> IntVector:
    a, b = key
    return tuple(x - y for x, y in zip(a, b))


def average(s: WeylSymbol, rm: ResonanceModule) -> WeylSymbol:
    """
    Torus average ⟨s⟩: keep monomials with a − b ∈ Λ_ω.

    Args:
        s: Symbol
        rm: Resonance module of the same frequency spec

    Returns:
        Resonant part of s
    """
    return WeylSymbol(s.d, {k: c for k, c in s.terms.items() if rm.contains(_difference(k))})


def nonresonant_part(s: WeylSymbol, rm: ResonanceModule) -> WeylSymbol:
    return WeylSymbol(s.d, {k: c for k, c in s.terms.items() if not rm.contains(_difference(k))})


def _torus_orbit(z: PhasePoint, nu: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Points Φ^𝓗_θ(z) on a uniform n^{d_ω} grid."""
    d_omega = nu.shape[0]
    theta = np.stack(
        np.meshgrid(*[2 * np.pi * np.arange(n) / n] * d_omega, indexing="ij"), axis=-1
    ).reshape(-1, d_omega)
    angles = theta @ nu.astype(float)
    rotated = z.z[None, :] * np.exp(-1j * angles)
    return rotated.real, rotated.imag


def average_numeric(
    f: Evaluator,
    rm: ResonanceModule,
    z: PhasePoint,
    grid: int = 8,
    tol: float = 1e-10,
    max_doublings: int = 3,
) -> float:
    """
    Trapezoid torus average of an evaluator with grid doubling.

    Args:
        f: Vectorized evaluator f(x, ξ)
        rm: Resonance module (its ν define the torus action)
        z: Base point
        grid: Initial points per torus dimension (≥ 4)
        tol: Accepted change between successive grids
        max_doublings: Doublings attempted before giving up

    Returns:
        Quadrature value on the finest grid
    """
    if grid < 4:
        raise ValidationError(f"Torus grid must have at least 4 points per dimension, got {grid}")
    nu = np.array(rm.perp_basis, dtype=np.int64)
    n = grid
    x, xi = _torus_orbit(z, nu, n)
    previous = np.mean(f(x, xi))
    for attempt in range(max_doublings):
        n *= 2
        x, xi = _torus_orbit(z, nu, n)
        current = np.mean(f(x, xi))
        if abs(current - previous) < tol:
            logger.debug(f"Torus average converged at grid={n}")
            return float(np.real(current))
        previous = current
    raise ConvergenceError(f"Torus average did not converge after {max_doublings} doublings (grid={n})")


def solve_cohomological(g: WeylSymbol, rm: ResonanceModule, tol: float = OBSTRUCTION_TOLERANCE) -> WeylSymbol:
    """
    Solve {H, f} = g in the monomial algebra.

    Each non-resonant term c z^a z̄^b becomes i·c/((a−b)·ω) z^a z̄^b.

    Args:
        g: Right-hand side with empty resonant part
        rm: Resonance module carrying ω

    Returns:
        f with ⟨f⟩ = 0
    """
    omega = np.asarray(rm.omega, dtype=float)
    items = []
    for key, c in g.terms.items():
        diff = _difference(key)
        if rm.contains(diff):
            if abs(c) > tol:
                raise CohomologicalObstructionError(
                    f"Right-hand side has resonant term {key} with coefficient {c}"
                )
            continue
        items.append((key, 1j * c / float(np.dot(diff, omega))))
    return WeylSymbol.from_terms(g.d, items)


def solve_cohomological_periodic(
    g: Evaluator,
    z: PhasePoint,
    quad: int,
    spec: FrequencySpec,
    tol: float = 1e-10,
) -> float:
    """
    Pointwise solution of {H, f} = g for periodic flows (d_ω = 1).

    f(z) = −(1/(2πv)) ∫_0^{2π} (2π − s) g(φ^𝓗_s z) ds by Gauss–Legendre quadrature.

    Args:
        g: Vectorized evaluator
        z: Evaluation point
        quad: Number of Gauss–Legendre nodes
        spec: Frequency spec with d_ω = 1

    Returns:
        f(z)
    """
    if spec.d_omega != 1:
        raise ValidationError("Periodic cohomological solve requires d_omega = 1")
    nu = spec.nu_matrix[0].astype(float)
    v = float(spec.v[0])

    check_n = max(64, 4 * quad)
    s_uniform = 2 * np.pi * np.arange(check_n) / check_n
    rotated = z.z[None, :] * np.exp(-1j * np.outer(s_uniform, nu))
    mean = np.mean(g(rotated.real, rotated.imag))
    if abs(mean) > tol:
        raise CohomologicalObstructionError(f"Orbit average of g at z is {mean:.3e}, not zero")

    nodes, weights = roots_legendre(quad)
    s = np.pi * (nodes + 1.0)
    w = np.pi * weights
    rotated = z.z[None, :] * np.exp(-1j * np.outer(s, nu))
    values = g(rotated.real, rotated.imag)
    return float(np.real(-np.sum(w * (2 * np.pi - s) * values) / (2 * np.pi * v)))


def _double_phase_integral(k: int, kp: int) -> complex:
    """∫_0^{2π} e^{−ik′t} ∫_0^t e^{−iks} ds dt."""
    if k == 0:
        return 2 * np.pi ** 2 if kp == 0 else 2j * np.pi / kp
    return (2 * np.pi / (1j * k)) * ((1.0 if kp == 0 else 0.0) - (1.0 if k + kp == 0 else 0.0))


def second_order_symbol(V: WeylSymbol, spec: FrequencySpec, rm: Optional[ResonanceModule] = None) -> WeylSymbol:
    """
    Second-order averaged symbol for ω = (1, …, 1).

    ⟨L⟩ = (1/4π) ∫_0^{2π} ∫_0^t {V∘φ_s, V∘φ_t} ds dt, integrated termwise in
    closed form and projected onto the resonant part.

    Args:
        V: Perturbation symbol
        spec: Homogeneous periodic frequency spec
        rm: Resonance module (computed when omitted)

    Returns:
        ⟨L⟩
    """
    if not spec.is_homogeneous_periodic:
        raise ValidationError("second_order_symbol requires omega = (1, ..., 1)")
    if rm is None:
        from .frequency import resonance_module
        rm = resonance_module(spec)

    total = WeylSymbol.zero(V.d)
    items = list(V.terms.items())
    for key1, c1 in items:
        k1 = sum(key1[0]) - sum(key1[1])
        m1 = WeylSymbol(V.d, {key1: 1.0 + 0j})
        for key2, c2 in items:
            k2 = sum(key2[0]) - sum(key2[1])
            weight = _double_phase_integral(k1, k2)
            if weight == 0:
                continue
            m2 = WeylSymbol(V.d, {key2: 1.0 + 0j})
            total = total + poisson(m1, m2) * (c1 * c2 * weight)
    return average(total * (1.0 / (4 * np.pi)), rm)


@dataclass(frozen=True)
class FourierDecomposition:
    """Components a_k with a ∘ Φ^𝓗_τ = Σ_k a_k e^{ik·τ}."""
    d: int
    components: Mapping[IntVector, WeylSymbol]

    def component(self, k: Sequence[int]) -> WeylSymbol:
        return self.components.get(tuple(k), WeylSymbol.zero(self.d))

    def reassemble(self) -> WeylSymbol:
        total = WeylSymbol.zero(self.d)
        for part in self.components.values():
            total = total + part
        return total


def fourier_decomposition(s: WeylSymbol, spec: FrequencySpec) -> FourierDecomposition:
    """
    Split a symbol into torus Fourier components.

    Args:
        s: Symbol
        spec: Frequency spec

    Returns:
        FourierDecomposition keyed by k ∈ Z^{d_ω}
    """
    grouped: Dict[IntVector, List[Tuple[Key, complex]]] = defaultdict(list)
    for key, c in s.terms.items():
        grouped[fourier_index(spec, key[0], key[1])].append((key, c))
    return FourierDecomposition(
        s.d, {k: WeylSymbol.from_terms(s.d, items) for k, items in grouped.items()}
    )


def compose_linear(s: WeylSymbol, F: np.ndarray) -> WeylSymbol:
    """
    Exact composition s ∘ F for a real linear map F acting on (x, ξ).

    Args:
        s: Symbol
        F: Real matrix of shape (2d, 2d)

    Returns:
        Symbol w ↦ s(F w)
    """
    d = s.d
    F = np.asarray(F, dtype=float)
    if F.shape != (2 * d, 2 * d):
        raise ValidationError(f"Linear map must be {2 * d}x{2 * d}, got {F.shape}")
    coords = [WeylSymbol.x(d, j) for j in range(d)] + [WeylSymbol.xi(d, j) for j in range(d)]

    def image(row: int) -> WeylSymbol:
        out = WeylSymbol.zero(d)
        for k in range(2 * d):
            if F[row, k] != 0:
                out = out + coords[k] * float(F[row, k])
        return out

    z_img = [image(j) + image(d + j) * 1j for j in range(d)]
    zb_img = [image(j) - image(d + j) * 1j for j in range(d)]

    cache: Dict[Tuple[str, int, int], WeylSymbol] = {}

    def power(kind: str, j: int, n: int) -> WeylSymbol:
        key = (kind, j, n)
        if key not in cache:
            base = z_img[j] if kind == "z" else zb_img[j]
            cache[key] = WeylSymbol.constant(d, 1.0) if n == 0 else power(kind, j, n - 1) * base
        return cache[key]

    result = WeylSymbol.zero(d)
    for (a, b), c in s.terms.items():
        term = WeylSymbol.constant(d, c)
        for j in range(d):
            if a[j]:
                term = term * power("z", j, a[j])
            if b[j]:
                term = term * power("zb", j, b[j])
        result = result + term
    return result
