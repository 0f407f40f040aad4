# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Quasimode synthesis.

A quasimode concentrating on the orbit of the averaged flow through z₀ is
assembled from leading-order propagated coherent states:

    ψ ∝ ∫ χ_T(s) e^{i(M·τ + E′s)/ℏ} e^{−i(τ·Ĥ̃ + s⟨V̂⟩)/ℏ} Ψ^ℏ_{z₀} dτ/|T^{d_E}| ds

The τ-rotations are exact for the quadratic reduced Hamiltonians, so the
torus integral acts as a diagonal filter on the Hermite basis; the s-integral
runs over leading-order states along the flow of ⟨V⟩.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from ..classical.flow import detect_tangent_flow, orbit
from ..classical.frequency import (
    FrequencySpec,
    ReducedHamiltonianSet,
    ResonanceModule,
    reduced_hamiltonians,
    resonance_module,
)
from ..classical.phase_point import PhasePoint
from ..classical.symbols import PRUNE_TOLERANCE, WeylSymbol, average
from ..core.config import FlowConfig
from ..core.errors import (
    ConvergenceError,
    NumericalToleranceError,
    OverlappingToriError,
    ValidationError,
)
from ..quantum.coherent import coherent_state, leading_states_along_s
from ..quantum.normal_form import solve_quantum_cohomological, unitary_exponential
from ..quantum.quantization import HermiteBasisSpec, OperatorMatrix, check_band, quantize

logger = logging.getLogger(__name__)

GRID_CHANGE_TOLERANCE = 1e-3
RESOLUTION_FACTOR = 8
MIN_S_INTERVALS = 16
DISJOINT_TORI_FACTOR = 3.0


class BumpFunction:
    """
    Smooth bump χ(u) = exp(1 − 1/(4u(1−u))) on (0, 1), χ(½) = 1.

    Features:
    - vectorized values and derivative
    - L¹ and L² norms of χ and χ′ precomputed by adaptive quadrature
    - rescaled χ_T(s) = χ(s/T)
    """

    def __init__(self) -> None:
        self.l1_norm = self._integral(lambda u: float(self(u)))
        self.l2_norm = math.sqrt(self._integral(lambda u: float(self(u)) ** 2))
        self.derivative_l1 = self._integral(lambda u: abs(float(self.derivative(u))))
        self.derivative_l2 = math.sqrt(self._integral(lambda u: float(self.derivative(u)) ** 2))

    @staticmethod
    def _integral(f) -> float:
        value, _ = integrate.quad(f, 0.0, 1.0, limit=200)
        return float(value)

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        inside = (u > 0) & (u < 1)
        safe = np.where(inside, u, 0.5)
        return np.where(inside, np.exp(1.0 - 1.0 / (4.0 * safe * (1.0 - safe))), 0.0)

    def derivative(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        inside = (u > 0) & (u < 1)
        safe = np.where(inside, u, 0.5)
        slope = (1.0 - 2.0 * safe) / (4.0 * safe ** 2 * (1.0 - safe) ** 2)
        return np.where(inside, self(safe) * -slope, 0.0)

    def scaled(self, s, T: float) -> np.ndarray:
        """χ_T(s) = χ(s/T)."""
        return self(np.asarray(s, dtype=float) / T)

    def c_chi(self, tangent: bool = False) -> float:
        """‖χ′‖/‖χ‖ in L² (in L¹ for flows tangent to the torus)."""
        if tangent:
            return self.derivative_l1 / self.l1_norm
        return self.derivative_l2 / self.l2_norm

    def to_dict(self) -> Dict[str, Any]:
        return {
            "profile": "exp(1 - 1/(4u(1-u)))",
            "l1_norm": self.l1_norm,
            "l2_norm": self.l2_norm,
            "c_chi": self.c_chi(),
        }


@dataclass
class SynthesisGrid:
    """Quadrature metadata of a synthesized quasimode."""
    n_tau: int
    n_s: int
    ds: float
    doublings: int
    s_change: float
    tau_change: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_tau": self.n_tau,
            "n_s": self.n_s,
            "ds": self.ds,
            "doublings": self.doublings,
            "s_change": self.s_change,
            "tau_change": self.tau_change,
        }


@dataclass
class QuasimodeResult:
    """
    Normalized quasimode with its quasi-eigenvalue and width.

    pre_norm is the norm the asymptotic normalization constant would give;
    it tends to 1 as ℏ → 0 and is reported as a diagnostic.
    """
    state: np.ndarray
    eigenvalue: float
    width: float
    T: float
    basis: HermiteBasisSpec
    z0: Optional[PhasePoint] = None
    eps: float = 0.0
    lattice: Tuple[int, ...] = ()
    grid: Optional[SynthesisGrid] = None
    target: Dict[str, Any] = field(default_factory=dict)
    pre_norm: float = math.nan
    normalizing_constant: float = math.nan
    cross_term: float = 0.0

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.state))

    @property
    def torus(self) -> Tuple[float, ...]:
        """Actions 𝕄(z₀) of the base torus."""
        return tuple(float(a) for a in self.z0.actions) if self.z0 is not None else ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eigenvalue": self.eigenvalue,
            "width": self.width,
            "T": self.T,
            "hbar": self.basis.hbar,
            "eps": self.eps,
            "z0": self.z0.to_dict() if self.z0 is not None else None,
            "lattice": list(self.lattice),
            "grid": self.grid.to_dict() if self.grid else None,
            "target": self.target,
            "pre_norm": self.pre_norm,
            "normalizing_constant": self.normalizing_constant,
            "cross_term": self.cross_term,
            "basis": self.basis.to_dict(),
        }


def nearest_lattice(
    z0: PhasePoint, basis: HermiteBasisSpec, reduced: ReducedHamiltonianSet
) -> Tuple[Tuple[int, ...], np.ndarray]:
    """
    Joint eigenvalues M_ℏ of the Op(𝓗̃_j) nearest to 𝓗̃(z₀).

    Each mode is rounded to the Fock level k_i nearest to |z_{0,i}|²/(2ℏ) − ½;
    modes with E_i = 0 sit in their ground level.

    Returns:
        (k, M) with M_j = ℏ Σ_i c_{j,i}(k_i + ½)
    """
    hbar = basis.hbar
    k = np.rint(z0.actions / hbar - 0.5).astype(int)
    k = np.clip(k, 0, None)
    for i in reduced.null_modes:
        k[i] = 0
    C = reduced.coefficient_matrix.astype(float)
    M = hbar * C @ (k + 0.5)
    return tuple(int(x) for x in k), M


def quasi_eigenvalue(
    z0: PhasePoint,
    Vavg: WeylSymbol,
    eps: float,
    basis: HermiteBasisSpec,
    reduced: ReducedHamiltonianSet,
) -> float:
    """
    λ_ℏ = Σ_j ṽ_j M_j + Σ_{E_i = 0} ℏω_i/2 + ε⟨V⟩(z₀).

    Args:
        z0: Base point
        Vavg: Averaged perturbation
        eps: Perturbation size
        basis: Hermite basis (ℏ and ω)
        reduced: Reduced periodic Hamiltonians of the torus through z₀

    Returns:
        Quasi-eigenvalue
    """
    _, M = nearest_lattice(z0, basis, reduced)
    lam = float(reduced.v_tilde @ M)
    omega = np.asarray(basis.omega, dtype=float)
    lam += sum(0.5 * basis.hbar * omega[i] for i in reduced.null_modes)
    if eps:
        lam += eps * float(Vavg(z0).real)
    return lam


def _reduced_levels(basis: HermiteBasisSpec, reduced: ReducedHamiltonianSet) -> np.ndarray:
    """Eigenvalues of Op(𝓗̃_j) on every basis state, shape (dim, d_E)."""
    C = reduced.coefficient_matrix.astype(float)
    return basis.hbar * (basis.multi_indices + 0.5) @ C.T


def torus_filter(
    basis: HermiteBasisSpec, reduced: ReducedHamiltonianSet, M: np.ndarray, n_tau: int
) -> np.ndarray:
    """
    Diagonal of ∫ e^{iM·τ/ℏ} e^{−iτ·Ĥ̃/ℏ} dτ/|T^{d_E}| on a uniform n_tau^{d_E} grid.

    The tensor grid factorizes, so each torus direction is summed separately.
    """
    tau = 2 * np.pi * np.arange(n_tau) / n_tau
    m = (np.asarray(M)[None, :] - _reduced_levels(basis, reduced)) / basis.hbar
    out = np.ones(basis.dim, dtype=complex)
    for j in range(reduced.d_E):
        out = out * np.mean(np.exp(1j * np.outer(m[:, j], tau)), axis=1)
    return out


def normalizing_constant(
    z0: PhasePoint,
    T: float,
    chi: BumpFunction,
    Vavg: WeylSymbol,
    reduced: ReducedHamiltonianSet,
    tangent: Optional[bool] = None,
    config: Optional[FlowConfig] = None,
) -> float:
    """
    C_T(z₀) built from the Gram determinant of d𝓗̃(z₀) and d⟨V⟩(z₀).

    When the averaged flow is tangent to the torus only d𝓗̃ enters and the
    L¹ norm of χ replaces the L² norm.

    Args:
        z0: Base point
        T: Time window
        chi: Bump function
        Vavg: Averaged perturbation
        reduced: Reduced periodic Hamiltonians
        tangent: Force the tangent branch (detected when omitted)

    Returns:
        C_T(z₀)
    """
    d_E = reduced.d_E
    C = reduced.coefficient_matrix.astype(float)
    rows = [np.concatenate([c * z0.x, c * z0.xi]) for c in C]
    if tangent is None:
        tangent = detect_tangent_flow(z0, Vavg, reduced, config=config)
    volume = (2 * np.pi) ** d_E
    if tangent:
        G = np.array(rows) @ np.array(rows).T
        return math.sqrt(max(np.linalg.det(G), 0.0) / np.pi ** d_E) * volume / (T ** 2 * chi.l1_norm ** 2)
    rows.append(np.real(Vavg.gradient(z0.x, z0.xi)))
    D = np.array(rows)
    G = D @ D.T
    return math.sqrt(max(np.linalg.det(G), 0.0) / np.pi ** (d_E + 1)) * volume / (T * chi.l2_norm ** 2)


def _s_integral(
    z0: PhasePoint,
    T: float,
    chi: BumpFunction,
    Vavg: WeylSymbol,
    E_prime: float,
    basis: HermiteBasisSpec,
    n_s: int,
    config: Optional[FlowConfig],
    ehrenfest_epsilon: Optional[float],
) -> Tuple[np.ndarray, np.ndarray]:
    """∫ χ_T(s) e^{iE′s/ℏ} φ_s ds on n_s intervals and on every other node."""
    nodes = np.linspace(0.0, T, n_s + 1)
    ds = T / n_s
    states, _, _ = leading_states_along_s(z0, nodes, Vavg, basis, config, ehrenfest_epsilon)
    weights = chi.scaled(nodes, T) * np.exp(1j * E_prime * nodes / basis.hbar) * ds
    fine = weights @ states
    coarse = (2 * weights[::2]) @ states[::2]
    return fine, coarse


def _relative_change(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        return math.inf
    return float(np.linalg.norm(a / na - b / nb))


def synthesize(
    z0: PhasePoint,
    T: float,
    chi: BumpFunction,
    V: WeylSymbol,
    eps: float,
    basis: HermiteBasisSpec,
    spec: FrequencySpec,
    rm: Optional[ResonanceModule] = None,
    P: Optional[OperatorMatrix] = None,
    config: Optional[FlowConfig] = None,
    grid_change: float = GRID_CHANGE_TOLERANCE,
    max_doublings: int = 3,
    resolution_factor: int = RESOLUTION_FACTOR,
    ehrenfest_epsilon: Optional[float] = 0.05,
) -> QuasimodeResult:
    """
    Synthesize a quasimode of P̂ = Ĥ + εV̂ on the orbit through z₀.

    The construction is carried out for Ĥ + ε⟨V̂⟩ and mapped back with the
    first normal-form unitary when ε > 0.

    Args:
        z0: Base point
        T: Time window of χ_T
        chi: Bump function
        V: Perturbation symbol
        eps: Perturbation size
        basis: Hermite basis
        spec: Frequency spec
        rm: Resonance module (computed when omitted)
        P: Quantized P̂ used for the width (built when omitted)
        config: Integrator settings
        grid_change: Accepted L² change under grid doubling
        max_doublings: Grid doublings before ConvergenceError
        resolution_factor: Phase-resolution factor of the initial grids
        ehrenfest_epsilon: Budget exponent (None disables the check)

    Returns:
        QuasimodeResult
    """
    if T <= 0:
        raise ValidationError(f"T must be positive, got {T}")
    if z0.d != basis.d or spec.d != basis.d:
        raise ValidationError("Point, basis and frequency spec dimensions differ")
    hbar = basis.hbar
    rm = rm or resonance_module(spec)
    Vavg = average(V, rm)
    reduced = reduced_hamiltonians(spec, z0.actions)
    E_prime = float(Vavg(z0).real)
    k, M = nearest_lattice(z0, basis, reduced)

    # τ grid: spacing ≤ 2πℏ/(8(|M|₁ + cutoff))
    n_tau = int(math.ceil(resolution_factor * (np.sum(np.abs(M)) + basis.cutoff_energy) / hbar))
    filt = torus_filter(basis, reduced, M, n_tau)
    tau_change = float(np.max(np.abs(torus_filter(basis, reduced, M, 2 * n_tau) - filt)))

    # s grid: spacing ≤ ℏ/(8|E′| + 1)
    ds0 = hbar / (resolution_factor * abs(E_prime) + 1.0)
    n_s = max(MIN_S_INTERVALS, 2 * int(math.ceil(T / ds0 / 2)))
    doublings = 0
    if Vavg.is_zero:
        raw = coherent_state(z0, basis) * T * chi.l1_norm
        s_change = 0.0
    else:
        while True:
            fine, coarse = _s_integral(z0, T, chi, Vavg, E_prime, basis, n_s, config, ehrenfest_epsilon)
            s_change = _relative_change(filt * fine, filt * coarse)
            if s_change <= grid_change:
                raw = fine
                break
            if doublings >= max_doublings:
                raise ConvergenceError(
                    f"Quasimode s-quadrature changed by {s_change:.3e} after {doublings} doublings"
                )
            doublings += 1
            n_s *= 2
            logger.debug(f"Doubling s grid to {n_s} intervals (change {s_change:.3e})")
    if tau_change > grid_change:
        raise ConvergenceError(f"Torus filter changed by {tau_change:.3e} under doubling")

    raw = filt * raw
    raw_norm = float(np.linalg.norm(raw))
    if raw_norm < 1e-12:
        raise NumericalToleranceError(f"Filtered state vanished; torus through z0 misses the lattice level {k}")

    C_T = normalizing_constant(z0, T, chi, Vavg, reduced, config=config)
    pre_norm = math.sqrt(C_T / hbar ** ((reduced.d_E + 1) / 2)) * raw_norm
    if not 0.5 <= pre_norm <= 1.5:
        logger.debug(f"Asymptotic normalization off at hbar={hbar}: pre-norm {pre_norm:.3f}")

    state = raw / raw_norm
    if eps and not (V - Vavg).prune(PRUNE_TOLERANCE).is_zero:
        F = solve_quantum_cohomological(quantize(V, basis), rm)
        state = unitary_exponential(F, eps / hbar) @ state
    check_band(state, basis, max(2, V.max_degree))

    lam = quasi_eigenvalue(z0, Vavg, eps, basis, reduced)
    if P is None:
        P = quantize(WeylSymbol.harmonic_hamiltonian(basis.omega) + V * eps, basis)
    result = QuasimodeResult(
        state=state,
        eigenvalue=lam,
        width=0.0,
        T=float(T),
        basis=basis,
        z0=z0,
        eps=float(eps),
        lattice=k,
        grid=SynthesisGrid(
            n_tau=n_tau, n_s=n_s, ds=T / n_s, doublings=doublings, s_change=s_change, tau_change=tau_change
        ),
        target={"measure": "chi_T(s)^2 ds on the <V>-orbit through z0", "E_prime": E_prime, "M": M.tolist()},
        pre_norm=pre_norm,
        normalizing_constant=C_T,
    )
    result.width = width(P, result)
    logger.info(
        f"Quasimode at hbar={hbar}, eps={eps:.3e}, T={T}: lambda={lam:.6f}, width={result.width:.3e}"
    )
    return result


def width(P: OperatorMatrix, q: QuasimodeResult, band_check: bool = True) -> float:
    """
    ‖P̂ψ − λψ‖/‖ψ‖ for the quasimode state and its quasi-eigenvalue.

    Args:
        P: Operator matrix
        q: Quasimode
        band_check: Require the state to lie in the reliable band

    Returns:
        Width
    """
    psi = np.asarray(q.state)
    if psi.shape != (P.basis.dim,):
        raise ValidationError(f"State of shape {psi.shape} does not match basis dimension {P.basis.dim}")
    if band_check:
        check_band(psi, P.basis, max(2, P.degree))
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValidationError("Width of the zero state is undefined")
    return float(np.linalg.norm(P.entries @ psi - q.eigenvalue * psi) / norm)


def superpose(
    entries: Sequence[Tuple[float, QuasimodeResult]],
    P: Optional[OperatorMatrix] = None,
    tol: float = 1e-9,
) -> QuasimodeResult:
    """
    Convex superposition Σ √α_j ψ_j of quasimodes on pairwise disjoint tori.

    The weights √α_j make the Wigner pairings add up to Σ α_j(pairing of ψ_j).

    Args:
        entries: (α_j, quasimode) pairs with α_j > 0 and Σ α_j = 1
        P: Operator for the combined width (bounded by the triangle inequality when omitted)
        tol: Tolerance on Σ α_j = 1

    Returns:
        Combined QuasimodeResult; cross_term is |‖Σ √α_j ψ_j‖² − 1|
    """
    if not entries:
        raise ValidationError("Nothing to superpose")
    alphas = np.array([a for a, _ in entries], dtype=float)
    if np.any(alphas <= 0) or abs(alphas.sum() - 1.0) > tol:
        raise ValidationError(f"Weights must be positive and sum to 1, got {alphas.tolist()}")
    results = [q for _, q in entries]
    if len(results) == 1:
        return results[0]
    basis = results[0].basis
    if any(q.basis.dim != basis.dim or q.basis.hbar != basis.hbar for q in results):
        raise ValidationError("Quasimodes live in different bases")

    gap = DISJOINT_TORI_FACTOR * math.sqrt(basis.hbar)
    for i in range(len(results)):
        for j in range(i + 1, len(results)):
            ti, tj = np.array(results[i].torus), np.array(results[j].torus)
            if ti.size == 0 or tj.size == 0 or np.max(np.abs(ti - tj)) <= gap:
                raise OverlappingToriError(f"Tori of entries {i} and {j} are not separated by more than {gap:.3f}")

    combined = sum(math.sqrt(a) * q.state for a, q in entries)
    norm_sq = float(np.vdot(combined, combined).real)
    cross = abs(norm_sq - 1.0)
    state = combined / math.sqrt(norm_sq)
    lam = float(alphas @ np.array([q.eigenvalue for q in results]))
    out = QuasimodeResult(
        state=state,
        eigenvalue=lam,
        width=0.0,
        T=max(q.T for q in results),
        basis=basis,
        eps=results[0].eps,
        target={"components": [q.target for q in results], "weights": alphas.tolist()},
        cross_term=cross,
    )
    if P is not None:
        out.width = width(P, out)
    else:
        out.width = float(
            sum(math.sqrt(a) * (q.width + abs(q.eigenvalue - lam)) for a, q in entries) / math.sqrt(norm_sq)
        )
    if out.width > max(q.width for q in results):
        logger.info(f"Superposition width {out.width:.3e} exceeds the individual widths")
    return out


def target_pairing(
    z0: PhasePoint,
    a: WeylSymbol,
    T: float,
    chi: BumpFunction,
    V: WeylSymbol,
    rm: ResonanceModule,
    samples: int = 257,
    config: Optional[FlowConfig] = None,
) -> float:
    """
    Concentration target (1/‖χ_T‖²) ∫ χ_T(s)² ⟨a⟩∘φ_s^{⟨V⟩}(z₀) ds.

    Args:
        z0: Base point
        a: Observable
        T: Time window
        chi: Bump function
        V: Perturbation (averaged here)
        rm: Resonance module
        samples: Uniform s nodes on [0, T]

    Returns:
        Target value of the Wigner pairing
    """
    nodes = np.linspace(0.0, T, samples)
    Vavg = average(V, rm)
    aavg = average(a, rm)
    if Vavg.is_zero:
        points = np.repeat(z0.as_array()[None, :], samples, axis=0)
    else:
        points = orbit(z0, nodes, Vavg, config)
    d = z0.d
    values = np.real(aavg.evaluate(points[:, :d], points[:, d:]))
    w = chi.scaled(nodes, T) ** 2
    return float(integrate.trapezoid(w * values, nodes) / integrate.trapezoid(w, nodes))
