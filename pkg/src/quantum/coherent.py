# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Coherent-state propagation.

Coherent states Ψ^ℏ_z = T̂(z)Ψ₀, squeezed and excited Gaussian wavepackets
built from the (Q, P) data of a linear symplectic map, the action γ(τ, s)
and the leading-order propagation of a coherent state under the joint flow
of the reduced Hamiltonians and an averaged symbol.

Wavepackets are evaluated on the scaled grid y = x/√ℏ and projected onto
Hermite functions, which gives their coefficients in the truncated basis.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from ..classical.flow import (
    FieldLike,
    VariationalSolution,
    check_ehrenfest_budget,
    flow_matrix_oscillator,
    integrate_variational,
)
from ..classical.frequency import ReducedHamiltonianSet
from ..classical.phase_point import PhasePoint
from ..classical.symbols import WeylSymbol
from ..core.config import FlowConfig
from ..core.errors import BandOverflowError, BranchDiscontinuityError, NumericalToleranceError, ValidationError
from .quantization import HermiteBasisSpec, check_band, hermite_functions, quantize

logger = logging.getLogger(__name__)

GRID_SPACING = 0.1
GRID_PADDING = 5.0
MAX_BRANCH_STEP = math.pi / 4
MAX_EXCITATION = 6
NORM_TOLERANCE = 1e-6


def coherent_coefficients(alpha: complex, nmax: int) -> np.ndarray:
    """Fock coefficients e^{−|α|²/2} αⁿ/√n! of a single-mode coherent state."""
    n = np.arange(nmax)
    log_mag = np.zeros(nmax)
    if alpha != 0:
        log_mag = n * math.log(abs(alpha)) - 0.5 * np.array([math.lgamma(k + 1) for k in n])
    else:
        log_mag = np.where(n == 0, 0.0, -np.inf)
    phase = np.exp(1j * n * np.angle(alpha)) if alpha != 0 else np.ones(nmax)
    return np.exp(log_mag - 0.5 * abs(alpha) ** 2) * phase


def _kron_all(vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for v in vectors:
        out = np.kron(out, v)
    return out


def coherent_state(z0: PhasePoint, basis: HermiteBasisSpec, band_tol: float = 1e-6) -> np.ndarray:
    """
    Hermite coefficients of Ψ^ℏ_{z₀} = T̂(z₀)Ψ₀.

    Args:
        z0: Center
        basis: Hermite basis
        band_tol: Allowed weight above the reliable band

    Returns:
        Coefficient vector
    """
    if z0.d != basis.d:
        raise ValidationError(f"Point dimension {z0.d} does not match basis dimension {basis.d}")
    alphas = z0.z / math.sqrt(2 * basis.hbar)
    psi = _kron_all([coherent_coefficients(a, basis.nmax) for a in alphas])
    check_band(psi, basis, 1, band_tol)
    return psi


def _ladder(nmax: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, nmax)), 1)


def displacement(z0: PhasePoint, basis: HermiteBasisSpec, band_tol: float = 1e-6) -> np.ndarray:
    """
    Weyl–Heisenberg operator T̂(z₀) = exp(Σ_j α_j a_j† − ᾱ_j a_j), α = z₀/√(2ℏ).

    Args:
        z0: Translation
        basis: Hermite basis
        band_tol: Allowed weight of T̂(z₀)Ψ₀ above the reliable band

    Returns:
        Unitary matrix whose column 0 holds the coefficients of Ψ^ℏ_{z₀}
    """
    if z0.d != basis.d:
        raise ValidationError(f"Point dimension {z0.d} does not match basis dimension {basis.d}")
    a = _ladder(basis.nmax)
    alphas = z0.z / math.sqrt(2 * basis.hbar)
    D = np.ones((1, 1), dtype=complex)
    for alpha in alphas:
        D = np.kron(D, linalg.expm(alpha * a.T - np.conj(alpha) * a))
    check_band(D[:, 0], basis, 1, band_tol)
    return D


@dataclass(frozen=True)
class CoherentFrame:
    """
    Gaussian wavepacket data attached to a symplectic matrix F.

    Q, P come from [Q; P] = F [I; iI]; B = PQ⁻¹ lies in the Siegel upper
    half-space. sqrt_det_inv is the continuously tracked det Q^{−1/2}.
    """
    F: np.ndarray
    center: PhasePoint
    sqrt_det_inv: complex = 1.0 + 0j
    gamma: float = 0.0

    @property
    def d(self) -> int:
        return self.F.shape[0] // 2

    @property
    def Q(self) -> np.ndarray:
        d = self.d
        return self.F[:d, :d] + 1j * self.F[:d, d:]

    @property
    def P(self) -> np.ndarray:
        d = self.d
        return self.F[d:, :d] + 1j * self.F[d:, d:]

    @property
    def B(self) -> np.ndarray:
        return self.P @ np.linalg.inv(self.Q)

    @property
    def M(self) -> np.ndarray:
        """Q⁻¹Q̄."""
        return np.linalg.solve(self.Q, np.conj(self.Q))

    def validate(self) -> None:
        if abs(np.linalg.det(self.Q)) <= 1e-300:
            raise NumericalToleranceError("det Q vanished")
        B = self.B
        if np.min(np.linalg.eigvalsh(0.5 * (B.imag + B.imag.T))) <= 0:
            raise NumericalToleranceError("Im B is not positive definite")

    @classmethod
    def identity(cls, d: int, center: Optional[PhasePoint] = None) -> "CoherentFrame":
        center = center or PhasePoint(np.zeros(d), np.zeros(d))
        return cls(F=np.eye(2 * d), center=center)


def sqrt_det_branch(
    frames: Sequence[np.ndarray], start: complex = 1.0 + 0j, max_step: float = MAX_BRANCH_STEP
) -> np.ndarray:
    """
    Continuous det Q^{−1/2} along a sequence of symplectic matrices.

    Args:
        frames: Matrices F along a path, sampled finely enough
        start: Branch value at the first frame
        max_step: Largest accepted argument change between neighbours

    Returns:
        Branch values, one per frame
    """
    d = frames[0].shape[0] // 2
    values = np.empty(len(frames), dtype=complex)
    current = complex(start)
    for i, F in enumerate(frames):
        Q = F[:d, :d] + 1j * F[:d, d:]
        candidate = 1.0 / np.sqrt(complex(np.linalg.det(Q)))
        if abs(-candidate - current) < abs(candidate - current):
            candidate = -candidate
        if i > 0 and abs(np.angle(candidate / current)) >= max_step:
            raise BranchDiscontinuityError(
                f"det Q^(-1/2) argument jumped by {abs(np.angle(candidate / current)):.3f} at path node {i}"
            )
        if i == 0 and abs(np.angle(candidate / current)) >= max_step:
            raise BranchDiscontinuityError("Start value is not a square root of det Q^(-1) at the first node")
        current = candidate
        values[i] = current
    return values


@lru_cache(maxsize=8)
def _scaled_grid(nmax: int, spacing: float) -> Tuple[np.ndarray, np.ndarray]:
    extent = math.sqrt(2 * nmax) + GRID_PADDING
    n = int(math.ceil(extent / spacing))
    y = spacing * np.arange(-n, n + 1)
    h = hermite_functions(nmax, y)
    y.setflags(write=False)
    h.setflags(write=False)
    return y, h


def _project(values: np.ndarray, h: np.ndarray, spacing: float, d: int) -> np.ndarray:
    """Coefficients ∫ h_k(y) ψ̃(y) dy for a grid function of d variables."""
    c = values
    for _ in range(d):
        c = np.tensordot(c, h, axes=([0], [1]))
    return (c * spacing ** d).ravel()


def _multi_indices_upto(nu: Tuple[int, ...]) -> List[Tuple[int, ...]]:
    grid = np.indices([n + 1 for n in nu]).reshape(len(nu), -1).T
    return sorted((tuple(int(x) for x in row) for row in grid), key=lambda k: (sum(k), k))


def wavepacket_on_grid(
    frame: CoherentFrame, nu: Sequence[int], hbar: float, y: np.ndarray
) -> np.ndarray:
    """
    Excited wavepacket φ_ν in scaled units on the tensor grid y^d.

    φ₀ = π^{−d/4} det Q^{−1/2} exp(−(i/2ℏ)q·p + i y·p/√ℏ + (i/2) w·Bw), w = y − q/√ℏ,
    and φ_{k+e_j} = (√2 (Q⁻¹w)_j φ_k − Σ_l M_{jl} √k_l φ_{k−e_l}) / √(k_j+1).
    """
    d = frame.d
    nu = tuple(int(n) for n in nu)
    q = frame.center.x
    p = frame.center.xi
    mesh = np.stack(np.meshgrid(*[y] * d, indexing="ij"), axis=-1)
    w = mesh - q / math.sqrt(hbar)
    B = frame.B
    quad = np.einsum("...i,ij,...j->...", w, B, w)
    phase = -0.5 * float(q @ p) / hbar + mesh @ p / math.sqrt(hbar) + 0.5 * quad
    states: Dict[Tuple[int, ...], np.ndarray] = {
        (0,) * d: np.pi ** (-d / 4) * frame.sqrt_det_inv * np.exp(1j * phase)
    }
    if any(nu):
        Qinv_w = w @ np.linalg.inv(frame.Q).T
        M = frame.M
        for k in _multi_indices_upto(nu):
            if k in states:
                continue
            j = max(i for i in range(d) if k[i] > 0)
            prev = tuple(k[i] - (1 if i == j else 0) for i in range(d))
            acc = math.sqrt(2.0) * Qinv_w[..., j] * states[prev]
            for l in range(d):
                if prev[l] > 0:
                    lower = tuple(prev[i] - (1 if i == l else 0) for i in range(d))
                    acc = acc - M[j, l] * math.sqrt(prev[l]) * states[lower]
            states[k] = acc / math.sqrt(prev[j] + 1)
    return states[nu] * np.exp(1j * frame.gamma / hbar)


def metaplectic_state(
    frame: CoherentFrame,
    nu: Sequence[int],
    basis: HermiteBasisSpec,
    spacing: float = GRID_SPACING,
    norm_tol: float = NORM_TOLERANCE,
    band_tol: float = 1e-6,
) -> np.ndarray:
    """
    Hermite coefficients of the Gaussian wavepacket φ_ν[Q, P] at the frame center.

    Args:
        frame: Coherent frame with tracked branch
        nu: Excitation multi-index (|ν| ≤ 6)
        basis: Hermite basis
        spacing: Scaled grid spacing

    Returns:
        Coefficient vector of norm 1 (checked to norm_tol)
    """
    nu = tuple(int(n) for n in nu)
    if len(nu) != basis.d or frame.d != basis.d:
        raise ValidationError(f"Excitation {nu} or frame dimension does not match basis dimension {basis.d}")
    if min(nu) < 0 or sum(nu) > MAX_EXCITATION:
        raise ValidationError(f"Excitation {nu} outside the supported range |nu| <= {MAX_EXCITATION}")
    frame.validate()
    y, h = _scaled_grid(basis.nmax, spacing)
    values = wavepacket_on_grid(frame, nu, basis.hbar, y)
    psi = _project(values, h, spacing, basis.d)
    check_band(psi, basis, 1, band_tol)
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > norm_tol:
        raise BandOverflowError(f"Wavepacket norm {norm:.8f} in the truncated basis differs from 1")
    return psi


def action_integral(z0: PhasePoint, s: float, field: FieldLike, config: Optional[FlowConfig] = None) -> float:
    """
    γ(0, s) = −s·f(z₀) + ∫₀ˢ ½(ξ·ẋ − x·ξ̇) along the flow of f.

    Args:
        z0: Start point
        s: Flow time
        field: Averaged symbol

    Returns:
        Action phase γ
    """
    sol = integrate_variational(z0, [s], field, config)
    return _gamma(sol, z0, field, 0)


def _value_at(field: FieldLike, z0: PhasePoint) -> float:
    if isinstance(field, WeylSymbol):
        return float(field(z0).real)
    value = field.value(z0.x, z0.xi)
    if value is None:
        raise ValidationError("Action phase needs a generator with values")
    return float(value)


def _gamma(sol: VariationalSolution, z0: PhasePoint, field: FieldLike, i: int) -> float:
    return -float(sol.s[i]) * _value_at(field, z0) + float(sol.action[i])


@dataclass
class PropagationResult:
    """Leading-order propagated state with its frame data."""
    state: np.ndarray
    center: PhasePoint
    gamma: float
    theta: float
    sqrt_det_inv: complex

    def to_dict(self) -> Dict[str, Any]:
        return {
            "center": self.center.to_dict(),
            "gamma": self.gamma,
            "theta": self.theta,
            "sqrt_det_inv": [self.sqrt_det_inv.real, self.sqrt_det_inv.imag],
            "norm": float(np.linalg.norm(self.state)),
        }


def _mode_angles(tau: Sequence[float], reduced: Optional[ReducedHamiltonianSet], d: int) -> np.ndarray:
    tau = np.asarray(tau, dtype=float).reshape(-1)
    angles = reduced.mode_angles(tau) if reduced is not None else tau
    if angles.shape != (d,):
        raise ValidationError(f"tau of shape {tau.shape} does not lift to {d} modes")
    return angles


def leading_states_along_s(
    z0: PhasePoint,
    s_nodes: Sequence[float],
    field: FieldLike,
    basis: HermiteBasisSpec,
    config: Optional[FlowConfig] = None,
    ehrenfest_epsilon: Optional[float] = 0.05,
) -> Tuple[np.ndarray, VariationalSolution, np.ndarray]:
    """
    Leading-order states e^{iγ(0,s)/ℏ} T̂(φ_s z₀) F̂(s) Ψ₀ on increasing s nodes from 0.

    Args:
        z0: Base point
        s_nodes: Increasing nonnegative nodes starting at 0, fine enough for branch tracking
        field: Averaged symbol
        basis: Hermite basis
        ehrenfest_epsilon: Budget exponent (None disables the check)

    Returns:
        (states (n, dim), variational solution, branch values)
    """
    s_nodes = np.asarray(s_nodes, dtype=float)
    if s_nodes[0] != 0 or np.any(np.diff(s_nodes) <= 0):
        raise ValidationError("s nodes must start at 0 and increase")
    sol = integrate_variational(z0, s_nodes, field, config)
    theta = float(np.max(np.linalg.norm(sol.frames, axis=(1, 2))))
    if ehrenfest_epsilon is not None:
        check_ehrenfest_budget(theta, basis.hbar, ehrenfest_epsilon)
    branch = sqrt_det_branch(list(sol.frames))
    f0 = _value_at(field, z0)
    states = np.empty((len(s_nodes), basis.dim), dtype=complex)
    for i in range(len(s_nodes)):
        frame = CoherentFrame(
            F=sol.frames[i],
            center=PhasePoint.from_array(sol.points[i]),
            sqrt_det_inv=branch[i],
            gamma=-s_nodes[i] * f0 + sol.action[i],
        )
        states[i] = metaplectic_state(frame, (0,) * basis.d, basis)
    return states, sol, branch


def propagate_leading(
    z0: PhasePoint,
    tau: Sequence[float],
    s: float,
    field: FieldLike,
    basis: HermiteBasisSpec,
    reduced: Optional[ReducedHamiltonianSet] = None,
    config: Optional[FlowConfig] = None,
    ehrenfest_epsilon: Optional[float] = 0.05,
    max_refinements: int = 6,
) -> PropagationResult:
    """
    Leading-order propagation of Ψ^ℏ_{z₀} by e^{−i(τ·Ĥ̃ + sL̂)/ℏ}.

    Returns e^{(i/ℏ)(γ(τ,s) − τ·𝓗̃(z₀))} T̂(z(τ,s)) F̂_{z₀}(τ,s) Ψ₀; for the
    rotations generated by the reduced Hamiltonians the Legendre part of γ
    equals τ·𝓗̃(z₀), so only the s-part of the action remains.

    Args:
        z0: Base point
        tau: Angles in R^{d_E} (or R^d when reduced is omitted)
        s: Time along the averaged flow (≥ 0)
        field: Averaged symbol ⟨L⟩
        basis: Hermite basis
        reduced: Reduced periodic Hamiltonians
        ehrenfest_epsilon: Budget exponent (None disables the check)
        max_refinements: Path doublings allowed for branch tracking

    Returns:
        PropagationResult
    """
    if s < 0:
        raise ValidationError(f"s must be nonnegative, got {s}")
    d = z0.d
    angles = _mode_angles(tau, reduced, d)
    n_tau = max(2, int(math.ceil(np.sum(np.abs(angles)) / (math.pi / 4))) + 2)
    n_s = 16
    for attempt in range(max_refinements + 1):
        try:
            s_nodes = np.linspace(0.0, s, n_s) if s > 0 else np.zeros(1)
            sol = integrate_variational(z0, s_nodes, field, config)
            tau_path = [flow_matrix_oscillator(r * angles) for r in np.linspace(0.0, 1.0, n_tau)]
            R = tau_path[-1]
            path = tau_path + [R @ F for F in sol.frames[1:]]
            branch = sqrt_det_branch(path)
            break
        except BranchDiscontinuityError:
            if attempt == max_refinements:
                raise
            n_tau *= 2
            n_s *= 2
            logger.debug(f"Refining propagation path to n_tau={n_tau}, n_s={n_s}")

    theta = float(np.max(np.linalg.norm(sol.frames, axis=(1, 2))))
    if ehrenfest_epsilon is not None:
        check_ehrenfest_budget(theta, basis.hbar, ehrenfest_epsilon)
    F = R @ sol.frames[-1]
    end = sol.points[-1]
    center = PhasePoint.from_complex((end[:d] + 1j * end[d:]) * np.exp(-1j * angles))
    gamma = _gamma(sol, z0, field, len(s_nodes) - 1)
    frame = CoherentFrame(F=F, center=center, sqrt_det_inv=complex(branch[-1]), gamma=gamma)
    state = metaplectic_state(frame, (0,) * d, basis)
    return PropagationResult(state=state, center=center, gamma=gamma, theta=theta, sqrt_det_inv=complex(branch[-1]))


def reduced_operator_phases(
    basis: HermiteBasisSpec, reduced: Optional[ReducedHamiltonianSet], tau: Sequence[float]
) -> np.ndarray:
    """Diagonal of e^{−iτ·Ĥ̃/ℏ}: Op(𝓗̃_j) = Σ_i c_{j,i} ℏ(k_i + ½)."""
    angles = _mode_angles(tau, reduced, basis.d)
    return np.exp(-1j * (basis.multi_indices + 0.5) @ angles)


def hermitian_propagator(A: np.ndarray, t: float, hbar: float) -> np.ndarray:
    """e^{−itA/ℏ} for a Hermitian matrix A via eigh."""
    try:
        values, vectors = linalg.eigh(A)
    except linalg.LinAlgError as e:
        raise NumericalToleranceError(f"Eigendecomposition failed: {e}") from e
    return (vectors * np.exp(-1j * t * values / hbar)) @ vectors.conj().T


def propagate_exact(
    z0: PhasePoint,
    tau: Sequence[float],
    s: float,
    field: WeylSymbol,
    basis: HermiteBasisSpec,
    reduced: Optional[ReducedHamiltonianSet] = None,
) -> np.ndarray:
    """
    Truncated-matrix oracle e^{−isL̂/ℏ} e^{−iτ·Ĥ̃/ℏ} Ψ^ℏ_{z₀}.

    Args:
        z0: Base point
        tau: Reduced-flow angles
        s: Time along the averaged flow
        field: Averaged symbol ⟨L⟩
        basis: Hermite basis
        reduced: Reduced periodic Hamiltonians

    Returns:
        Coefficient vector
    """
    psi = coherent_state(z0, basis)
    psi = reduced_operator_phases(basis, reduced, tau) * psi
    if s != 0 and not field.is_zero:
        L = quantize(field, basis)
        psi = hermitian_propagator(L.entries, s, basis.hbar) @ psi
    return psi
