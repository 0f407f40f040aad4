# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Classical dynamics for oscilab.

Explicit oscillator multiflow, adaptive integration of averaged-symbol
flows, linearized (variational) flows along multiorbits, torus measures
and Birkhoff averages of those measures.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp, trapezoid

from ..core.config import FlowConfig
from ..core.errors import ConvergenceError, EhrenfestBudgetError, SymplecticDriftError, ValidationError
from .frequency import ReducedHamiltonianSet
from .phase_point import PhasePoint
from .symbols import WeylSymbol

logger = logging.getLogger(__name__)

Gradient = Callable[[np.ndarray, np.ndarray], np.ndarray]
Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]

SYMPLECTIC_TOLERANCE = 1e-8
MAX_RENORMALIZATIONS = 3


def symplectic_form(d: int) -> np.ndarray:
    """J = [[0, I], [−I, 0]] so that ẇ = J∇f gives ẋ = ∂_ξf, ξ̇ = −∂_xf."""
    I = np.eye(d)
    Z = np.zeros((d, d))
    return np.block([[Z, I], [-I, Z]])


def oscillator_flow(z: PhasePoint, tau: Sequence[float]) -> PhasePoint:
    """
    Multiflow Φ_τ: rotate each plane by z_j ↦ e^{−iτ_j} z_j.

    Args:
        z: Phase point
        tau: Angles in R^d

    Returns:
        Φ_τ(z)
    """
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (z.d,):
        raise ValidationError(f"tau must have {z.d} components, got shape {tau.shape}")
    return PhasePoint.from_complex(z.z * np.exp(-1j * tau))


def hamiltonian_flow(z: PhasePoint, t: float, omega: Sequence[float]) -> PhasePoint:
    """φ^H_t = Φ_{tω}."""
    return oscillator_flow(z, t * np.asarray(omega, dtype=float))


def flow_matrix_oscillator(angles: Sequence[float]) -> np.ndarray:
    """
    Matrix of Φ_τ acting on (x, ξ).

    Args:
        angles: Per-mode rotation angles

    Returns:
        Block rotation [[C, S], [−S, C]] with C = diag cos, S = diag sin
    """
    angles = np.asarray(angles, dtype=float)
    C = np.diag(np.cos(angles))
    S = np.diag(np.sin(angles))
    return np.block([[C, S], [-S, C]])


def symplectic_defect(F: np.ndarray) -> float:
    """‖FᵀJF − J‖ (max norm)."""
    J = symplectic_form(F.shape[0] // 2)
    return float(np.max(np.abs(F.T @ J @ F - J)))


def symplectic_renormalize(F: np.ndarray, iterations: int = 2) -> np.ndarray:
    """
    Pull a nearly symplectic matrix back onto Sp(2d).

    Each step applies F ← F(I + ½JE) with E = FᵀJF − J, which removes the
    first-order defect.

    Args:
        F: Real 2d×2d matrix
        iterations: Correction steps

    Returns:
        Corrected matrix
    """
    J = symplectic_form(F.shape[0] // 2)
    I = np.eye(F.shape[0])
    for _ in range(iterations):
        E = F.T @ J @ F - J
        F = F @ (I + 0.5 * J @ E)
    return F


class HamiltonianField:
    """
    Hamiltonian vector field X_f = J∇f of a symbol or a gradient evaluator.

    Features:
    - exact gradients and Hessians for WeylSymbol generators
    - central finite-difference Hessians for plain gradient evaluators
    - batched right-hand sides for integrating many points at once
    """

    def __init__(
        self,
        d: int,
        symbol: Optional[WeylSymbol] = None,
        gradient: Optional[Gradient] = None,
        value: Optional[Evaluator] = None,
        fd_step: float = 1e-5,
    ):
        if symbol is None and gradient is None:
            raise ValidationError("HamiltonianField needs a symbol or a gradient evaluator")
        if symbol is not None and symbol.d != d:
            raise ValidationError(f"Symbol dimension {symbol.d} does not match d={d}")
        self.d = d
        self.symbol = symbol
        self.fd_step = fd_step
        self._gradient = gradient
        self._value = value
        self._grad_symbols: Optional[List[WeylSymbol]] = None
        self._hess_symbols: Optional[List[List[WeylSymbol]]] = None
        if symbol is not None:
            self._grad_symbols = symbol.gradient_symbols()
            self._hess_symbols = symbol.hessian_symbols()

    @classmethod
    def from_symbol(cls, symbol: WeylSymbol, fd_step: float = 1e-5) -> "HamiltonianField":
        return cls(symbol.d, symbol=symbol, fd_step=fd_step)

    def value(self, x: np.ndarray, xi: np.ndarray) -> Optional[np.ndarray]:
        if self.symbol is not None:
            return self.symbol.evaluate(x, xi).real
        if self._value is not None:
            return np.asarray(self._value(x, xi), dtype=float)
        return None

    def gradient(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """(∂_x f, ∂_ξ f) on a trailing axis of length 2d."""
        if self._grad_symbols is not None:
            return np.stack([g.evaluate(x, xi).real for g in self._grad_symbols], axis=-1)
        return np.asarray(self._gradient(x, xi), dtype=float)

    def hessian(self, w: np.ndarray) -> np.ndarray:
        """Hessian at a single point w = (x, ξ)."""
        d = self.d
        if self._hess_symbols is not None:
            x, xi = w[:d], w[d:]
            return np.array([[h.evaluate(x, xi).real for h in row] for row in self._hess_symbols])
        H = np.empty((2 * d, 2 * d))
        for k in range(2 * d):
            e = np.zeros(2 * d)
            e[k] = self.fd_step
            plus = self.gradient((w + e)[:d], (w + e)[d:])
            minus = self.gradient((w - e)[:d], (w - e)[d:])
            H[:, k] = (plus - minus) / (2 * self.fd_step)
        return 0.5 * (H + H.T)

    def vector_field(self, w: np.ndarray) -> np.ndarray:
        """X_f on points w with trailing axis 2d."""
        d = self.d
        g = self.gradient(w[..., :d], w[..., d:])
        return np.concatenate([g[..., d:], -g[..., :d]], axis=-1)

    def check_gradient(self, z: PhasePoint, tol: float = 1e-5) -> None:
        """Compare the gradient with finite differences of the value evaluator at z."""
        if self.symbol is not None or self._value is None:
            return
        w = z.as_array()
        d = self.d
        fd = np.empty(2 * d)
        for k in range(2 * d):
            e = np.zeros(2 * d)
            e[k] = self.fd_step
            fd[k] = (
                float(self._value((w + e)[:d], (w + e)[d:])) - float(self._value((w - e)[:d], (w - e)[d:]))
            ) / (2 * self.fd_step)
        exact = self.gradient(z.x, z.xi)
        if np.max(np.abs(fd - exact)) > tol * max(1.0, float(np.max(np.abs(exact)))):
            raise ValidationError(f"Gradient evaluator inconsistent with values at {z.to_dict()}")


FieldLike = Union[WeylSymbol, HamiltonianField]


def _as_field(field: FieldLike, d: int, config: FlowConfig) -> HamiltonianField:
    if isinstance(field, HamiltonianField):
        return field
    if isinstance(field, WeylSymbol):
        if field.d != d:
            raise ValidationError(f"Symbol dimension {field.d} does not match point dimension {d}")
        return HamiltonianField.from_symbol(field, fd_step=config.fd_step)
    raise ValidationError(f"Unsupported generator type {type(field).__name__}")


def _solve(rhs, y0: np.ndarray, span: Tuple[float, float], t_eval: np.ndarray, config: FlowConfig):
    try:
        sol = solve_ivp(
            rhs, span, y0, method=config.method, t_eval=t_eval, rtol=config.rtol, atol=config.atol
        )
    except (ValueError, FloatingPointError) as e:
        raise ConvergenceError(f"Integrator failed: {e}") from e
    if not sol.success:
        raise ConvergenceError(f"Integrator failed: {sol.message}")
    return sol


def orbit(
    z: PhasePoint,
    times: Sequence[float],
    field: FieldLike,
    config: Optional[FlowConfig] = None,
) -> np.ndarray:
    """
    Sample the flow of a generator at several times.

    Args:
        z: Start point
        times: Nonnegative, nondecreasing sample times
        field: Generating symbol or field
        config: Integrator settings

    Returns:
        Array of shape (len(times), 2d) with rows (x, ξ)
    """
    config = config or FlowConfig()
    hf = _as_field(field, z.d, config)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValidationError("Orbit needs at least one sample time")
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValidationError("Orbit times must be nonnegative and sorted")
    w0 = z.as_array()
    if times[-1] == 0:
        return np.tile(w0, (len(times), 1))
    sol = _solve(lambda s, w: hf.vector_field(w), w0, (0.0, float(times[-1])), times, config)
    return sol.y.T


def averaged_flow(
    z: PhasePoint,
    s: float,
    field: FieldLike,
    config: Optional[FlowConfig] = None,
    conservation_tol: float = 1e-8,
) -> PhasePoint:
    """
    Flow φ^f_s of an averaged symbol by adaptive Runge–Kutta integration.

    Args:
        z: Start point
        s: Flow time (either sign)
        field: Generating symbol or HamiltonianField
        config: Integrator settings
        conservation_tol: Allowed drift of f along the orbit

    Returns:
        φ^f_s(z)
    """
    config = config or FlowConfig()
    hf = _as_field(field, z.d, config)
    hf.check_gradient(z)
    if s == 0:
        return z
    w0 = z.as_array()
    sol = _solve(lambda t, w: hf.vector_field(w), w0, (0.0, float(s)), np.array([float(s)]), config)
    end = sol.y[:, -1]

    start_value = hf.value(z.x, z.xi)
    if start_value is not None:
        end_value = hf.value(end[: z.d], end[z.d:])
        drift = abs(float(end_value) - float(start_value))
        if drift > conservation_tol * max(1.0, abs(float(start_value))):
            raise ConvergenceError(f"Generator drifted by {drift:.3e} along the flow (s={s})")
    logger.debug(f"Averaged flow to s={s} in {sol.nfev} evaluations")
    return PhasePoint.from_array(end)


@dataclass
class VariationalSolution:
    """Orbit samples with their linearizations and the symplectic action ∫ ½(ξ·ẋ − x·ξ̇)."""
    s: np.ndarray
    points: np.ndarray
    frames: np.ndarray
    action: np.ndarray


def integrate_variational(
    z0: PhasePoint,
    s_nodes: Sequence[float],
    field: FieldLike,
    config: Optional[FlowConfig] = None,
    tol: float = SYMPLECTIC_TOLERANCE,
) -> VariationalSolution:
    """
    Integrate the orbit, its linearization dF/ds = J ∂²f F and the action.

    Args:
        z0: Start point
        s_nodes: Sample times (any sign, any order)
        field: Generating symbol or field
        config: Integrator settings
        tol: Symplectic tolerance for the returned frames

    Returns:
        VariationalSolution with points (n, 2d), frames (n, 2d, 2d) and
        action (n,) in s_nodes order
    """
    config = config or FlowConfig()
    hf = _as_field(field, z0.d, config)
    d = z0.d
    n = 2 * d
    J = symplectic_form(d)
    s_nodes = np.asarray(s_nodes, dtype=float)
    points = np.empty((len(s_nodes), n))
    frames = np.empty((len(s_nodes), n, n))
    action = np.zeros(len(s_nodes))
    y0 = np.concatenate([z0.as_array(), np.eye(n).ravel(), [0.0]])

    def rhs(s: float, y: np.ndarray) -> np.ndarray:
        w = y[:n]
        F = y[n:-1].reshape(n, n)
        X = hf.vector_field(w)
        # ½(ξ·ẋ − x·ξ̇)
        dA = 0.5 * (w[d:] @ X[:d] - w[:d] @ X[d:])
        return np.concatenate([X, (J @ hf.hessian(w) @ F).ravel(), [dA]])

    for sign in (1.0, -1.0):
        idx = np.nonzero(s_nodes * sign > 0)[0]
        if len(idx) == 0:
            continue
        order = idx[np.argsort(np.abs(s_nodes[idx]))]
        sol = _solve(rhs, y0, (0.0, float(s_nodes[order[-1]])), s_nodes[order], config)
        points[order] = sol.y[:n].T
        frames[order] = sol.y[n:-1].T.reshape(-1, n, n)
        action[order] = sol.y[-1]

    zero = np.nonzero(s_nodes == 0)[0]
    points[zero] = z0.as_array()
    frames[zero] = np.eye(n)

    for i in range(len(s_nodes)):
        defect = symplectic_defect(frames[i])
        if defect <= tol:
            continue
        logger.warning(f"Symplectic drift {defect:.3e} at s={s_nodes[i]}; renormalizing")
        for _ in range(MAX_RENORMALIZATIONS):
            frames[i] = symplectic_renormalize(frames[i])
            defect = symplectic_defect(frames[i])
            if defect <= tol:
                break
        if defect > tol:
            raise SymplecticDriftError(f"Linearized flow lost symplecticity ({defect:.3e}) at s={s_nodes[i]}")
    return VariationalSolution(s=s_nodes, points=points, frames=frames, action=action)


@dataclass(frozen=True)
class LinearizedFrame:
    """Linearized multiflow F_{z₀}(τ, s) at one (τ, s) target."""
    F: np.ndarray
    tau: Tuple[float, ...]
    s: float

    @property
    def defect(self) -> float:
        return symplectic_defect(self.F)


def linearized_flow(
    z0: PhasePoint,
    path: Sequence[Tuple[Sequence[float], float]],
    field: FieldLike,
    reduced: Optional[ReducedHamiltonianSet] = None,
    config: Optional[FlowConfig] = None,
    tol: float = SYMPLECTIC_TOLERANCE,
) -> List[LinearizedFrame]:
    """
    Linearization of φ^f_s ∘ Φ^{𝓗̃}_τ at z₀ along a path of (τ, s) targets.

    The reduced Hamiltonians are quadratic and Poisson-commute with f, so
    F(τ, s) = R(τ) Dφ_s(z₀) with R(τ) the exact rotation of Φ^{𝓗̃}_τ.

    Args:
        z0: Base point
        path: (τ, s) pairs; τ ∈ R^{d_E} when reduced is given, else R^d
        field: Averaged generator ⟨L⟩ (or ⟨V⟩)
        reduced: Reduced periodic Hamiltonians; plain multiflow angles when omitted
        config: Integrator settings
        tol: Symplectic tolerance

    Returns:
        One LinearizedFrame per target
    """
    if len(path) == 0:
        return []
    s_nodes = np.array([float(s) for _, s in path])
    frames = integrate_variational(z0, s_nodes, field, config, tol).frames
    result: List[LinearizedFrame] = []
    for (tau, s), D in zip(path, frames):
        tau_arr = np.asarray(tau, dtype=float).reshape(-1)
        angles = reduced.mode_angles(tau_arr) if reduced is not None else tau_arr
        if angles.shape != (z0.d,):
            raise ValidationError(f"tau of shape {tau_arr.shape} does not lift to {z0.d} modes")
        result.append(LinearizedFrame(F=flow_matrix_oscillator(angles) @ D, tau=tuple(tau_arr), s=float(s)))
    return result


def theta_growth(
    z0: PhasePoint,
    T: float,
    field: FieldLike,
    omega: Sequence[float],
    samples: int = 32,
    config: Optional[FlowConfig] = None,
) -> float:
    """
    Sampled growth factor θ(z₀, T).

    f(t, s) = R(tω) Dφ_s(z₀) is sampled on a samples×samples grid of
    t ∈ [0, 2π), s ∈ [0, T]; θ is the largest |tr(f(t,s)ᵀ f(t′,s′))|^{1/2}.

    Args:
        z0: Base point
        T: Time horizon (≥ 0)
        field: Averaged generator
        omega: Frequency vector
        samples: Grid points per axis
        config: Integrator settings

    Returns:
        Lower estimate of θ(z₀, T)
    """
    if T < 0:
        raise ValidationError(f"T must be nonnegative, got {T}")
    omega = np.asarray(omega, dtype=float)
    s_nodes = np.linspace(0.0, T, samples) if T > 0 else np.zeros(1)
    t_nodes = 2 * np.pi * np.arange(samples) / samples
    frames = integrate_variational(z0, s_nodes, field, config).frames
    rotations = np.array([flow_matrix_oscillator(t * omega) for t in t_nodes])
    f = np.einsum("tij,sjk->tsik", rotations, frames).reshape(-1, 2 * z0.d * 2 * z0.d)
    gram = f @ f.T
    return float(math.sqrt(np.max(np.abs(gram))))


def ehrenfest_budget(theta: float, hbar: float, epsilon: float) -> bool:
    """True when ℏ^{1/2}θ ≤ ℏ^ε."""
    return math.sqrt(hbar) * theta <= hbar ** epsilon


def check_ehrenfest_budget(theta: float, hbar: float, epsilon: float) -> None:
    if not ehrenfest_budget(theta, hbar, epsilon):
        raise EhrenfestBudgetError(
            f"Ehrenfest budget exceeded: hbar^(1/2)*theta = {math.sqrt(hbar) * theta:.3e} > hbar^eps = {hbar ** epsilon:.3e}"
        )


def ehrenfest_time(
    z0: PhasePoint,
    field: FieldLike,
    omega: Sequence[float],
    hbar: float,
    epsilon: float = 0.05,
    ladder: Optional[Sequence[float]] = None,
    samples: int = 16,
    config: Optional[FlowConfig] = None,
) -> float:
    """
    Largest T on a ladder whose θ(z₀, T) stays within the Ehrenfest budget.

    Args:
        z0: Base point
        field: Averaged generator
        omega: Frequency vector
        hbar: Semiclassical parameter
        epsilon: Budget exponent
        ladder: Increasing candidate horizons (default 2^k, k = −2..8)
        samples: θ grid resolution

    Returns:
        Largest admissible T, 0.0 when none qualifies
    """
    ladder = list(ladder) if ladder is not None else [2.0 ** k for k in range(-2, 9)]
    best = 0.0
    for T in sorted(ladder):
        theta = theta_growth(z0, T, field, omega, samples, config)
        if not ehrenfest_budget(theta, hbar, epsilon):
            break
        best = float(T)
    logger.debug(f"Ehrenfest time for hbar={hbar}: {best}")
    return best


@dataclass(frozen=True)
class TorusMeasure:
    """
    Uniform measure on the orbit of Φ^{𝓗̃^E}_τ through z₀.

    Features:
    - uniform samples on T^{d_E}
    - expectations of vectorized observables
    """
    z0: PhasePoint
    reduced: ReducedHamiltonianSet

    @property
    def d_E(self) -> int:
        return self.reduced.d_E

    @classmethod
    def through(cls, z0: PhasePoint, spec) -> "TorusMeasure":
        """Measure on the torus 𝕄⁻¹(𝕄(z₀)) for a frequency spec."""
        from .frequency import reduced_hamiltonians
        return cls(z0, reduced_hamiltonians(spec, z0.actions))

    def angles(self, n: int) -> np.ndarray:
        grid = np.meshgrid(*[2 * np.pi * np.arange(n) / n] * self.d_E, indexing="ij")
        return np.stack(grid, axis=-1).reshape(-1, self.d_E)

    def sample(self, n: int = 16) -> np.ndarray:
        """Points Φ^{𝓗̃}_τ(z₀) on an n^{d_E} grid, shape (n^{d_E}, 2d)."""
        mode_angles = self.angles(n) @ self.reduced.coefficient_matrix.astype(float)
        rotated = self.z0.z[None, :] * np.exp(-1j * mode_angles)
        return np.concatenate([rotated.real, rotated.imag], axis=1)

    def expectation(self, observable: Evaluator, n: int = 16) -> float:
        pts = self.sample(n)
        d = self.z0.d
        return float(np.mean(np.real(observable(pts[:, :d], pts[:, d:]))))


@dataclass
class BirkhoffReport:
    """Time averages of observables at T and 2T."""
    T: float
    values: Dict[str, float]
    values_doubled: Dict[str, float]
    tol: float

    @property
    def differences(self) -> Dict[str, float]:
        return {k: abs(self.values[k] - self.values_doubled[k]) for k in self.values}

    @property
    def converged(self) -> bool:
        return all(v <= self.tol for v in self.differences.values())

    def to_dict(self) -> Dict[str, object]:
        return {
            "T": self.T,
            "values": self.values,
            "values_doubled": self.values_doubled,
            "differences": self.differences,
            "converged": self.converged,
        }


def birkhoff_average_measure(
    mu: TorusMeasure,
    field: FieldLike,
    T: float,
    observables: Dict[str, Evaluator],
    torus_points: int = 8,
    time_steps: int = 256,
    tol: float = 1e-3,
    config: Optional[FlowConfig] = None,
) -> BirkhoffReport:
    """
    (1/T)∫₀ᵀ ∫ a∘φ_s dμ ds for each observable, compared against 2T.

    All torus samples are integrated together as one batched ODE; the time
    integral uses the trapezoid rule on a uniform grid.

    Args:
        mu: Torus measure
        field: Averaged generator
        T: Horizon (> 0)
        observables: Named vectorized evaluators
        torus_points: Samples per torus dimension
        time_steps: Trapezoid intervals on [0, T]
        tol: Allowed difference between the T and 2T averages

    Returns:
        BirkhoffReport with convergence flag
    """
    if T <= 0:
        raise ValidationError(f"T must be positive, got {T}")
    config = config or FlowConfig()
    d = mu.z0.d
    hf = _as_field(field, d, config)
    start = mu.sample(torus_points)
    m = start.shape[0]
    times = np.linspace(0.0, 2 * T, 2 * time_steps + 1)

    def rhs(s: float, y: np.ndarray) -> np.ndarray:
        return hf.vector_field(y.reshape(m, 2 * d)).ravel()

    sol = _solve(rhs, start.ravel(), (0.0, 2 * T), times, config)
    traj = sol.y.T.reshape(len(times), m, 2 * d)

    values: Dict[str, float] = {}
    doubled: Dict[str, float] = {}
    for name, a in observables.items():
        series = np.mean(np.real(a(traj[..., :d], traj[..., d:])), axis=1)
        values[name] = float(trapezoid(series[: time_steps + 1], times[: time_steps + 1]) / T)
        doubled[name] = float(trapezoid(series, times) / (2 * T))
    report = BirkhoffReport(T=float(T), values=values, values_doubled=doubled, tol=tol)
    if not report.converged:
        logger.info(f"Birkhoff averages not converged at T={T}: {report.differences}")
    return report


def transport_points(
    points: np.ndarray,
    s: float,
    field: FieldLike,
    config: Optional[FlowConfig] = None,
) -> np.ndarray:
    """
    Push a cloud of points (n, 2d) along the flow of a generator for time s.

    All points are integrated as one batched system.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if s == 0 or len(points) == 0:
        return points.copy()
    config = config or FlowConfig()
    m, n = points.shape
    hf = _as_field(field, n // 2, config)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return hf.vector_field(y.reshape(m, n)).ravel()

    sol = _solve(rhs, points.ravel(), (0.0, float(s)), np.array([float(s)]), config)
    return sol.y[:, -1].reshape(m, n)


def detect_tangent_flow(
    z0: PhasePoint,
    field: FieldLike,
    reduced: ReducedHamiltonianSet,
    tol: float = 1e-6,
    config: Optional[FlowConfig] = None,
) -> bool:
    """
    Detect Γ_T = {0}: X_f(z₀) lies in the span of the X_{𝓗̃_j}(z₀).

    Args:
        z0: Base point
        field: Averaged generator
        reduced: Reduced periodic Hamiltonians of the torus through z₀
        tol: Relative residual accepted as tangent

    Returns:
        True when the flow of f is tangent to the torus orbit at z₀
    """
    config = config or FlowConfig()
    hf = _as_field(field, z0.d, config)
    w = z0.as_array()
    X = hf.vector_field(w)
    J = symplectic_form(z0.d)
    # ∇𝓗̃_j = (c_j x, c_j ξ)
    C = reduced.coefficient_matrix.astype(float)
    tangents = np.array([J @ np.concatenate([c * z0.x, c * z0.xi]) for c in C]).T
    scale = max(1.0, float(np.linalg.norm(X)))
    if np.linalg.norm(X) <= tol:
        return True
    coeffs, *_ = np.linalg.lstsq(tangents, X, rcond=None)
    residual = float(np.linalg.norm(tangents @ coeffs - X))
    return residual <= tol * scale
