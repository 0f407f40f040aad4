# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Empirical semiclassical measures.

Husimi point clouds, invariance tests under the harmonic flow and the flow
of ⟨V⟩, localization tests on level sets and position-density marginals.
Theorem-level checks that admit exact Weyl pairings use them; the Husimi
cloud is the positive surrogate for everything else.
"""

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, special, stats

from ..classical.flow import integrate_variational, transport_points
from ..classical.frequency import FrequencySpec
from ..classical.phase_point import PhasePoint
from ..classical.symbols import WeylSymbol, compose_linear, flow_compose, poisson
from ..core.config import FlowConfig
from ..core.errors import NumericalToleranceError, ValidationError
from ..quantum.quantization import HermiteBasisSpec, hermite_functions, wigner_pairing

logger = logging.getLogger(__name__)

HUSIMI_GRID_POINTS = 32
MIN_CAPTURED_MASS = 0.9
PRUNE_RELATIVE = 1e-10
TUBE_FLOOR = 2.0
POSITION_SPACING = 0.1
MASS_TOLERANCE = 1e-6

LevelSpec = Tuple[Union[WeylSymbol, Sequence[WeylSymbol]], Union[float, Sequence[float]]]


@dataclass
class EmpiricalMeasure:
    """
    Weighted point cloud in phase space.

    Features:
    - weights normalized to 1, captured mass kept for provenance
    - expectations of symbols and vectorized evaluators
    - 1-d marginals and CSV export
    """
    points: np.ndarray
    weights: np.ndarray
    hbar: float
    captured_mass: float = 1.0
    cell_volume: float = 0.0

    @property
    def d(self) -> int:
        return self.points.shape[1] // 2

    @property
    def x(self) -> np.ndarray:
        return self.points[:, : self.d]

    @property
    def xi(self) -> np.ndarray:
        return self.points[:, self.d :]

    def expectation(self, a: Union[WeylSymbol, Callable[[np.ndarray, np.ndarray], np.ndarray]]) -> float:
        f = a.evaluate if isinstance(a, WeylSymbol) else a
        return float(np.real(np.sum(self.weights * f(self.x, self.xi))))

    def mode(self) -> np.ndarray:
        """Point of largest weight."""
        return self.points[int(np.argmax(self.weights))]

    def mass_where(self, mask: np.ndarray) -> float:
        return float(np.sum(self.weights[np.asarray(mask, dtype=bool)]))

    def marginal(self, axis: int) -> Tuple[np.ndarray, np.ndarray]:
        """Values and weights of one phase-space coordinate (0..2d−1)."""
        return self.points[:, axis], self.weights

    def to_csv(self, path: Union[str, Path]) -> None:
        d = self.d
        header = [f"x{j + 1}" for j in range(d)] + [f"xi{j + 1}" for j in range(d)] + ["weight"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for p, w in zip(self.points, self.weights):
                writer.writerow([f"{v:.10g}" for v in p] + [f"{w:.10g}"])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "points": int(len(self.weights)),
            "hbar": self.hbar,
            "captured_mass": self.captured_mass,
            "mode": self.mode().tolist(),
        }


def coherent_rows(alpha: np.ndarray, nmax: int) -> np.ndarray:
    """Coherent-state Fock coefficients for many α at once, shape (len(α), nmax)."""
    alpha = np.asarray(alpha, dtype=complex).reshape(-1)
    n = np.arange(nmax)
    mag = np.abs(alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_mag = np.log(mag)
    log_c = np.where(
        n[None, :] == 0,
        0.0,
        n[None, :] * np.where(mag > 0, log_mag, -np.inf)[:, None],
    ) - 0.5 * special.gammaln(n + 1)[None, :] - 0.5 * mag[:, None] ** 2
    phase = np.exp(1j * n[None, :] * np.angle(alpha)[:, None])
    return np.exp(log_c) * phase


def _plane_radius(psi: np.ndarray, basis: HermiteBasisSpec, mode: int, tol: float = 1e-12) -> float:
    weights = np.abs(np.asarray(psi).reshape(basis.shape)) ** 2
    axes = tuple(i for i in range(basis.d) if i != mode)
    per_level = weights.sum(axis=axes) if axes else weights
    occupied = np.nonzero(per_level > tol * max(per_level.max(), 1e-300))[0]
    k_max = int(occupied.max()) if len(occupied) else 0
    return math.sqrt(2 * basis.hbar * (k_max + 1)) + 4 * math.sqrt(basis.hbar)


def husimi_cloud(
    psi: np.ndarray,
    basis: HermiteBasisSpec,
    grid_points: int = HUSIMI_GRID_POINTS,
    radius: Optional[Sequence[float]] = None,
    min_mass: float = MIN_CAPTURED_MASS,
    prune: float = PRUNE_RELATIVE,
) -> EmpiricalMeasure:
    """
    Husimi density |⟨Ψ^ℏ_z, ψ⟩|²/(2πℏ)^d on a tensor grid of mode planes.

    Args:
        psi: State coefficients
        basis: Hermite basis
        grid_points: Points per plane axis
        radius: Half-width of each plane grid (fitted to the state when omitted)
        min_mass: Required captured mass
        prune: Drop weights below this fraction of the maximum

    Returns:
        EmpiricalMeasure with normalized weights
    """
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (basis.dim,):
        raise ValidationError(f"State of shape {psi.shape} does not match basis dimension {basis.dim}")
    norm_sq = float(np.vdot(psi, psi).real)
    if norm_sq == 0:
        raise ValidationError("Husimi cloud of the zero state is undefined")
    d = basis.d
    hbar = basis.hbar
    radii = list(radius) if radius is not None else [_plane_radius(psi, basis, j) for j in range(d)]

    planes = []
    cell = 1.0
    overlap = psi.reshape(basis.shape)
    for j in range(d):
        axis = np.linspace(-radii[j], radii[j], grid_points)
        step = axis[1] - axis[0]
        cell *= step ** 2
        X, XI = np.meshgrid(axis, axis, indexing="ij")
        X, XI = X.ravel(), XI.ravel()
        planes.append((X, XI))
        rows = coherent_rows((X + 1j * XI) / math.sqrt(2 * hbar), basis.nmax)
        # contract the leading Fock axis, the plane axis moves to the back
        overlap = np.tensordot(overlap, np.conj(rows), axes=([0], [1]))
    density = np.abs(overlap.ravel()) ** 2 / (2 * np.pi * hbar) ** d

    grids = [np.arange(len(p[0])) for p in planes]
    idx = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, d)
    x = np.stack([planes[j][0][idx[:, j]] for j in range(d)], axis=1)
    xi = np.stack([planes[j][1][idx[:, j]] for j in range(d)], axis=1)

    captured = float(np.sum(density) * cell / norm_sq)
    if captured < min_mass:
        raise NumericalToleranceError(f"Husimi grid captured only {captured:.3f} of the state mass")
    keep = density > prune * density.max()
    weights = density[keep] / np.sum(density[keep])
    logger.debug(f"Husimi cloud: {int(keep.sum())} points, captured mass {captured:.4f}")
    return EmpiricalMeasure(
        points=np.concatenate([x[keep], xi[keep]], axis=1),
        weights=weights,
        hbar=hbar,
        captured_mass=captured,
        cell_volume=cell,
    )


@dataclass
class InvarianceReport:
    """
    Invariance and localization defects of a state.

    defects maps observable name to a (len(t), len(s)) matrix of
    |μ(a∘φ_s^{⟨V⟩}∘φ_t^H) − μ(a)|.
    """
    t_grid: np.ndarray
    s_grid: np.ndarray
    defects: Dict[str, np.ndarray]
    method: str
    localization: Dict[str, float] = field(default_factory=dict)

    @property
    def max_defect(self) -> float:
        return max((float(np.max(m)) for m in self.defects.values()), default=0.0)

    def harmonic_defects(self) -> Dict[str, np.ndarray]:
        """Defects along s = 0."""
        return {k: m[:, 0] for k, m in self.defects.items()}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "t_grid": self.t_grid.tolist(),
            "s_grid": self.s_grid.tolist(),
            "defects": {k: m.tolist() for k, m in self.defects.items()},
            "max_defect": self.max_defect,
            "localization": self.localization,
        }


def _is_homogeneous_quadratic(s: WeylSymbol) -> bool:
    return all(sum(a) + sum(b) == 2 for a, b in s.terms)


def invariance_test(
    psi: np.ndarray,
    basis: HermiteBasisSpec,
    observables: Dict[str, WeylSymbol],
    Vavg: WeylSymbol,
    t_grid: Sequence[float],
    s_grid: Sequence[float],
    config: Optional[FlowConfig] = None,
    cloud: Optional[EmpiricalMeasure] = None,
) -> InvarianceReport:
    """
    Defects |μ(a∘φ_s^{⟨V⟩}∘φ_t^H) − μ(a)| over a (t, s) grid.

    For quadratic ⟨V⟩ both flows are linear and the compositions stay
    polynomial, so exact Weyl pairings are used; otherwise the Husimi cloud
    is transported along the flow of ⟨V⟩.

    Args:
        psi: State
        basis: Hermite basis
        observables: Named polynomial observables (degree ≤ 6)
        Vavg: Averaged perturbation
        t_grid: Harmonic-flow times
        s_grid: Averaged-flow times (nonnegative)
        config: Integrator settings
        cloud: Precomputed Husimi cloud for the transport method

    Returns:
        InvarianceReport
    """
    for name, a in observables.items():
        if a.max_degree > 6:
            raise ValidationError(f"Observable {name} has degree {a.max_degree} > 6")
    t_grid = np.asarray(t_grid, dtype=float)
    s_grid = np.asarray(s_grid, dtype=float)
    omega = np.asarray(basis.omega, dtype=float)
    defects = {name: np.zeros((len(t_grid), len(s_grid))) for name in observables}
    exact = Vavg.is_zero or _is_homogeneous_quadratic(Vavg)

    if exact:
        if Vavg.is_zero:
            frames = np.repeat(np.eye(2 * basis.d)[None], len(s_grid), axis=0)
        else:
            origin = np.zeros(basis.d)
            frames = integrate_variational(PhasePoint(origin, origin), s_grid, Vavg, config).frames
        for name, a in observables.items():
            base = wigner_pairing(psi, a, basis)
            for js, F in enumerate(frames):
                b = compose_linear(a, F)
                for jt, t in enumerate(t_grid):
                    c = flow_compose(b, t * omega)
                    defects[name][jt, js] = abs(wigner_pairing(psi, c, basis) - base)
        method = "weyl"
    else:
        cloud = cloud or husimi_cloud(psi, basis)
        base = {name: cloud.expectation(a) for name, a in observables.items()}
        d = basis.d
        for jt, t in enumerate(t_grid):
            z = (cloud.x + 1j * cloud.xi) * np.exp(-1j * t * omega)[None, :]
            rotated = np.concatenate([z.real, z.imag], axis=1)
            for js, s in enumerate(s_grid):
                moved = transport_points(rotated, float(s), Vavg, config)
                for name, a in observables.items():
                    value = float(np.real(np.sum(cloud.weights * a.evaluate(moved[:, :d], moved[:, d:]))))
                    defects[name][jt, js] = abs(value - base[name])
        method = "husimi"
    report = InvarianceReport(t_grid=t_grid, s_grid=s_grid, defects=defects, method=method)
    logger.debug(f"Invariance test ({method}): max defect {report.max_defect:.3e}")
    return report


def _level_values(level: Union[WeylSymbol, Sequence[WeylSymbol]], x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    symbols = [level] if isinstance(level, WeylSymbol) else list(level)
    return np.stack([np.real(s.evaluate(x, xi)) for s in symbols], axis=-1)


def localization_test(
    psi: np.ndarray,
    basis: HermiteBasisSpec,
    levels: Dict[str, LevelSpec],
    r: float,
    cloud: Optional[EmpiricalMeasure] = None,
) -> Dict[str, float]:
    """
    Husimi mass outside the tube {max_j |f_j − c_j| < r} of each level set.

    Args:
        psi: State
        basis: Hermite basis
        levels: Named (symbol or symbols, value or values) level sets
        r: Tube radius in energy units (≥ 2√ℏ)
        cloud: Precomputed Husimi cloud

    Returns:
        Mass outside each tube
    """
    floor = TUBE_FLOOR * math.sqrt(basis.hbar)
    if r < floor:
        raise ValidationError(f"Tube radius {r:.4f} is below the uncertainty floor {floor:.4f}")
    cloud = cloud or husimi_cloud(psi, basis)
    out: Dict[str, float] = {}
    for name, (level, value) in levels.items():
        values = _level_values(level, cloud.x, cloud.xi)
        target = np.atleast_1d(np.asarray(value, dtype=float))
        inside = np.max(np.abs(values - target[None, :]), axis=1) < r
        out[name] = max(0.0, 1.0 - cloud.mass_where(inside))
    return out


def single_torus_mass(
    cloud: EmpiricalMeasure, spec: FrequencySpec, basis: HermiteBasisSpec, r: float
) -> Tuple[Tuple[float, ...], float]:
    """
    Largest Husimi mass inside the r-tube of one torus 𝕄⁻¹(E), E on the quantum lattice.

    𝕄 has components ν_n·(H_1, …, H_d); candidate E are the values
    ℏ ν_n·(k + ½) over the basis.

    Returns:
        (E, captured mass)
    """
    nu = spec.nu_matrix.astype(float)
    actions = 0.5 * (cloud.x ** 2 + cloud.xi ** 2)
    M_points = actions @ nu.T
    candidates = np.unique(np.round(basis.hbar * (basis.multi_indices + 0.5) @ nu.T, 12), axis=0)
    mean = cloud.weights @ M_points
    spread = math.sqrt(float(cloud.weights @ np.sum((M_points - mean) ** 2, axis=1)))
    near = np.max(np.abs(candidates - mean[None, :]), axis=1) <= 3 * spread + r
    best_mass, best_E = 0.0, tuple(float(c) for c in mean)
    for cand in candidates[near]:
        mass = cloud.mass_where(np.max(np.abs(M_points - cand[None, :]), axis=1) < r)
        if mass > best_mass:
            best_mass, best_E = mass, tuple(float(c) for c in cand)
    return best_E, best_mass


@dataclass
class PositionMarginal:
    """|ψ(x)|² on a tensor grid."""
    axes: List[np.ndarray]
    density: np.ndarray
    mass: float

    def axis_marginal(self, j: int) -> Tuple[np.ndarray, np.ndarray]:
        """Density of x_j alone."""
        dens = self.density
        for k in reversed(range(len(self.axes))):
            if k != j:
                dens = integrate.trapezoid(dens, self.axes[k], axis=k)
        return self.axes[j], dens

    def moments(self, j: int = 0) -> Tuple[float, float]:
        """Mean and variance of x_j."""
        x, dens = self.axis_marginal(j)
        mean = float(integrate.trapezoid(x * dens, x) / self.mass)
        var = float(integrate.trapezoid((x - mean) ** 2 * dens, x) / self.mass)
        return mean, var

    def to_rows(self) -> List[List[float]]:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return [list(p) + [float(v)] for p, v in zip(zip(*[m.ravel() for m in mesh]), self.density.ravel())]


def position_marginal(
    psi: np.ndarray,
    basis: HermiteBasisSpec,
    x_grid: Optional[Sequence[float]] = None,
    tol: float = MASS_TOLERANCE,
) -> PositionMarginal:
    """
    Position density |ψ(x)|² with Ψ_k(x) = ℏ^{−d/4} Π h_{k_j}(x_j/√ℏ).

    Args:
        psi: State
        basis: Hermite basis
        x_grid: Grid per axis (scaled to the basis when omitted)
        tol: Accepted deviation of the total mass from ‖ψ‖²

    Returns:
        PositionMarginal
    """
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (basis.dim,):
        raise ValidationError(f"State of shape {psi.shape} does not match basis dimension {basis.dim}")
    hbar = basis.hbar
    if x_grid is None:
        extent = math.sqrt(2 * basis.nmax) + 6.0
        n = int(math.ceil(extent / POSITION_SPACING))
        x = math.sqrt(hbar) * POSITION_SPACING * np.arange(-n, n + 1)
    else:
        x = np.asarray(x_grid, dtype=float)
    h = hermite_functions(basis.nmax, x / math.sqrt(hbar)) * hbar ** -0.25
    amp = psi.reshape(basis.shape)
    for _ in range(basis.d):
        amp = np.tensordot(amp, h, axes=([0], [0]))
    density = np.abs(amp) ** 2
    axes = [x] * basis.d
    mass = density
    for k in reversed(range(basis.d)):
        mass = integrate.trapezoid(mass, x, axis=k)
    mass = float(mass)
    expected = float(np.vdot(psi, psi).real)
    if abs(mass - expected) > tol:
        raise NumericalToleranceError(f"Position grid too coarse: mass {mass:.8f} vs {expected:.8f}")
    return PositionMarginal(axes=axes, density=density, mass=mass)


def marginal_wasserstein(marginal: PositionMarginal, cloud: EmpiricalMeasure, axis: int = 0) -> float:
    """1-Wasserstein distance between the x_axis marginals of |ψ|² and the Husimi cloud."""
    x, dens = marginal.axis_marginal(axis)
    weights = np.clip(dens, 0.0, None)
    values, cw = cloud.marginal(axis)
    return float(stats.wasserstein_distance(x, values, u_weights=weights, v_weights=cw))


def bracket_defect(psi: np.ndarray, Vavg: WeylSymbol, a: WeylSymbol, basis: HermiteBasisSpec) -> float:
    """|⟨ψ, Op({⟨V⟩, a})ψ⟩|."""
    return abs(wigner_pairing(psi, poisson(Vavg, a), basis))


def pairing_table(
    psi: np.ndarray, basis: HermiteBasisSpec, observables: Dict[str, WeylSymbol], cloud: Optional[EmpiricalMeasure] = None
) -> Dict[str, Dict[str, float]]:
    """Exact Weyl pairings next to Husimi-cloud expectations."""
    cloud = cloud or husimi_cloud(psi, basis)
    return {
        name: {"weyl": wigner_pairing(psi, a, basis), "husimi": cloud.expectation(a)}
        for name, a in observables.items()
    }


def default_observables(d: int, degree: int = 4) -> Dict[str, WeylSymbol]:
    """Monomials x^p ξ^q of total degree 1..degree, named like 'x1^2*xi2'."""
    out: Dict[str, WeylSymbol] = {}
    for total in range(1, degree + 1):
        for exps in itertools.product(range(total + 1), repeat=2 * d):
            if sum(exps) != total:
                continue
            px, pxi = tuple(exps[:d]), tuple(exps[d:])
            parts = [f"x{j + 1}^{p}" if p > 1 else f"x{j + 1}" for j, p in enumerate(px) if p] + [
                f"xi{j + 1}^{p}" if p > 1 else f"xi{j + 1}" for j, p in enumerate(pxi) if p
            ]
            out["*".join(parts)] = WeylSymbol.from_polynomial(d, {(px, pxi): 1.0})
    return out
