# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Sweep orchestration over (ℏ, α, T) grids.

Each cell is a pure function of the experiment config: it builds the
basis, quantizes P̂ = Ĥ + ℏ^α V̂, computes the windowed spectrum, cluster
report, normal-form residual, a synthesized quasimode and its invariance
defects. Cells run on a bounded thread pool; the main thread is the only
writer to the run store.
"""

import json
import logging
import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import scipy
import sympy

from ..classical.frequency import FrequencySpec, resonance_module
from ..classical.phase_point import PhasePoint
from ..classical.symbols import WeylSymbol, average
from ..core.config import Config
from ..core.errors import (
    EXIT_OK,
    ClusterAmbiguityError,
    ValidationError,
    exit_code_for,
)
from ..core.schema import hash_document, load_document, require_fields
from ..quantum.normal_form import NormalFormResult, normal_form_iterate
from ..quantum.quantization import (
    HermiteBasisSpec,
    OperatorMatrix,
    cluster_spectrum,
    hamiltonian_matrix,
    spectrum,
)
from ..quasimodes.measures import default_observables, invariance_test
from ..quasimodes.synthesis import BumpFunction, synthesize
from .cache import MatrixCache, cached_quantize
from .store import RunStore

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_HALF_WIDTH = 0.1
DEFAULT_T_GRID = (0.0, math.pi / 2, math.pi)
DEFAULT_S_GRID = (0.0, 0.5, 1.0)
# Coherent-state spread above H(z0), in units of sqrt(ℏ H(z0))
ENERGY_SPREAD = 6.0


def _resolve(value: Union[str, Dict[str, Any]], base_dir: Optional[Path]) -> Dict[str, Any]:
    """Inline document, or a path relative to the config file."""
    if isinstance(value, str):
        path = Path(value).expanduser()
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        return load_document(path)
    if isinstance(value, dict):
        return value
    raise ValidationError(f"Expected an inline object or a file path, got {type(value).__name__}")


def _float_list(data: Dict[str, Any], key: str) -> List[float]:
    values = data.get(key)
    if not isinstance(values, list) or not values:
        raise ValidationError(f"Sweep list '{key}' must be a nonempty list")
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError) as e:
        raise ValidationError(f"Sweep list '{key}' contains a non-number: {e}") from e


@dataclass
class ExperimentConfig:
    """
    Parsed experiment document.

    Features:
    - frequency spec and perturbation symbol inline or as relative file paths
    - nonempty sweep lists for hbar, eps_exponent and T
    - basis feasibility checked for every hbar at load time
    - config hash over the resolved document
    """
    frequency: FrequencySpec
    V: WeylSymbol
    z0: PhasePoint
    hbar: List[float]
    eps_exponent: List[float]
    T: List[float]
    window: Tuple[float, float]
    observables: Dict[str, WeylSymbol]
    nf_order: int = 1
    seed: int = 0
    jitter: float = 0.0
    t_grid: Tuple[float, ...] = DEFAULT_T_GRID
    s_grid: Tuple[float, ...] = DEFAULT_S_GRID
    max_dim: int = 4000
    band_margin: float = 3.0
    output_dir: Optional[str] = None
    document: Dict[str, Any] = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.frequency.d

    @property
    def config_hash(self) -> str:
        return hash_document(self.document)

    @property
    def degree(self) -> int:
        return max(2, self.V.max_degree)

    @classmethod
    def from_file(cls, path: Union[str, Path], settings: Optional[Config] = None) -> "ExperimentConfig":
        path = Path(path).expanduser()
        return cls.from_dict(load_document(path), base_dir=path.parent, settings=settings)

    @classmethod
    def from_dict(
        cls,
        data: Dict[str, Any],
        base_dir: Optional[Path] = None,
        settings: Optional[Config] = None,
    ) -> "ExperimentConfig":
        """
        Build and validate an experiment.

        Args:
            data: Experiment document
            base_dir: Directory that relative file references resolve against
            settings: Global configuration supplying basis limits

        Returns:
            ExperimentConfig
        """
        require_fields(data, ("frequency", "V", "z0", "hbar", "eps_exponent", "T"), "experiment")
        settings = settings or Config()
        frequency_doc = _resolve(data["frequency"], base_dir)
        v_doc = _resolve(data["V"], base_dir)
        spec = FrequencySpec.from_dict(frequency_doc)
        V = WeylSymbol.from_dict(v_doc, d=spec.d)
        if not V.is_real():
            raise ValidationError("Perturbation symbol must be real")
        z0 = PhasePoint.from_dict(data["z0"])
        if z0.d != spec.d:
            raise ValidationError(f"z0 has dimension {z0.d}, frequency spec has {spec.d}")

        hbars = _float_list(data, "hbar")
        alphas = _float_list(data, "eps_exponent")
        Ts = _float_list(data, "T")
        if min(hbars) <= 0 or min(Ts) <= 0 or min(alphas) < 0:
            raise ValidationError("hbar and T must be positive and eps_exponent nonnegative")

        E0 = float(np.dot(spec.omega, z0.actions))
        window = data.get("window") or [E0 - DEFAULT_WINDOW_HALF_WIDTH, E0 + DEFAULT_WINDOW_HALF_WIDTH]
        if len(window) != 2 or float(window[0]) > float(window[1]):
            raise ValidationError(f"Invalid window {window}")

        observables = {
            name: WeylSymbol.from_dict(_resolve(doc, base_dir), d=spec.d)
            for name, doc in sorted((data.get("observables") or {}).items())
        } or default_observables(spec.d, degree=2)

        resolved = dict(data)
        resolved["frequency"] = frequency_doc
        resolved["V"] = v_doc
        config = cls(
            frequency=spec,
            V=V,
            z0=z0,
            hbar=hbars,
            eps_exponent=alphas,
            T=Ts,
            window=(float(window[0]), float(window[1])),
            observables=observables,
            nf_order=int(data.get("nf_order", 1)),
            seed=int(data.get("seed", 0)),
            jitter=float(data.get("jitter", 0.0)),
            t_grid=tuple(float(t) for t in data.get("t_grid", DEFAULT_T_GRID)),
            s_grid=tuple(float(s) for s in data.get("s_grid", DEFAULT_S_GRID)),
            max_dim=int(data.get("max_dim", settings.basis.max_dim)),
            band_margin=float(data.get("band_margin", settings.basis.band_margin)),
            output_dir=data.get("output_dir"),
            document=resolved,
        )
        for hbar in hbars:
            config.basis_for(hbar)
            config.normal_form_basis(hbar)
        return config

    def basis_for(self, hbar: float) -> HermiteBasisSpec:
        """Smallest basis covering the window and the torus through z0."""
        E0 = float(np.dot(self.frequency.omega, self.z0.actions))
        top = max(self.window[1], E0 + ENERGY_SPREAD * math.sqrt(hbar * max(E0, hbar)) * max(self.frequency.omega))
        return HermiteBasisSpec.for_window(
            self.d, hbar, self.frequency.omega, top,
            degree=self.degree, band_margin=self.band_margin, max_dim=self.max_dim,
        )

    def normal_form_basis(self, hbar: float) -> HermiteBasisSpec:
        """
        Basis for the normal form: the cell basis, enlarged when the window
        does not fit in the reliable band of the degree-2·deg(V) residual.
        """
        base = self.basis_for(hbar)
        nf = HermiteBasisSpec.for_window(
            self.d, hbar, self.frequency.omega, self.window[1],
            degree=2 * self.degree, band_margin=self.band_margin, max_dim=self.max_dim,
        )
        return nf if nf.nmax > base.nmax else base

    def cells(self) -> List["Cell"]:
        """Cartesian product of the sweep lists, sorted by key."""
        cells = [
            Cell(hbar=h, eps_exponent=a, T=t)
            for h in self.hbar for a in self.eps_exponent for t in self.T
        ]
        return sorted(cells, key=lambda c: c.key)


@dataclass(frozen=True)
class Cell:
    hbar: float
    eps_exponent: float
    T: float

    @property
    def eps(self) -> float:
        return self.hbar ** self.eps_exponent

    @property
    def key(self) -> str:
        return f"h={self.hbar:.6e}|a={self.eps_exponent:.6e}|T={self.T:.6e}"


@dataclass
class CellResult:
    """Outcome of one sweep cell; payload holds numbers only."""
    cell: Cell
    status: str
    payload: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None
    exit_code: int = EXIT_OK
    elapsed_s: float = 0.0
    state: Optional[np.ndarray] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_row_dict(self) -> Dict[str, Any]:
        return {
            "key": self.cell.key,
            "hbar": self.cell.hbar,
            "eps_exponent": self.cell.eps_exponent,
            "T": self.cell.T,
            "status": self.status,
            "error": self.error,
            "exit_code": self.exit_code,
            "elapsed_s": self.elapsed_s,
            "payload": self.payload,
        }


@dataclass
class RunRecord:
    """
    All cell outcomes of a run.

    to_dict() excludes timings so reruns of the same config and seed
    serialize identically.
    """
    run_id: str
    config_hash: str
    seed: int
    versions: Dict[str, str]
    cells: List[CellResult]
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def failed(self) -> List[CellResult]:
        return [c for c in self.cells if not c.ok]

    @property
    def exit_code(self) -> int:
        return max((c.exit_code for c in self.cells), default=EXIT_OK)

    @property
    def status(self) -> str:
        return "failed" if self.failed else "ok"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "run_id": self.run_id,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "status": self.status,
            "exit_code": self.exit_code,
            "cells": [
                {
                    "key": c.cell.key,
                    "hbar": c.cell.hbar,
                    "eps_exponent": c.cell.eps_exponent,
                    "T": c.cell.T,
                    "status": c.status,
                    "error": c.error,
                    "payload": c.payload,
                }
                for c in sorted(self.cells, key=lambda c: c.cell.key)
            ],
        }

    def write(self, output_dir: Union[str, Path]) -> Path:
        """Write record.json and one .npz per synthesized state."""
        out = Path(output_dir).expanduser() / self.run_id
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "record.json", "w") as f:
            json.dump(self.to_dict(), f, sort_keys=True, indent=2)
        for c in self.cells:
            if c.state is not None:
                header = json.dumps({"key": c.cell.key, "basis": c.payload.get("basis")}, sort_keys=True)
                name = f"state_{hash_document(c.cell.key, truncate=12)}.npz"
                np.savez(out / name, state=c.state, header=np.array(header))
        logger.info(f"Wrote run record to {out}")
        return out

    @classmethod
    def from_stored(cls, data: Dict[str, Any]) -> "RunRecord":
        """Rebuild a record from RunStore.load_run output."""
        cells = [
            CellResult(
                cell=Cell(hbar=c["hbar"], eps_exponent=c["eps_exponent"], T=c["T"]),
                status=c["status"],
                payload=c["payload"],
                error=c.get("error"),
                exit_code=c.get("exit_code") or EXIT_OK,
                elapsed_s=c.get("elapsed_s") or 0.0,
            )
            for c in data["cells"]
        ]
        return cls(
            run_id=data["run_id"],
            config_hash=data["config_hash"],
            seed=int(data["config"].get("seed", 0)),
            versions=data.get("versions", {}),
            cells=cells,
        )


def library_versions() -> Dict[str, str]:
    return {
        "numpy": np.__version__,
        "python": platform.python_version(),
        "scipy": scipy.__version__,
        "sympy": sympy.__version__,
    }


def _grids(config: ExperimentConfig, index: int) -> Tuple[np.ndarray, np.ndarray]:
    """Invariance grids, jittered from the seed when jitter > 0."""
    t_grid = np.asarray(config.t_grid, dtype=float)
    s_grid = np.asarray(config.s_grid, dtype=float)
    if config.jitter > 0:
        rng = np.random.default_rng([config.seed, index])
        t_grid = t_grid + config.jitter * rng.uniform(-1.0, 1.0, t_grid.shape)
        s_grid = np.abs(s_grid + config.jitter * rng.uniform(-1.0, 1.0, s_grid.shape))
    return t_grid, s_grid


def build_operators(
    config: ExperimentConfig, basis: HermiteBasisSpec, eps: float, cache: Optional[MatrixCache] = None
) -> Tuple[OperatorMatrix, OperatorMatrix, OperatorMatrix]:
    """(Ĥ, V̂, P̂ = Ĥ + εV̂) in a basis."""
    H = hamiltonian_matrix(basis)
    V = cached_quantize(config.V, basis, cache)
    P = OperatorMatrix(basis, H.entries + eps * V.entries, "P", config.degree)
    return H, V, P


def run_normal_form(
    config: ExperimentConfig,
    hbar: float,
    eps: float,
    order: int,
    operators: Tuple[OperatorMatrix, OperatorMatrix, OperatorMatrix],
    cache: Optional[MatrixCache] = None,
) -> NormalFormResult:
    """
    Normal form of P̂ in the normal-form basis.

    The cell operators are reused when the cell basis already carries the
    degree-2·deg(V) band up to the window top.
    """
    H, V, P = operators
    nf_basis = config.normal_form_basis(hbar)
    if nf_basis != P.basis:
        logger.debug(f"Normal form basis nmax={nf_basis.nmax} (cell basis nmax={P.basis.nmax})")
        H, V, P = build_operators(config, nf_basis, eps, cache)
    return normal_form_iterate(P, resonance_module(config.frequency), eps, order, V=V, H=H)


def run_cell(
    config: ExperimentConfig,
    cell: Cell,
    cache: Optional[MatrixCache] = None,
    settings: Optional[Config] = None,
    index: int = 0,
) -> CellResult:
    """
    Execute one sweep cell.

    Args:
        config: Experiment
        cell: (ℏ, α, T) triple
        cache: Matrix cache
        settings: Global configuration
        index: Position of the cell in sorted order (seeds grid jitter)

    Returns:
        CellResult with spectrum, clusters, normal form, quasimode and invariance payloads
    """
    settings = settings or Config()
    started = time.perf_counter()
    hbar, eps = cell.hbar, cell.eps
    spec = config.frequency
    basis = config.basis_for(hbar)
    rm = resonance_module(spec)

    H, Vq, P = build_operators(config, basis, eps, cache)

    pairs = spectrum(P, config.window)
    payload: Dict[str, Any] = {
        "basis": basis.to_dict(),
        "eps": eps,
        "spectrum": pairs.values.tolist(),
        "spectrum_residual": pairs.residual,
    }

    try:
        payload["clusters"] = cluster_spectrum(P, H, eps, config.window).to_dict()
        payload["clusters"]["ambiguous"] = False
    except ClusterAmbiguityError as e:
        payload["clusters"] = {"ambiguous": True, "reason": str(e), "eps": eps, "window": list(config.window)}

    if eps > 0:
        nf = run_normal_form(config, hbar, eps, config.nf_order, (H, Vq, P), cache)
        payload["normal_form"] = {**nf.to_dict(), "basis": nf.H.basis.to_dict()}

    flow = settings.flow
    quad = settings.quadrature
    q = synthesize(
        config.z0, cell.T, BumpFunction(), config.V, eps, basis, spec,
        rm=rm, P=P, config=flow,
        grid_change=settings.tolerances.grid_change,
        max_doublings=quad.max_doublings,
        resolution_factor=int(quad.resolution_factor),
        ehrenfest_epsilon=settings.propagation.ehrenfest_epsilon,
    )
    payload["quasimode"] = q.to_dict()

    t_grid, s_grid = _grids(config, index)
    report = invariance_test(q.state, basis, config.observables, average(config.V, rm), t_grid, s_grid, config=flow)
    payload["invariance"] = report.to_dict()

    elapsed = time.perf_counter() - started
    logger.info(f"Cell {cell.key} done in {elapsed:.2f}s (width {q.width:.3e})")
    return CellResult(cell=cell, status="ok", payload=payload, elapsed_s=elapsed, state=q.state)


def _isolated(
    config: ExperimentConfig, cell: Cell, cache: Optional[MatrixCache], settings: Config, index: int
) -> CellResult:
    started = time.perf_counter()
    try:
        return run_cell(config, cell, cache, settings, index)
    except Exception as e:
        logger.error(f"Cell {cell.key} failed: {type(e).__name__}: {e}")
        return CellResult(
            cell=cell,
            status="failed",
            error=f"{type(e).__name__}: {e}",
            exit_code=exit_code_for(e),
            elapsed_s=time.perf_counter() - started,
        )


def run(
    config: ExperimentConfig,
    store: Optional[RunStore] = None,
    cache: Optional[MatrixCache] = None,
    max_workers: Optional[int] = None,
    settings: Optional[Config] = None,
    output_dir: Optional[Union[str, Path]] = None,
) -> RunRecord:
    """
    Run every cell of a sweep.

    Args:
        config: Experiment
        store: Run store (cells are persisted as they finish)
        cache: Matrix cache
        max_workers: Worker pool size (runner.max_workers when omitted)
        settings: Global configuration
        output_dir: Directory for record.json and state files

    Returns:
        RunRecord sorted by cell key
    """
    settings = settings or Config()
    workers = max(1, max_workers or settings.runner.max_workers)
    cells = config.cells()
    run_id = f"{config.config_hash}-s{config.seed}"
    versions = library_versions()
    logger.info(f"Starting run {run_id}: {len(cells)} cells on {workers} workers")

    if store is not None:
        store.start_run(run_id, config.config_hash, config.document, versions)

    started = time.perf_counter()
    results: List[CellResult] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {
            pool.submit(_isolated, config, cell, cache, settings, i): cell for i, cell in enumerate(cells)
        }
        for future in as_completed(futures):
            result = future.result()
            results.append(result)
            if store is not None:
                store.write_cells(run_id, [result.to_row_dict()])

    results.sort(key=lambda r: r.cell.key)
    record = RunRecord(
        run_id=run_id,
        config_hash=config.config_hash,
        seed=config.seed,
        versions=versions,
        cells=results,
        timings={"total_s": time.perf_counter() - started, **{r.cell.key: r.elapsed_s for r in results}},
    )
    if store is not None:
        store.finish_run(run_id, record.status, record.exit_code)
    target = output_dir or config.output_dir
    if target:
        record.write(target)
    logger.info(f"Run {run_id} finished: {len(results) - len(record.failed)}/{len(results)} cells ok")
    return record
