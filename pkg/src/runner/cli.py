# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Command-line interface.

Every subcommand reads an experiment document (--config) and prints a JSON
result. Single-shot subcommands use the first value of each sweep list
unless --hbar, --eps-exponent or --T override it.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from ..classical.flow import detect_tangent_flow, ehrenfest_time, orbit, theta_growth
from ..classical.frequency import denominator_profile, reduced_hamiltonians, resonance_module
from ..classical.symbols import WeylSymbol, average, second_order_symbol
from ..core.config import Config
from ..core.errors import EXIT_OK, exit_code_for
from ..quantum.quantization import (
    OperatorMatrix,
    cluster_spectrum,
    spectrum,
    wigner_pairing,
)
from ..quasimodes.measures import (
    bracket_defect,
    husimi_cloud,
    invariance_test,
    localization_test,
    single_torus_mass,
)
from ..quasimodes.synthesis import BumpFunction, synthesize
from .cache import MatrixCache
from .experiment import Cell, ExperimentConfig, RunRecord, build_operators, run, run_normal_form
from .report import REPORT_KINDS, report
from .store import RunStore

logger = logging.getLogger(__name__)

THEOREMS = ("invariance", "localization", "bi-invariance")

# Tube radius for localization checks, in units of sqrt(hbar)
TUBE_RADIUS_FACTOR = 4.0


def setup_logging(level: str = "INFO", fmt: Optional[str] = None) -> None:
    """Configure root logging on stderr."""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=fmt or "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        stream=sys.stderr,
    )


class Session:
    """Loaded experiment plus the operators of one (ℏ, α, T) cell."""

    def __init__(self, args: argparse.Namespace, settings: Config):
        self.settings = settings
        self.config = ExperimentConfig.from_file(args.config, settings)
        hbar = args.hbar if args.hbar is not None else self.config.hbar[0]
        alpha = args.eps_exponent if args.eps_exponent is not None else self.config.eps_exponent[0]
        T = args.T if args.T is not None else self.config.T[0]
        self.cell = Cell(hbar=hbar, eps_exponent=alpha, T=T)
        self.spec = self.config.frequency
        self.rm = resonance_module(self.spec)
        self.cache = MatrixCache.from_env(settings.runner.cache_path)
        self._basis = None

    @property
    def eps(self) -> float:
        return self.cell.eps

    @property
    def basis(self):
        if self._basis is None:
            self._basis = self.config.basis_for(self.cell.hbar)
        return self._basis

    def operators(self):
        """(Ĥ, V̂, P̂) in the cell basis."""
        return build_operators(self.config, self.basis, self.eps, self.cache)

    def header(self) -> Dict[str, Any]:
        return {"hbar": self.cell.hbar, "eps_exponent": self.cell.eps_exponent, "eps": self.eps, "T": self.cell.T}


def cmd_spectrum(session: Session, args: argparse.Namespace) -> Dict[str, Any]:
    _, _, P = session.operators()
    pairs = spectrum(P, session.config.window)
    return {**session.header(), "window": list(session.config.window), "eigenvalues": pairs.values.tolist(),
            "residual": pairs.residual, "basis": session.basis.to_dict()}


def cmd_average(session: Session, args: argparse.Namespace) -> Dict[str, Any]:
    Vavg = average(session.config.V, session.rm)
    out = {
        "resonance_module": [list(k) for k in session.rm.lattice_basis],
        "average": Vavg.to_dict(),
        "denominators": denominator_profile(session.spec, args.shells).to_dict(),
    }
    if args.second_order:
        out["second_order"] = second_order_symbol(session.config.V, session.spec, session.rm).to_dict()
    return out


def cmd_nf(session: Session, args: argparse.Namespace) -> Dict[str, Any]:
    result = run_normal_form(
        session.config, session.cell.hbar, session.eps, args.order, session.operators(), session.cache
    )
    return {**session.header(), **result.to_dict(), "basis": result.H.basis.to_dict()}


def cmd_flow(session: Session, args: argparse.Namespace) -> Dict[str, Any]:
    flow = session.settings.flow
    z0 = session.config.z0
    Vavg = average(session.config.V, session.rm)
    times = np.linspace(0.0, session.cell.T, args.samples)
    points = orbit(z0, times, Vavg, flow)
    reduced = reduced_hamiltonians(session.spec, z0.actions)
    return {
        **session.header(),
        "times": times.tolist(),
        "orbit": points.tolist(),
        "theta": theta_growth(z0, session.cell.T, Vavg, session.spec.omega, config=flow),
        "ehrenfest_time": ehrenfest_time(
            z0, Vavg, session.spec.omega, session.cell.hbar, session.settings.propagation.ehrenfest_epsilon, config=flow
        ),
        "tangent": detect_tangent_flow(z0, Vavg, reduced, session.settings.tolerances.tangency, flow),
    }


def _synthesize(session: Session, P: OperatorMatrix):
    quad = session.settings.quadrature
    return synthesize(
        session.config.z0, session.cell.T, BumpFunction(), session.config.V, session.eps, session.basis, session.spec,
        rm=session.rm, P=P, config=session.settings.flow,
        grid_change=session.settings.tolerances.grid_change,
        max_doublings=quad.max_doublings,
        resolution_factor=int(quad.resolution_factor),
        ehrenfest_epsilon=session.settings.propagation.ehrenfest_epsilon,
    )


def cmd_quasimode(session: Session, args: argparse.Namespace) -> Dict[str, Any]:
    _, _, P = session.operators()
    q = _synthesize(session, P)
    scale = session.eps * session.cell.hbar
    bracket = {"eps_hbar/4": scale / 4, "eps_hbar": scale, "4*eps_hbar": 4 * scale}
    out = {
        **session.header(),
        **q.to_dict(),
        "admitted_widths": {name: q.width <= r for name, r in bracket.items()},
    }
    if args.output:
        path = Path(args.output).expanduser()
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, state=q.state, header=np.array(json.dumps(q.to_dict(), sort_keys=True)))
        logger.info(f"Saved quasimode state to {path}")
    return out


def cmd_clusters(session: Session, args: argparse.Namespace) -> Dict[str, Any]:
    H, _, P = session.operators()
    return {**session.header(), **cluster_spectrum(P, H, session.eps, session.config.window).to_dict()}


def cmd_verify(session: Session, args: argparse.Namespace) -> Dict[str, Any]:
    """Theorem-level checks on the exact eigenfunctions of P̂ in the window."""
    _, _, P = session.operators()
    basis = session.basis
    Vavg = average(session.config.V, session.rm)
    pairs = spectrum(P, session.config.window)
    results: List[Dict[str, Any]] = []
    output = Path(args.output).expanduser() if args.output else None

    for i, lam in enumerate(pairs.values):
        psi = pairs.vectors[:, i]
        entry: Dict[str, Any] = {"eigenvalue": float(lam)}
        if args.theorem == "invariance":
            harmonic = invariance_test(psi, basis, session.config.observables, Vavg, session.config.t_grid, [0.0],
                                     config=session.settings.flow)
            entry["harmonic_defect"] = harmonic.max_defect
            entry["bracket_defects"] = {
                name: bracket_defect(psi, Vavg, a, basis) for name, a in session.config.observables.items()
            }
        elif args.theorem == "bi-invariance":
            t_grid = np.linspace(0.0, 2 * math.pi, args.samples)
            s_grid = np.linspace(0.0, 2.0, args.samples)
            entry.update(invariance_test(psi, basis, session.config.observables, Vavg, t_grid, s_grid,
                                         config=session.settings.flow).to_dict())
        else:
            r = TUBE_RADIUS_FACTOR * math.sqrt(basis.hbar)
            cloud = husimi_cloud(psi, basis, grid_points=session.settings.quadrature.husimi_points)
            H_symbol = WeylSymbol.harmonic_hamiltonian(basis.omega)
            levels = {
                "H": (H_symbol, float(lam)),
                "Vavg": (Vavg, wigner_pairing(psi, Vavg, basis)),
            }
            entry["outside_mass"] = localization_test(psi, basis, levels, r, cloud)
            E, mass = single_torus_mass(cloud, session.spec, basis, r)
            entry["torus"] = {"E": list(E), "mass": mass}
            if output is not None:
                output.mkdir(parents=True, exist_ok=True)
                cloud.to_csv(output / f"cloud_{i:03d}.csv")
        results.append(entry)
    return {**session.header(), "theorem": args.theorem, "eigenfunctions": results}


def cmd_report(settings: Config, args: argparse.Namespace) -> Dict[str, Any]:
    store = RunStore(args.store or str(Path(settings.runner.output_dir) / "runs.db"))
    record = RunRecord.from_stored(store.load_run(args.run_id))
    rep = report(record, args.kind)
    if args.output:
        rep.write(args.output)
    return rep.to_dict()


def cmd_run(settings: Config, args: argparse.Namespace) -> Dict[str, Any]:
    config = ExperimentConfig.from_file(args.config, settings)
    output_dir = args.output or config.output_dir or settings.runner.output_dir
    store = RunStore(args.store or str(Path(output_dir) / "runs.db"))
    cache = MatrixCache.from_env(settings.runner.cache_path)
    record = run(config, store=store, cache=cache, max_workers=args.workers, settings=settings, output_dir=output_dir)
    return {
        "run_id": record.run_id,
        "status": record.status,
        "exit_code": record.exit_code,
        "cells": len(record.cells),
        "failed": [c.cell.key for c in record.failed],
    }


SESSION_COMMANDS = {
    "spectrum": cmd_spectrum,
    "average": cmd_average,
    "nf": cmd_nf,
    "flow": cmd_flow,
    "quasimode": cmd_quasimode,
    "clusters": cmd_clusters,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oscilab", description="Perturbed harmonic oscillator laboratory")
    parser.add_argument('--log-level', default=None, help='Logging level (default from oscilab.yaml)')
    parser.add_argument('--config-dir', default=None, help='Directory holding oscilab.yaml')
    sub = parser.add_subparsers(dest="command", required=True)

    def cell_command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument('--config', required=True, help='Experiment JSON document')
        p.add_argument('--hbar', type=float, default=None, help='Override the first hbar of the sweep')
        p.add_argument('--eps-exponent', type=float, default=None, help='Override the first eps exponent')
        p.add_argument('--T', type=float, default=None, help='Override the first T')
        return p

    cell_command("spectrum", "Eigenvalues of P in the window")
    p = cell_command("average", "Resonant average of V and small denominators")
    p.add_argument('--shells', type=int, default=8, help='Largest |k|_1 shell for the denominator scan')
    p.add_argument('--second-order', action='store_true', help='Also print the second-order averaged symbol')
    p = cell_command("nf", "Quantum normal form residuals")
    p.add_argument('--order', type=int, default=1, help='Number of normal-form steps')
    p = cell_command("flow", "Averaged flow through z0")
    p.add_argument('--samples', type=int, default=33, help='Orbit samples on [0, T]')
    p = cell_command("quasimode", "Synthesize a quasimode on the orbit through z0")
    p.add_argument('--output', default=None, help='Write the state as .npz')
    cell_command("clusters", "Spectral clusters around the levels of H")
    p = cell_command("verify", "Invariance and localization checks on eigenfunctions")
    p.add_argument('--theorem', choices=THEOREMS, required=True, help='Which property to check')
    p.add_argument('--samples', type=int, default=9, help='Grid points per axis for bi-invariance')
    p.add_argument('--output', default=None, help='Directory for Husimi cloud CSVs')

    p = sub.add_parser("report", help="Tables from a stored run")
    p.add_argument('--run-id', required=True, help='Run identifier')
    p.add_argument('--kind', choices=REPORT_KINDS, required=True, help='Report kind')
    p.add_argument('--store', default=None, help='Run store database')
    p.add_argument('--output', default=None, help='Directory for CSV/JSON tables')

    p = sub.add_parser("run", help="Execute a full sweep")
    p.add_argument('--config', required=True, help='Experiment JSON document')
    p.add_argument('--workers', type=int, default=None, help='Worker threads (default from oscilab.yaml)')
    p.add_argument('--store', default=None, help='Run store database')
    p.add_argument('--output', default=None, help='Output directory')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    CLI entry point.

    Returns:
        0 on success, 2 on validation errors, 3 on numerical-tolerance failures
    """
    args = build_parser().parse_args(argv)
    settings = Config(Path(args.config_dir)) if args.config_dir else Config()
    setup_logging(args.log_level or settings.logging.level, settings.logging.format)

    try:
        if args.command in SESSION_COMMANDS:
            result = SESSION_COMMANDS[args.command](Session(args, settings), args)
            code = EXIT_OK
        elif args.command == "report":
            result = cmd_report(settings, args)
            code = EXIT_OK
        else:
            result = cmd_run(settings, args)
            code = result["exit_code"]
    except Exception as e:
        code = exit_code_for(e)
        logger.error(f"{args.command} failed: {type(e).__name__}: {e}")
        print(json.dumps({"error": type(e).__name__, "message": str(e), "exit_code": code}))
        return code

    print(json.dumps(result, sort_keys=True, indent=2, default=float))
    return code
