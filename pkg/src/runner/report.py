# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Plot-ready tables from run records.

Reports are flat rows plus fitted summaries, written as CSV (rows) and
JSON (rows and fits).
"""

import csv
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from ..core.errors import ValidationError
from .experiment import RunRecord

logger = logging.getLogger(__name__)

REPORT_KINDS = ("width-scaling", "cluster", "invariance")

# Accepted spread of width·T over a T sweep
WIDTH_T_FACTOR = 2.0


@dataclass
class Report:
    kind: str
    columns: List[str]
    rows: List[List[Any]]
    fits: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "columns": self.columns, "rows": self.rows, "fits": self.fits}

    def write(self, output_dir: Union[str, Path]) -> Tuple[Path, Path]:
        """Write <kind>.csv and <kind>.json."""
        out = Path(output_dir).expanduser()
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{self.kind}.csv"
        with open(csv_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(self.columns)
            writer.writerows(self.rows)
        json_path = out / f"{self.kind}.json"
        with open(json_path, "w") as f:
            json.dump(self.to_dict(), f, sort_keys=True, indent=2)
        logger.info(f"Wrote {self.kind} report ({len(self.rows)} rows) to {out}")
        return csv_path, json_path


def loglog_slope(x: List[float], y: List[float]) -> float:
    """Least-squares slope of log y against log x."""
    if len(x) < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)), 1)
    return float(slope)


def _ok_cells(record: RunRecord, section: str) -> List[Any]:
    cells = [c for c in record.cells if c.ok and section in c.payload]
    if not cells:
        raise ValidationError(f"Run {record.run_id} has no completed cells with '{section}' results")
    return cells


def width_scaling_report(record: RunRecord) -> Report:
    """
    Quasimode widths against ℏ and T.

    Fits the log-log slope of width over ℏ for every (α, T) group and the
    spread of width·T over T for every (ℏ, α) group.
    """
    cells = _ok_cells(record, "quasimode")
    columns = ["hbar", "eps_exponent", "eps", "T", "width", "width_T", "eps_hbar", "eigenvalue", "pre_norm"]
    rows = []
    by_hbar: Dict[Tuple[float, float], List[Tuple[float, float]]] = defaultdict(list)
    by_T: Dict[Tuple[float, float], List[Tuple[float, float]]] = defaultdict(list)
    for c in cells:
        q = c.payload["quasimode"]
        eps = c.payload["eps"]
        rows.append([
            c.cell.hbar, c.cell.eps_exponent, eps, c.cell.T, q["width"], q["width"] * c.cell.T,
            eps * c.cell.hbar, q["eigenvalue"], q["pre_norm"],
        ])
        by_hbar[(c.cell.eps_exponent, c.cell.T)].append((c.cell.hbar, q["width"]))
        by_T[(c.cell.hbar, c.cell.eps_exponent)].append((c.cell.T, q["width"]))

    fits = []
    for (alpha, T), points in sorted(by_hbar.items()):
        if len(points) < 2:
            continue
        points.sort()
        hbars, widths = [p[0] for p in points], [p[1] for p in points]
        positive = all(w > 0 for w in widths)
        fits.append({
            "fit": "width_vs_hbar",
            "eps_exponent": alpha,
            "T": T,
            "slope": loglog_slope(hbars, widths) if positive else math.nan,
            "expected_slope": alpha + 1.0,
            "points": len(points),
        })
    for (hbar, alpha), points in sorted(by_T.items()):
        if len(points) < 2:
            continue
        products = [T * w for T, w in sorted(points)]
        spread = max(products) / min(products) if min(products) > 0 else math.inf
        fits.append({
            "fit": "width_T_vs_T",
            "hbar": hbar,
            "eps_exponent": alpha,
            "spread": spread,
            "within_factor": spread <= WIDTH_T_FACTOR,
            "points": len(points),
        })
    return Report("width-scaling", columns, rows, fits)


def cluster_report(record: RunRecord) -> Report:
    """One row per cell; ambiguous cells are flagged with the reason."""
    cells = _ok_cells(record, "clusters")
    columns = ["hbar", "eps_exponent", "eps", "ambiguous", "n_clusters", "min_gap", "max_width", "width_bound", "reason"]
    rows = []
    for c in cells:
        cl = c.payload["clusters"]
        if cl.get("ambiguous"):
            rows.append([c.cell.hbar, c.cell.eps_exponent, cl["eps"], True, 0, "", "", "", cl.get("reason", "")])
        else:
            rows.append([
                c.cell.hbar, c.cell.eps_exponent, cl["eps"], False, len(cl["clusters"]),
                cl["min_gap"], cl["max_width"], cl["width_bound"], "",
            ])
    fits = [{"ambiguous_cells": sum(1 for r in rows if r[3]), "cells": len(rows)}]
    return Report("cluster", columns, rows, fits)


def invariance_report(record: RunRecord) -> Report:
    """Defect matrix over the (t, s) grid, one row per cell, observable and grid node."""
    cells = _ok_cells(record, "invariance")
    columns = ["hbar", "eps_exponent", "T", "observable", "t", "s", "defect"]
    rows = []
    fits = []
    for c in cells:
        inv = c.payload["invariance"]
        for name in sorted(inv["defects"]):
            matrix = inv["defects"][name]
            for i, t in enumerate(inv["t_grid"]):
                for j, s in enumerate(inv["s_grid"]):
                    rows.append([c.cell.hbar, c.cell.eps_exponent, c.cell.T, name, t, s, matrix[i][j]])
        fits.append({
            "hbar": c.cell.hbar,
            "eps_exponent": c.cell.eps_exponent,
            "T": c.cell.T,
            "method": inv["method"],
            "max_defect": inv["max_defect"],
        })
    return Report("invariance", columns, rows, fits)


def report(record: RunRecord, kind: str) -> Report:
    """
    Build a report of the given kind.

    Args:
        record: Completed run record
        kind: One of width-scaling, cluster, invariance

    Returns:
        Report
    """
    builders = {
        "width-scaling": width_scaling_report,
        "cluster": cluster_report,
        "invariance": invariance_report,
    }
    if kind not in builders:
        raise ValidationError(f"Unknown report kind '{kind}', expected one of {', '.join(REPORT_KINDS)}")
    return builders[kind](record)
