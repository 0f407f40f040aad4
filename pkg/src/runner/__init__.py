# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Runner layer: experiment sweeps, SQLite persistence, reports and the CLI.
"""

from .store import SQLiteClient, RunStore, compress_payload, decompress_payload
from .cache import MatrixCache, cached_quantize
from .experiment import (
    ExperimentConfig,
    Cell,
    CellResult,
    RunRecord,
    build_operators,
    run_normal_form,
    run_cell,
    run,
)
from .report import Report, REPORT_KINDS, report, loglog_slope

__all__ = [
    "SQLiteClient",
    "RunStore",
    "compress_payload",
    "decompress_payload",
    "MatrixCache",
    "cached_quantize",
    "ExperimentConfig",
    "Cell",
    "CellResult",
    "RunRecord",
    "build_operators",
    "run_normal_form",
    "run_cell",
    "run",
    "Report",
    "REPORT_KINDS",
    "report",
    "loglog_slope",
]
