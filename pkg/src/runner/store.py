# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
SQLite persistence for sweep runs.

Run metadata and per-cell payloads live in a single WAL-mode database.
Payloads are canonical JSON compressed with zlib; the runner's main thread
is the only writer.
"""

import json
import sqlite3
import zlib
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Any, ContextManager, Dict, List, Optional, Tuple

from ..core.errors import PersistenceError
from ..core.schema import canonical_json

logger = logging.getLogger(__name__)

# Compression level for payload BLOBs
COMPRESSION_LEVEL = 6

SCHEMA_VERSION = 1

SCHEMA_SQL = """
CREATE TABLE IF NOT EXISTS schema_version (version INTEGER PRIMARY KEY);

CREATE TABLE IF NOT EXISTS runs (
    run_id TEXT PRIMARY KEY,
    config_hash TEXT NOT NULL,
    started_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
    finished_at TIMESTAMP,
    status TEXT NOT NULL DEFAULT 'running',
    exit_code INTEGER,
    config BLOB NOT NULL,
    versions TEXT
);

CREATE TABLE IF NOT EXISTS cells (
    run_id TEXT NOT NULL,
    cell_key TEXT NOT NULL,
    hbar REAL NOT NULL,
    eps_exponent REAL NOT NULL,
    T REAL NOT NULL,
    status TEXT NOT NULL,
    error TEXT,
    exit_code INTEGER,
    elapsed_s REAL,
    payload BLOB NOT NULL,
    PRIMARY KEY (run_id, cell_key),
    FOREIGN KEY (run_id) REFERENCES runs(run_id)
);

CREATE INDEX IF NOT EXISTS idx_cells_run ON cells(run_id);
"""

INSERT_CELL = """
INSERT OR REPLACE INTO cells (
    run_id, cell_key, hbar, eps_exponent, T, status, error, exit_code, elapsed_s, payload
) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
"""


class SQLiteClient:
    """
    SQLite connection manager.

    Features:
    - WAL mode for concurrent readers during a run
    - context-managed connections with rollback on error
    - sqlite3 failures re-raised as PersistenceError
    """

    def __init__(self, db_path: str):
        """
        Initialize SQLite client.

        Args:
            db_path: Path to SQLite database file
        """
        self.db_path = Path(db_path).expanduser()

    def initialize_database(self) -> None:
        """Create the parent directory and set persistent pragmas."""
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        try:
            conn = sqlite3.connect(str(self.db_path))
        except sqlite3.Error as e:
            raise PersistenceError(f"Failed to open database {self.db_path}: {e}") from e
        try:
            conn.execute("PRAGMA journal_mode=WAL")
            conn.execute("PRAGMA synchronous=NORMAL")
            conn.execute("PRAGMA foreign_keys=ON")
            conn.commit()
            logger.info(f"Initialized SQLite database at {self.db_path}")
        except sqlite3.Error as e:
            raise PersistenceError(f"Failed to initialize database: {e}") from e
        finally:
            conn.close()

    @contextmanager
    def get_connection(self) -> ContextManager[sqlite3.Connection]:
        """
        Get a database connection with context manager.

        Yields:
            sqlite3.Connection in WAL mode
        """
        try:
            conn = sqlite3.connect(str(self.db_path))
        except sqlite3.Error as e:
            raise PersistenceError(f"Failed to open database {self.db_path}: {e}") from e
        try:
            conn.execute("PRAGMA journal_mode=WAL")
            conn.execute("PRAGMA synchronous=NORMAL")
            yield conn
        except sqlite3.Error as e:
            conn.rollback()
            logger.error(f"Database error: {e}")
            raise PersistenceError(f"Database error: {e}") from e
        finally:
            conn.close()

    def execute(self, query: str, params: tuple = ()) -> None:
        with self.get_connection() as conn:
            conn.execute(query, params)
            conn.commit()

    def executemany(self, query: str, params: List[tuple]) -> None:
        with self.get_connection() as conn:
            conn.executemany(query, params)
            conn.commit()

    def execute_script(self, script: str) -> None:
        with self.get_connection() as conn:
            conn.executescript(script)
            conn.commit()

    def fetchall(self, query: str, params: tuple = ()) -> List[tuple]:
        with self.get_connection() as conn:
            return conn.execute(query, params).fetchall()

    def exists(self) -> bool:
        return self.db_path.exists()


def compress_payload(payload: Dict[str, Any]) -> bytes:
    """Canonical JSON, zlib level 6."""
    return zlib.compress(canonical_json(payload).encode("utf-8"), COMPRESSION_LEVEL)


def decompress_payload(blob: bytes) -> Dict[str, Any]:
    try:
        return json.loads(zlib.decompress(blob).decode("utf-8"))
    except (zlib.error, ValueError) as e:
        raise PersistenceError(f"Corrupt payload: {e}") from e


def create_schema(client: SQLiteClient) -> None:
    """Create the runs and cells tables and record the schema version."""
    client.execute_script(SCHEMA_SQL)
    rows = client.fetchall("SELECT version FROM schema_version")
    if not rows:
        client.execute("INSERT INTO schema_version (version) VALUES (?)", (SCHEMA_VERSION,))
        logger.info(f"Created run store schema (version {SCHEMA_VERSION})")


def get_schema_version(client: SQLiteClient) -> Optional[int]:
    if not client.exists():
        return None
    try:
        rows = client.fetchall("SELECT MAX(version) FROM schema_version")
    except PersistenceError:
        return None
    return rows[0][0] if rows and rows[0][0] is not None else None


class RunStore:
    """
    Run and cell persistence.

    Features:
    - one row per run with the compressed experiment config
    - batched cell inserts through executemany()
    - record reload for reports
    """

    def __init__(self, db_path: str):
        self.client = SQLiteClient(db_path)
        self.client.initialize_database()
        create_schema(self.client)

    def start_run(self, run_id: str, config_hash: str, config: Dict[str, Any], versions: Dict[str, str]) -> None:
        self.client.execute(
            "INSERT OR REPLACE INTO runs (run_id, config_hash, status, config, versions) VALUES (?, ?, 'running', ?, ?)",
            (run_id, config_hash, compress_payload(config), json.dumps(versions, sort_keys=True)),
        )

    def write_cells(self, run_id: str, cells: List[Dict[str, Any]]) -> int:
        """
        Batch write cell results.

        Args:
            run_id: Run identifier
            cells: Cell result dictionaries (see CellResult.to_row_dict)

        Returns:
            Number of rows written
        """
        if not cells:
            return 0
        rows = [
            (
                run_id,
                c["key"],
                c["hbar"],
                c["eps_exponent"],
                c["T"],
                c["status"],
                c.get("error"),
                c.get("exit_code"),
                c.get("elapsed_s"),
                compress_payload(c.get("payload", {})),
            )
            for c in cells
        ]
        self.client.executemany(INSERT_CELL, rows)
        logger.debug(f"Wrote {len(rows)} cells for run {run_id}")
        return len(rows)

    def finish_run(self, run_id: str, status: str, exit_code: int) -> None:
        self.client.execute(
            "UPDATE runs SET status = ?, exit_code = ?, finished_at = CURRENT_TIMESTAMP WHERE run_id = ?",
            (status, exit_code, run_id),
        )

    def list_runs(self) -> List[Tuple[str, str, str]]:
        """(run_id, config_hash, status) ordered by start time."""
        return [tuple(r) for r in self.client.fetchall("SELECT run_id, config_hash, status FROM runs ORDER BY started_at")]

    def load_run(self, run_id: str) -> Dict[str, Any]:
        """
        Reload a run with its cells.

        Returns:
            Dictionary with run metadata, config and cells sorted by key
        """
        rows = self.client.fetchall(
            "SELECT run_id, config_hash, status, exit_code, config, versions FROM runs WHERE run_id = ?", (run_id,)
        )
        if not rows:
            raise PersistenceError(f"Unknown run {run_id}")
        run_id, config_hash, status, exit_code, config_blob, versions = rows[0]
        cells = []
        for key, hbar, alpha, T, cstatus, error, code, elapsed, blob in self.client.fetchall(
            "SELECT cell_key, hbar, eps_exponent, T, status, error, exit_code, elapsed_s, payload "
            "FROM cells WHERE run_id = ? ORDER BY cell_key",
            (run_id,),
        ):
            cells.append(
                {
                    "key": key,
                    "hbar": hbar,
                    "eps_exponent": alpha,
                    "T": T,
                    "status": cstatus,
                    "error": error,
                    "exit_code": code,
                    "elapsed_s": elapsed,
                    "payload": decompress_payload(blob),
                }
            )
        return {
            "run_id": run_id,
            "config_hash": config_hash,
            "status": status,
            "exit_code": exit_code,
            "config": decompress_payload(config_blob),
            "versions": json.loads(versions) if versions else {},
            "cells": cells,
        }
