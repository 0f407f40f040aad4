# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Memoized quantized matrices.

Matrices are keyed by basis spec and symbol tag and stored as a JSON header
plus zlib-compressed numpy.save bytes. The cache is enabled by the
OSCILAB_CACHE environment variable or the runner cache_path setting.
"""

import io
import json
import logging
import os
import threading
import zlib
from typing import Optional

import numpy as np

from ..classical.symbols import WeylSymbol
from ..core.config import CACHE_ENV_VAR
from ..core.errors import PersistenceError
from ..core.schema import hash_document
from ..quantum.quantization import HermiteBasisSpec, OperatorMatrix, _symbol_tag, quantize
from .store import COMPRESSION_LEVEL, SQLiteClient

logger = logging.getLogger(__name__)

CACHE_SCHEMA = """
CREATE TABLE IF NOT EXISTS matrices (
    key TEXT PRIMARY KEY,
    header TEXT NOT NULL,
    data BLOB NOT NULL,
    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
);
"""


class MatrixCache:
    """
    SQLite-backed cache of OperatorMatrix entries.

    Features:
    - key = hash of (basis spec, symbol tag)
    - header column with basis, tag and degree for inspection
    - hit/miss counters
    """

    def __init__(self, path: str):
        self.client = SQLiteClient(path)
        self.client.initialize_database()
        self.client.execute_script(CACHE_SCHEMA)
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    @classmethod
    def from_env(cls, fallback: Optional[str] = None) -> Optional["MatrixCache"]:
        """Cache at $OSCILAB_CACHE (or fallback); None when neither is set."""
        path = os.environ.get(CACHE_ENV_VAR) or fallback
        return cls(path) if path else None

    @staticmethod
    def key(basis: HermiteBasisSpec, tag: str) -> str:
        return hash_document({"basis": basis.to_dict(), "tag": tag}, truncate=0)

    def get(self, basis: HermiteBasisSpec, tag: str) -> Optional[OperatorMatrix]:
        rows = self.client.fetchall("SELECT header, data FROM matrices WHERE key = ?", (self.key(basis, tag),))
        if not rows:
            with self._lock:
                self.misses += 1
            return None
        header, blob = rows[0]
        meta = json.loads(header)
        try:
            entries = np.load(io.BytesIO(zlib.decompress(blob)), allow_pickle=False)
        except (zlib.error, ValueError) as e:
            raise PersistenceError(f"Corrupt cached matrix {tag}: {e}") from e
        if entries.shape != (basis.dim, basis.dim):
            raise PersistenceError(f"Cached matrix {tag} has shape {entries.shape}, expected {(basis.dim, basis.dim)}")
        with self._lock:
            self.hits += 1
        return OperatorMatrix(basis, entries, tag, int(meta.get("degree", 0)))

    def put(self, A: OperatorMatrix) -> None:
        buf = io.BytesIO()
        np.save(buf, A.entries, allow_pickle=False)
        header = json.dumps({"basis": A.basis.to_dict(), "tag": A.symbol_tag, "degree": A.degree}, sort_keys=True)
        self.client.execute(
            "INSERT OR REPLACE INTO matrices (key, header, data) VALUES (?, ?, ?)",
            (self.key(A.basis, A.symbol_tag), header, zlib.compress(buf.getvalue(), COMPRESSION_LEVEL)),
        )

    def count(self) -> int:
        return int(self.client.fetchall("SELECT COUNT(*) FROM matrices")[0][0])


def cached_quantize(s: WeylSymbol, basis: HermiteBasisSpec, cache: Optional[MatrixCache] = None) -> OperatorMatrix:
    """quantize() through the cache when one is given."""
    if cache is None or s.is_zero:
        return quantize(s, basis)
    tag = _symbol_tag(s)
    A = cache.get(basis, tag)
    if A is None:
        A = quantize(s, basis, tag)
        cache.put(A)
        logger.debug(f"Cached matrix {tag} for nmax={basis.nmax}")
    return A
