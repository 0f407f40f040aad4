# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Shared components used by all oscilab layers.
"""

from .config import Config
from .errors import (
    OscilabError,
    ValidationError,
    NumericalToleranceError,
    exit_code_for,
)
from .schema import load_document, hash_document, parse_exact_number

__all__ = [
    "Config",
    "OscilabError",
    "ValidationError",
    "NumericalToleranceError",
    "exit_code_for",
    "load_document",
    "hash_document",
    "parse_exact_number",
]
