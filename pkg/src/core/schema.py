# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
JSON document schema helpers.

Parses exact numbers ({"rat": [p, q]}, {"surd": {...}}), loads JSON/YAML
documents and produces canonical encodings used for config hashing.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import sympy
import yaml

from .errors import ValidationError

logger = logging.getLogger(__name__)

ExactNumber = Union[sympy.Expr, float]


def parse_exact_number(value: Any) -> Tuple[sympy.Expr, bool]:
    """
    Parse an exact number entry.

    Accepted forms: {"rat": [p, q]}, {"surd": {"rat": [p, q], "root": r}}
    meaning (p/q)·√r, integers, and floats.

    Args:
        value: Decoded JSON value

    Returns:
        (sympy expression, is_exact) tuple; floats come back inexact
    """
    if isinstance(value, bool):
        raise ValidationError(f"Invalid number: {value!r}")
    if isinstance(value, int):
        return sympy.Integer(value), True
    if isinstance(value, float):
        return sympy.Float(value, 17), False
    if isinstance(value, dict):
        if "rat" in value:
            p, q = _rational_pair(value["rat"])
            return sympy.Rational(p, q), True
        if "surd" in value:
            surd = value["surd"]
            if not isinstance(surd, dict) or "root" not in surd:
                raise ValidationError(f"Invalid surd: {value!r}")
            p, q = _rational_pair(surd.get("rat", [1, 1]))
            root = surd["root"]
            if not isinstance(root, int) or root <= 0:
                raise ValidationError(f"Surd root must be a positive integer: {root!r}")
            return sympy.Rational(p, q) * sympy.sqrt(root), True
    raise ValidationError(f"Unsupported number encoding: {value!r}")


def _rational_pair(pair: Any) -> Tuple[int, int]:
    if (
        not isinstance(pair, (list, tuple))
        or len(pair) != 2
        or not all(isinstance(x, int) and not isinstance(x, bool) for x in pair)
    ):
        raise ValidationError(f"Rational must be [p, q] integers: {pair!r}")
    if pair[1] == 0:
        raise ValidationError("Rational with zero denominator")
    return pair[0], pair[1]


def encode_exact_number(value: sympy.Expr) -> Any:
    """
    Encode a sympy number back to its JSON form.

    Args:
        value: Rational, rational multiple of a square root, or float

    Returns:
        JSON-compatible value
    """
    value = sympy.sympify(value)
    if isinstance(value, sympy.Float):
        return float(value)
    if value.is_Rational:
        return {"rat": [int(value.p), int(value.q)]}
    coeff, rest = value.as_coeff_Mul()
    if isinstance(rest, sympy.Pow) and rest.exp == sympy.Rational(1, 2) and rest.base.is_Integer:
        coeff = sympy.Rational(coeff)
        return {"surd": {"rat": [int(coeff.p), int(coeff.q)], "root": int(rest.base)}}
    return float(value)


def load_document(source: Union[str, Path, Dict[str, Any]]) -> Dict[str, Any]:
    """
    Load a JSON (or YAML) document.

    Args:
        source: File path or an already decoded mapping

    Returns:
        Decoded mapping
    """
    if isinstance(source, dict):
        return source
    path = Path(source).expanduser()
    if not path.exists():
        raise ValidationError(f"File not found: {path}")
    try:
        with open(path, 'r') as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ValidationError(f"Failed to parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise ValidationError(f"Expected a JSON object in {path}")
    return data


def canonical_json(data: Any) -> str:
    """Serialize with sorted keys and no whitespace."""
    return json.dumps(data, sort_keys=True, separators=(',', ':'))


def hash_document(data: Any, truncate: int = 16) -> str:
    """
    Hash a document for run identification.

    Args:
        data: JSON-compatible value
        truncate: Length to truncate hash (0 = no truncation)

    Returns:
        Hex digest (optionally truncated)
    """
    hash_hex = hashlib.sha256(canonical_json(data).encode()).hexdigest()
    return hash_hex[:truncate] if truncate > 0 else hash_hex


def require_fields(data: Dict[str, Any], fields: Tuple[str, ...], what: str) -> None:
    """
    Validate presence of required fields.

    Args:
        data: Document to check
        fields: Required keys
        what: Document name used in the error
    """
    for name in fields:
        if name not in data:
            raise ValidationError(f"Missing required field in {what}: {name}")
