# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Phase-space points in canonical coordinates (x, ξ).
"""

from dataclasses import dataclass
from typing import Any, Dict, Sequence

import numpy as np

from ..core.errors import ValidationError


@dataclass(frozen=True)
class PhasePoint:
    """A point (x, ξ) ∈ R^d × R^d."""
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float).reshape(-1)
        xi = np.asarray(self.xi, dtype=float).reshape(-1)
        if x.shape != xi.shape:
            raise ValidationError(f"x and xi must have equal length, got {x.shape} and {xi.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))):
            raise ValidationError("Phase point components must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)

    @property
    def d(self) -> int:
        return len(self.x)

    @property
    def z(self) -> np.ndarray:
        """Complex coordinates z_j = x_j + iξ_j."""
        return self.x + 1j * self.xi

    @property
    def actions(self) -> np.ndarray:
        """𝕄(z) = (H_1, …, H_d)."""
        return 0.5 * (self.x ** 2 + self.xi ** 2)

    def as_array(self) -> np.ndarray:
        """Concatenated (x, ξ) vector of length 2d."""
        return np.concatenate([self.x, self.xi])

    @classmethod
    def from_array(cls, w: Sequence[float]) -> "PhasePoint":
        w = np.asarray(w, dtype=float)
        if w.ndim != 1 or len(w) % 2:
            raise ValidationError(f"Expected a flat vector of even length, got shape {w.shape}")
        d = len(w) // 2
        return cls(w[:d], w[d:])

    @classmethod
    def from_complex(cls, z: Sequence[complex]) -> "PhasePoint":
        z = np.asarray(z, dtype=complex)
        return cls(z.real, z.imag)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PhasePoint":
        """Create a point from {"x": [...], "xi": [...]}."""
        if "x" not in data or "xi" not in data:
            raise ValidationError("Phase point requires 'x' and 'xi'")
        return cls(np.array(data["x"], dtype=float), np.array(data["xi"], dtype=float))

    def to_dict(self) -> Dict[str, Any]:
        return {"x": self.x.tolist(), "xi": self.xi.tolist()}
