# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Configuration management for oscilab.
Loads tolerances, basis caps, integrator and runner settings from YAML.
"""

import os
import yaml
from pathlib import Path
from typing import Dict, Any, Optional
from dataclasses import dataclass

CACHE_ENV_VAR = "OSCILAB_CACHE"


@dataclass
class ToleranceConfig:
    """Numerical tolerances shared by all modules."""
    hermitian: float = 1e-12
    quadrature: float = 1e-10
    symplectic: float = 1e-8
    unitary: float = 1e-10
    grid_change: float = 1e-3
    conservation: float = 1e-8
    tangency: float = 1e-6
    band_leakage: float = 1e-6


@dataclass
class BasisConfig:
    """Truncated Hermite basis limits."""
    max_dim: int = 4000
    band_margin: float = 3.0
    top_levels: int = 2


@dataclass
class QuadratureConfig:
    """Quadrature grid policy."""
    max_doublings: int = 3
    theta_grid: int = 32
    resolution_factor: float = 8.0
    position_spacing: float = 0.1
    husimi_points: int = 32


@dataclass
class FlowConfig:
    """ODE integrator settings for averaged flows."""
    method: str = "DOP853"
    rtol: float = 1e-11
    atol: float = 1e-12
    fd_step: float = 1e-5


@dataclass
class PropagationConfig:
    """Coherent-state propagation settings."""
    ehrenfest_epsilon: float = 0.05
    excitation_cap: int = 6


@dataclass
class RunnerConfig:
    """Sweep runner settings."""
    max_workers: int = 2
    output_dir: str = "runs"
    cache_path: Optional[str] = None


@dataclass
class LoggingConfig:
    """Logging settings."""
    level: str = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class Config:
    """
    Configuration manager for oscilab.

    Loads configuration from oscilab.yaml in the config/ directory.
    Provides typed access to every section with defaults for missing keys.
    """

    def __init__(self, config_dir: Optional[Path] = None):
        """
        Initialize configuration.

        Args:
            config_dir: Path to configuration directory.
                       Defaults to checking multiple locations
        """
        if config_dir is None:
            possible_locations = [
                Path.home() / ".oscilab",
                Path(__file__).parent.parent.parent / "config",
                Path("/etc/oscilab"),
            ]

            # Walk up from this file looking for config/
            current = Path(__file__).parent
            while current != current.parent:
                config_candidate = current / "config"
                if config_candidate.exists():
                    possible_locations.insert(0, config_candidate)
                    break
                current = current.parent

            for location in possible_locations:
                if location.exists() and location.is_dir():
                    if (location / "oscilab.yaml").exists():
                        config_dir = location
                        break

            if config_dir is None:
                # Falls back to defaults when nothing is installed
                config_dir = Path.home() / ".oscilab"

        self.config_dir = Path(config_dir)
        self._data: Dict[str, Any] = {}
        self._load_configs()

    def _load_configs(self) -> None:
        """Load oscilab.yaml if present."""
        config_file = self.config_dir / "oscilab.yaml"
        if config_file.exists():
            with open(config_file, 'r') as f:
                self._data = yaml.safe_load(f) or {}
        else:
            self._data = {}

    def _section(self, name: str) -> Dict[str, Any]:
        section = self._data.get(name, {})
        return section if isinstance(section, dict) else {}

    @property
    def tolerances(self) -> ToleranceConfig:
        """Get tolerance configuration."""
        data = self._section("tolerances")
        defaults = ToleranceConfig()
        return ToleranceConfig(
            hermitian=float(data.get("hermitian", defaults.hermitian)),
            quadrature=float(data.get("quadrature", defaults.quadrature)),
            symplectic=float(data.get("symplectic", defaults.symplectic)),
            unitary=float(data.get("unitary", defaults.unitary)),
            grid_change=float(data.get("grid_change", defaults.grid_change)),
            conservation=float(data.get("conservation", defaults.conservation)),
            tangency=float(data.get("tangency", defaults.tangency)),
            band_leakage=float(data.get("band_leakage", defaults.band_leakage)),
        )

    @property
    def basis(self) -> BasisConfig:
        """Get Hermite basis configuration."""
        data = self._section("basis")
        return BasisConfig(
            max_dim=int(data.get("max_dim", 4000)),
            band_margin=float(data.get("band_margin", 3.0)),
            top_levels=int(data.get("top_levels", 2)),
        )

    @property
    def quadrature(self) -> QuadratureConfig:
        """Get quadrature configuration."""
        data = self._section("quadrature")
        return QuadratureConfig(
            max_doublings=int(data.get("max_doublings", 3)),
            theta_grid=int(data.get("theta_grid", 32)),
            resolution_factor=float(data.get("resolution_factor", 8.0)),
            position_spacing=float(data.get("position_spacing", 0.1)),
            husimi_points=int(data.get("husimi_points", 32)),
        )

    @property
    def flow(self) -> FlowConfig:
        """Get integrator configuration."""
        data = self._section("flow")
        return FlowConfig(
            method=data.get("method", "DOP853"),
            rtol=float(data.get("rtol", 1e-11)),
            atol=float(data.get("atol", 1e-12)),
            fd_step=float(data.get("fd_step", 1e-5)),
        )

    @property
    def propagation(self) -> PropagationConfig:
        """Get propagation configuration."""
        data = self._section("propagation")
        return PropagationConfig(
            ehrenfest_epsilon=float(data.get("ehrenfest_epsilon", 0.05)),
            excitation_cap=int(data.get("excitation_cap", 6)),
        )

    @property
    def runner(self) -> RunnerConfig:
        """Get runner configuration. OSCILAB_CACHE overrides the cache path."""
        data = self._section("runner")
        return RunnerConfig(
            max_workers=int(data.get("max_workers", 2)),
            output_dir=data.get("output_dir", "runs"),
            cache_path=os.environ.get(CACHE_ENV_VAR) or data.get("cache_path"),
        )

    @property
    def logging(self) -> LoggingConfig:
        """Get logging configuration."""
        data = self._section("logging")
        defaults = LoggingConfig()
        return LoggingConfig(
            level=data.get("level", defaults.level),
            format=data.get("format", defaults.format),
        )

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get arbitrary configuration value.

        Args:
            key: Dot-separated key path (e.g., "tolerances.symplectic")
            default: Default value if key not found

        Returns:
            Configuration value or default
        """
        config: Any = self._data
        for part in key.split("."):
            if isinstance(config, dict):
                config = config.get(part)
            else:
                return default

        return config if config is not None else default
