#!/usr/bin/env python3
# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Matrix cache initialization script for oscilab.

Creates the SQLite matrix cache and optionally pre-fills it with the
perturbation matrices of an experiment's hbar sweep.
"""

import argparse
import os
import sys
import logging
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.core.config import CACHE_ENV_VAR, Config
from src.core.errors import OscilabError
from src.runner.cache import MatrixCache, cached_quantize
from src.runner.experiment import ExperimentConfig

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def main() -> int:
    """Initialize the matrix cache."""
    parser = argparse.ArgumentParser(description='Initialize the oscilab matrix cache')
    parser.add_argument('--path', default=None, help=f'Cache database (default ${CACHE_ENV_VAR} or ~/.oscilab/matrices.db)')
    parser.add_argument('--config', default=None, help='Experiment JSON whose V matrices are pre-computed')
    args = parser.parse_args()

    settings = Config()
    path = args.path or os.environ.get(CACHE_ENV_VAR) or settings.runner.cache_path
    path = path or str(Path.home() / ".oscilab" / "matrices.db")
    logger.info(f"Initializing matrix cache: {path}")

    try:
        cache = MatrixCache(path)
    except OscilabError as e:
        logger.error(f"Failed to initialize cache: {e}")
        return 1

    if args.config:
        try:
            experiment = ExperimentConfig.from_file(args.config, settings)
            for hbar in experiment.hbar:
                basis = experiment.basis_for(hbar)
                cached_quantize(experiment.V, basis, cache)
                logger.info(f"Cached V for hbar={hbar} (nmax={basis.nmax}, dim={basis.dim})")
        except OscilabError as e:
            logger.error(f"Failed to pre-fill cache: {e}")
            return e.exit_code

    logger.info(f"✅ Matrix cache ready with {cache.count()} entries")
    return 0


if __name__ == "__main__":
    sys.exit(main())
