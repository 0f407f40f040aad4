#!/usr/bin/env python3
# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
oscilab command-line entry point.

Usage:
    python scripts/oscilab.py spectrum --config config/examples/resonant_11.json
    python scripts/oscilab.py run --config config/examples/width_scaling.json --workers 2
"""

import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.runner.cli import main

if __name__ == "__main__":
    sys.exit(main())
