"""
Runtime Settings
Environment-driven defaults for the CLI. A `.env` file is loaded by the CLI
before these are read; command-line flags override them.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class Settings:
    """Process-wide defaults."""

    log_level: str = field(default_factory=lambda: os.getenv("VOLCAL_LOG_LEVEL", "INFO"))
    log_format: str = field(default_factory=lambda: os.getenv("VOLCAL_LOG_FORMAT", "json"))
    output_dir: Path = field(default_factory=lambda: Path(os.getenv("VOLCAL_OUTPUT_DIR", "volcal-out")))
    workers: int = field(default_factory=lambda: int(os.getenv("VOLCAL_WORKERS", "1")))
    seed: int = field(default_factory=lambda: int(os.getenv("VOLCAL_SEED", "20170307")))
