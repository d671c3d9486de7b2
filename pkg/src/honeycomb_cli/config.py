"""Console, colors, logging and environment settings for the CLI."""

import logging
import os
from dataclasses import dataclass
from pathlib import Path

import dotenv
from rich.console import Console
from rich.logging import RichHandler

dotenv.load_dotenv()

# Color scheme
COLORS = {
    "primary": "#f59e0b",
    "dim": "#6b7280",
    "ok": "#10b981",
    "fail": "#ef4444",
    "value": "#ffffff",
}

HONEYCOMB_ASCII = r"""
  __   __   __   __
 /  \_/  \_/  \_/  \    honeycomb
 \__/ \__/ \__/ \__/    thin-layer homogenization
 /  \_/  \_/  \_/  \
 \__/ \__/ \__/ \__/
"""

# Subcommands and what they do
COMMANDS = {
    "measures": "Closed-form and Monte Carlo region measures",
    "effective": "Effective conductivity tensor and comparisons",
    "solve": "Single fine-scale solve at the first sweep point",
    "sweep": "Convergence study over the sweep",
    "verify-ops": "Inequality suite over the test-function battery",
}

# Rows shown per table on the console; the files hold everything
MAX_TABLE_ROWS = 40

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

# Rich console instance
console = Console(highlight=False)


@dataclass
class Settings:
    """Environment detected once at startup.

    Attributes:
        config_path: Config file named by ``HONEYCOMB_CONFIG``, if any.
        log_level: Level from ``HONEYCOMB_LOG_LEVEL`` (default ``WARNING``).
        no_color: Whether ``NO_COLOR`` is set.
    """

    config_path: Path | None
    log_level: str
    no_color: bool

    @classmethod
    def from_environment(cls) -> "Settings":
        config_path = os.environ.get("HONEYCOMB_CONFIG")
        level = os.environ.get("HONEYCOMB_LOG_LEVEL", "WARNING").upper()
        if level not in LOG_LEVELS:
            level = "WARNING"
        return cls(
            config_path=Path(config_path) if config_path else None,
            log_level=level,
            no_color="NO_COLOR" in os.environ,
        )


def setup_logging(level: str) -> None:
    """Route library logging through rich on stderr."""
    handler = RichHandler(
        console=Console(stderr=True),
        show_path=False,
        rich_tracebacks=True,
    )
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[handler],
        force=True,
    )


settings = Settings.from_environment()
