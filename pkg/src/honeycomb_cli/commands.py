"""Command handlers: load the configuration, run, render."""

import logging
from pathlib import Path

from honeycomb.context import load_config
from honeycomb.harness import COMMANDS as RUNNERS

from .config import COLORS, console
from .ui import show_result

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECKS_FAILED = 2
EXIT_INTERRUPTED = 130


def run_command(command: str, config_path: Path | None, out_dir: Path | None) -> int:
    """Run one subcommand and return its exit code.

    Raises:
        ValueError: If ``command`` is unknown or the configuration is invalid.
    """
    try:
        runner = RUNNERS[command]
    except KeyError:
        raise ValueError(f"unknown command {command!r}; choose from {', '.join(RUNNERS)}") from None

    config = load_config(config_path)
    logger.info("running %s with output directory %s", command, out_dir or config.output_dir)
    with console.status(f"[{COLORS['primary']}]{command}...", spinner="dots"):
        result = runner(config, out_dir)
    show_result(result)
    return EXIT_OK if result.ok else EXIT_CHECKS_FAILED
