"""Main entry point for the honeycomb command line."""

import argparse
import sys
from pathlib import Path

from pydantic import ValidationError

from honeycomb_cli.commands import EXIT_ERROR, EXIT_INTERRUPTED, run_command
from honeycomb_cli.config import COMMANDS, LOG_LEVELS, console, settings, setup_logging
from honeycomb_cli.ui import show_error, show_help


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        prog="honeycomb",
        description="Honeycomb - thin-layer homogenization experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        add_help=False,
    )
    subparsers = parser.add_subparsers(dest="command", help="Command to run")
    subparsers.add_parser("help", help="Show help information")

    for name, description in COMMANDS.items():
        sub = subparsers.add_parser(name, help=description)
        sub.add_argument(
            "--config",
            type=Path,
            default=settings.config_path,
            help="Flat key = value config file (default: $HONEYCOMB_CONFIG or built-in defaults)",
        )
        sub.add_argument(
            "--out",
            type=Path,
            default=None,
            help="Output directory (default: output_dir from the config)",
        )
        sub.add_argument(
            "--log-level",
            choices=LOG_LEVELS,
            type=str.upper,
            default=settings.log_level,
            help="Logging level (default: $HONEYCOMB_LOG_LEVEL or WARNING)",
        )

    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    """Run the CLI and return the exit code."""
    try:
        args = parse_args(argv)
        if args.command in (None, "help"):
            show_help()
            return 0
        setup_logging(args.log_level)
        return run_command(args.command, args.config, args.out)
    except KeyboardInterrupt:
        console.print("\n\n[yellow]Interrupted[/yellow]")
        return EXIT_INTERRUPTED
    except ValidationError as e:
        show_error(f"invalid configuration:\n{e}")
        return EXIT_ERROR
    except (ValueError, RuntimeError, OSError) as e:
        show_error(str(e))
        return EXIT_ERROR


def cli_main() -> None:
    """Entry point for console script."""
    sys.exit(main())


if __name__ == "__main__":
    cli_main()
