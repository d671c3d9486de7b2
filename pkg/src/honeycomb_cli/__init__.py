"""Honeycomb CLI - run homogenization experiments from the shell."""

from honeycomb_cli.main import cli_main

__all__ = ["cli_main"]
