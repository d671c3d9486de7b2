"""UI rendering and display utilities for the CLI."""

from collections.abc import Sequence
from typing import Any

from rich import box
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

from honeycomb.harness import CommandResult
from honeycomb.harness import Table as ResultTable

from .config import COLORS, COMMANDS, HONEYCOMB_ASCII, MAX_TABLE_ROWS, console


def format_cell(value: Any) -> str:
    """Compact display text; the files keep full precision."""
    if isinstance(value, bool):
        return f"[{COLORS['ok']}]pass[/]" if value else f"[{COLORS['fail']}]FAIL[/]"
    if isinstance(value, float):
        return f"{value:.6g}"
    return escape(str(value))


def render_table(table: ResultTable, max_rows: int = MAX_TABLE_ROWS) -> Table:
    out = Table(title=f"[bold]{table.title}[/bold]", box=box.SIMPLE_HEAD, title_justify="left")
    for name in table.header:
        out.add_column(name, style=COLORS["value"], no_wrap=True)
    rows: Sequence[Sequence[Any]] = table.rows
    for row in rows[:max_rows]:
        out.add_row(*(format_cell(v) for v in row))
    if len(rows) > max_rows:
        out.caption = f"{len(rows) - max_rows} more rows in the CSV file"
    return out


def show_result(result: CommandResult) -> None:
    """Print every table of a finished command and a pass/fail summary."""
    console.print()
    for table in result.tables:
        console.print(render_table(table))
    lines = [f"Output: {result.out_dir}", f"Files: {len(result.files)}"]
    lines += result.notes
    if result.ok:
        status = f"[{COLORS['ok']}]all checks passed[/]"
    else:
        status = f"[{COLORS['fail']}]{result.checks_failed} check(s) failed[/]"
    lines.append(status)
    console.print(
        Panel(
            "\n".join(lines),
            title=f"[bold]{result.command}[/bold]",
            border_style=COLORS["primary"],
            box=box.ROUNDED,
            padding=(0, 1),
        )
    )


def show_error(message: str) -> None:
    console.print(f"\n[bold red]Error:[/bold red] {escape(message)}\n")


def show_help() -> None:
    """Show help information."""
    console.print()
    console.print(HONEYCOMB_ASCII, style=f"bold {COLORS['primary']}")
    console.print()

    console.print("[bold]Usage:[/bold]", style=COLORS["primary"])
    console.print("  honeycomb COMMAND [--config PATH] [--out DIR] [--log-level LEVEL]")
    console.print()

    console.print("[bold]Commands:[/bold]", style=COLORS["primary"])
    for name, description in COMMANDS.items():
        console.print(f"  {name:<12} {description}", style=COLORS["dim"])
    console.print()

    console.print("[bold]Configuration:[/bold]", style=COLORS["primary"])
    console.print(
        "  Flat key = value files; unset keys fall back to HONEYCOMB_<KEY> and then to defaults.",
        style=COLORS["dim"],
    )
    console.print()

    console.print("[bold]Exit codes:[/bold]", style=COLORS["primary"])
    console.print("  0 all checks passed, 2 a check failed, 1 error, 130 interrupted", style=COLORS["dim"])
    console.print()
