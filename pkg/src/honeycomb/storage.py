"""Atomic file storage for manifests, CSV tables and gnuplot data files."""

import csv
import io
import os
import tempfile
from collections.abc import Iterable, Sequence
from numbers import Integral, Real
from pathlib import Path
from typing import Any


class TextFileStore:
    """One text file replaced atomically on every save."""

    def __init__(self, path: Path):
        self.path = path

    def load(self) -> str | None:
        """Current content, or ``None`` before the first save."""
        if self.path.exists():
            return self.path.read_text()
        return None

    def save_atomic(self, content: str) -> None:
        """Save content to file atomically.

        Writes to a temporary file in the same directory, then renames it over
        the target, so readers see either the old or the new content.

        Raises:
            OSError: If the write operation fails.
        """
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(
            dir=self.path.parent, prefix=".honeycomb_", suffix=".tmp"
        )
        try:
            with os.fdopen(fd, "w", newline="") as f:
                f.write(content)
            os.replace(tmp_path, self.path)
        except Exception:
            try:
                os.unlink(tmp_path)
            except OSError:
                pass
            raise


def format_value(value: Any) -> str:
    """Shortest round-trip text for numbers, so equal runs give equal bytes."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Integral):
        return str(int(value))
    if isinstance(value, Real):
        return repr(float(value))
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} columns, header has {len(header)}")
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def render_dat(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Whitespace-separated table with a ``#`` header line for gnuplot."""
    lines = ["# " + " ".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, bool):
                cells.append("1" if v else "0")
            elif isinstance(v, Real):
                cells.append(format_value(v))
            else:
                cells.append(f'"{v}"')
        lines.append(" ".join(cells))
    return "\n".join(lines) + "\n"


def write_table(
    directory: Path,
    stem: str,
    header: Sequence[str],
    rows: Sequence[Sequence[Any]],
    *,
    gnuplot: bool = True,
) -> list[Path]:
    """Write ``<stem>.csv`` (and ``<stem>.dat``) atomically; return the paths."""
    csv_path = directory / f"{stem}.csv"
    TextFileStore(csv_path).save_atomic(render_csv(header, rows))
    written = [csv_path]
    if gnuplot:
        dat_path = directory / f"{stem}.dat"
        TextFileStore(dat_path).save_atomic(render_dat(header, rows))
        written.append(dat_path)
    return written
