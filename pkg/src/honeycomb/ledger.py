"""Run manifest (``run.json``) shared by the commands and the sweep workers."""

import threading
from collections.abc import Generator
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Literal

from honeycomb.storage import TextFileStore
from honeycomb.types import RunManifest

MANIFEST_NAME = "run.json"

Status = Literal["running", "completed", "aborted", "failed"]


class RunLedger:
    """Manages the manifest of one output directory."""

    # Class-level lock: sweep workers may share the directory through separate instances
    _lock = threading.Lock()

    def __init__(self, directory: Path, manifest: RunManifest | None = None):
        """Initialize from an existing manifest in ``directory`` or a fresh one."""
        self.directory = directory
        self.store = TextFileStore(directory / MANIFEST_NAME)

        content = self.store.load()
        if content:
            self.manifest = RunManifest.model_validate_json(content)
        else:
            self.manifest = manifest or RunManifest()

    def _reload_from_disk(self) -> None:
        """Reload the manifest if the file exists. Call only while holding the lock."""
        content = self.store.load()
        if content:
            self.manifest = RunManifest.model_validate_json(content)

    def _persist_unlocked(self) -> None:
        self.store.save_atomic(self.manifest.model_dump_json(indent=2) + "\n")

    def persist(self) -> None:
        with self._lock:
            self._persist_unlocked()

    @contextmanager
    def _transaction(self) -> Generator[None, None, None]:
        """Lock, reload from disk, yield, then persist; roll back on error."""
        with self._lock:
            self._reload_from_disk()
            before = self.manifest
            try:
                yield
            except Exception:
                self.manifest = before
                raise
            else:
                self._persist_unlocked()

    def start(self, command: str, config: dict[str, Any]) -> None:
        """Begin a new run, discarding records of earlier runs in the directory."""
        with self._lock:
            self.manifest = RunManifest(command=command, config=config)
            self._persist_unlocked()

    def add_files(self, paths: list[Path]) -> None:
        with self._transaction():
            known = set(self.manifest.files)
            for path in paths:
                rel = Path(path.name) if path.parent == self.directory else path
                if rel not in known:
                    self.manifest.files.append(rel)
                    known.add(rel)

    def add_record(self, record: dict[str, Any], *, key: str = "n") -> None:
        """Append a per-point record.

        Raises:
            ValueError: If a record with the same ``key`` value already exists.
        """
        with self._transaction():
            if key in record and any(r.get(key) == record[key] for r in self.manifest.records):
                raise ValueError(f"Record with {key}={record[key]!r} already exists.")
            self.manifest.records.append(record)
            self.manifest.records.sort(key=lambda r: r.get(key, 0))

    def record_checks(self, failed: int) -> None:
        with self._transaction():
            self.manifest.checks_failed += failed

    def finish(self, status: Status, message: str = "") -> None:
        with self._transaction():
            self.manifest = self.manifest.model_copy(update={"status": status, "message": message})
