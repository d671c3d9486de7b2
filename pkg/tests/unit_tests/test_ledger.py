import json
import threading
from pathlib import Path

import pytest

from honeycomb.ledger import MANIFEST_NAME, RunLedger
from honeycomb.types import RunManifest


@pytest.fixture
def run_dir(tmp_path: Path) -> Path:
    p = tmp_path / "results"
    p.mkdir()
    return p


@pytest.fixture
def ledger(run_dir: Path) -> RunLedger:
    ledger = RunLedger(run_dir)
    ledger.start("sweep", {"a": 1.0})
    return ledger


def test_start_creates_manifest(ledger: RunLedger, run_dir: Path) -> None:
    content = json.loads((run_dir / MANIFEST_NAME).read_text())
    assert content["command"] == "sweep"
    assert content["status"] == "running"
    assert content["config"] == {"a": 1.0}


def test_load_existing_manifest(run_dir: Path) -> None:
    (run_dir / MANIFEST_NAME).write_text(RunManifest(command="effective", status="completed").model_dump_json())
    ledger = RunLedger(run_dir)
    assert ledger.manifest.command == "effective"
    assert ledger.manifest.status == "completed"


def test_start_discards_old_records(ledger: RunLedger, run_dir: Path) -> None:
    ledger.add_record({"n": 1})
    ledger.start("solve", {})
    assert RunLedger(run_dir).manifest.records == []


def test_add_record_persists_sorted(ledger: RunLedger, run_dir: Path) -> None:
    ledger.add_record({"n": 3, "l2_err": 0.1})
    ledger.add_record({"n": 1, "l2_err": 0.4})
    content = json.loads((run_dir / MANIFEST_NAME).read_text())
    assert [r["n"] for r in content["records"]] == [1, 3]


def test_duplicate_record_is_rolled_back(ledger: RunLedger) -> None:
    ledger.add_record({"n": 1})
    with pytest.raises(ValueError, match="Record with n=1 already exists"):
        ledger.add_record({"n": 1})
    assert len(ledger.manifest.records) == 1


def test_transaction_reloads_from_disk(ledger: RunLedger, run_dir: Path) -> None:
    external = ledger.manifest.model_copy(update={"message": "edited elsewhere"})
    (run_dir / MANIFEST_NAME).write_text(external.model_dump_json())
    ledger.add_record({"n": 2})
    assert ledger.manifest.message == "edited elsewhere"
    assert ledger.manifest.records == [{"n": 2}]


def test_files_and_finish(ledger: RunLedger, run_dir: Path) -> None:
    ledger.add_files([run_dir / "sweep.csv", run_dir / "sweep.csv", run_dir / "sweep.dat"])
    ledger.record_checks(2)
    ledger.finish("completed", "2 checks failed")
    manifest = RunLedger(run_dir).manifest
    assert manifest.files == [Path("sweep.csv"), Path("sweep.dat")]
    assert manifest.checks_failed == 2
    assert manifest.status == "completed"
    assert manifest.message == "2 checks failed"


def test_concurrent_records(ledger: RunLedger, run_dir: Path) -> None:
    def add(n: int) -> None:
        RunLedger(run_dir).add_record({"n": n})

    threads = [threading.Thread(target=add, args=(n,)) for n in range(1, 9)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert [r["n"] for r in RunLedger(run_dir).manifest.records] == list(range(1, 9))
    assert not list(run_dir.glob(".honeycomb_*"))
