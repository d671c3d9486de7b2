from pathlib import Path

import numpy as np
import pytest

from honeycomb.storage import TextFileStore, format_value, render_csv, render_dat, write_table


def test_format_value() -> None:
    assert format_value(True) == "true"
    assert format_value(np.int64(7)) == "7"
    assert format_value(0.1) == "0.1"
    assert format_value(np.float64(1 / 3)) == repr(1 / 3)
    assert format_value("pair(0,1)") == "pair(0,1)"


def test_render_csv_checks_width() -> None:
    assert render_csv(["a", "b"], [(1, 2.5)]) == "a,b\n1,2.5\n"
    assert render_csv(["name"], [("pair(0,1)",)]) == 'name\n"pair(0,1)"\n'
    with pytest.raises(ValueError, match="row has 1 columns, header has 2"):
        render_csv(["a", "b"], [(1,)])


def test_render_dat() -> None:
    text = render_dat(["region", "mc", "pass"], [("union", 0.25, True)])
    assert text == '# region mc pass\n"union" 0.25 1\n'


def test_write_table(tmp_path: Path) -> None:
    out = tmp_path / "nested"
    paths = write_table(out, "sweep", ["n", "eps"], [(1, 1 / 3), (2, 0.2)])
    assert [p.name for p in paths] == ["sweep.csv", "sweep.dat"]
    assert (out / "sweep.csv").read_text().splitlines()[1] == f"1,{1 / 3!r}"
    assert write_table(out, "grid", ["x"], [(0.0,)], gnuplot=False) == [out / "grid.csv"]
    assert not list(out.glob(".honeycomb_*"))


def test_text_file_store(tmp_path: Path) -> None:
    store = TextFileStore(tmp_path / "run.json")
    assert store.load() is None
    store.save_atomic("{}\n")
    store.save_atomic("{\"a\": 1}\n")
    assert store.load() == "{\"a\": 1}\n"
