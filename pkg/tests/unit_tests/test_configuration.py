import math
from pathlib import Path

import pytest
from pydantic import ValidationError

from honeycomb.context import ExperimentConfig, load_config
from honeycomb.geometry import Mode
from honeycomb.homogenized import lattice_tensor


def test_config_defaults() -> None:
    config = ExperimentConfig()
    assert config.mode is Mode.RETICULATED
    assert config.n_values == [1, 2, 3]
    assert config.include_control
    assert config.tol_factor == 1.1
    assert config.control_rule == "power"
    assert config.control_theta == pytest.approx(2 / 3)
    assert config.snapshot()["mode"] == "reticulated"


def test_env_fallback(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("HONEYCOMB_N_VALUES", "2, 4")
    monkeypatch.setenv("HONEYCOMB_B", "3.5")
    config = ExperimentConfig()
    assert config.n_values == [2, 4]
    assert config.b == 3.5
    assert ExperimentConfig(b=2.0).b == 2.0


def test_comma_lists() -> None:
    config = ExperimentConfig(thickness_coeffs="1, 2, 0", mode="gridwork", battery="cos,x0")
    assert config.thickness_coeffs == (1.0, 2.0, 0.0)
    assert config.battery == ["cos", "x0"]


@pytest.mark.parametrize(
    ("data", "match"),
    [
        ({"n_values": [2, 2]}, "strictly increasing"),
        ({"n_values": []}, "must not be empty"),
        ({"exponent": 1.0}, "must exceed 1"),
        ({"mode": "gridwork"}, r"thickness_coeffs\[2\] == 0"),
        ({"thickness_coeffs": (1.0, 0.0, 1.0)}, "positive coefficients"),
        ({"battery": ["sinh"]}, "unknown test function"),
        ({"samples": 100}, "samples"),
        ({"unknown": 1}, "unknown"),
    ],
)
def test_invalid_config(data: dict, match: str) -> None:
    with pytest.raises(ValidationError, match=match):
        ExperimentConfig(**data)


def test_load_config_file(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    path = tmp_path / "run.env"
    path.write_text("# sweep\nmode = gridwork\nthickness_coeffs = 1,1,0\nn_values = 1,2\nA = 2.0\n")
    monkeypatch.setenv("HONEYCOMB_SEED", "7")
    config = load_config(path, a=3.0, b=None)
    assert config.mode is Mode.GRIDWORK
    assert config.n_values == [1, 2]
    assert config.a == 3.0
    assert config.b == 1.0
    assert config.seed == 7


def test_load_config_errors(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.env")
    bare = tmp_path / "bare.env"
    bare.write_text("mode\n")
    with pytest.raises(ValueError, match="has no value"):
        load_config(bare)
    typo = tmp_path / "typo.env"
    typo.write_text("h_ambiant = 0.1\n")
    with pytest.raises(ValueError, match="h_ambiant"):
        load_config(typo)


def test_derived_objects() -> None:
    config = ExperimentConfig()
    lat = config.lattice(1)
    assert lat.r_float(2) == pytest.approx(1 / 9)
    assert config.mesh_config().include_control
    assert not config.mesh_config(include_control=False).include_control
    f = config.source_spec(lattice_tensor(lat, config.a, config.b))
    assert f.value == pytest.approx(11 / 3 * math.pi**2)
    assert ExperimentConfig(source="constant").source_spec(lattice_tensor(lat, 1.0, 1.0)).value == 1.0
    assert str(config.phi()) == "cos"
