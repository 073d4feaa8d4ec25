import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from latticetrap.config import ConfigError, RunConfig, load_config
from latticetrap.io import dumps_json, read_csv, read_json, to_jsonable, write_csv, write_json


def test_defaults_valid_and_hash_stable():
    a, b = RunConfig(), RunConfig()
    assert a.canonical_json() == b.canonical_json()
    assert a.mass == pytest.approx(2.838e-25, rel=1e-3)


def test_load_toml_with_overrides(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('M = 4\ncell_type = "hexagonal"\nresolution_um = 2\nsides = [4, 25]\n')
    cfg = load_config(p, resolution_um=3.0, threads=None)
    assert cfg.M == 4 and cfg.cell_type == "hexagonal"
    assert cfg.resolution_um == 3.0 and cfg.sides == [4, 25]


@pytest.mark.parametrize("text", ['M = "three"\n', 'bogus = 1\n', 'q = 0.95\n', '[table]\nx = 1\n',
                                  'cyclic_detuning = 1\n', 'M = 1.5\n', 'detuning_THz = 150\n', 'M = \n'])
def test_bad_configs_rejected(tmp_path, text):
    p = tmp_path / "bad.toml"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p)


def test_custom_noise_needs_xi():
    with pytest.raises(ConfigError):
        RunConfig(noise="custom")
    assert RunConfig(noise="custom", xi=1e-20).xi == 1e-20


def test_json_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    vals = rng.standard_normal(50) * 10.0 ** rng.integers(-30, 30, 50)
    path = write_json(tmp_path / "x.json", {"v": vals, "nan": math.nan, "flag": np.bool_(True)}, {"a": 1})
    back = read_json(path)
    assert back["data"]["v"] == vals.tolist()
    assert back["data"]["nan"] is None and back["data"]["flag"] is True
    assert back["config"] == {"a": 1}


def test_json_tamper_detected(tmp_path):
    path = write_json(tmp_path / "x.json", {"v": 1.0})
    body = json.loads(path.read_text())
    body["data"]["v"] = 2.0
    path.write_text(json.dumps(body))
    with pytest.raises(ValueError):
        read_json(path)


def test_json_deterministic():
    assert dumps_json({"b": 1, "a": [1.5, 2]}) == dumps_json({"a": [1.5, 2], "b": 1})


@given(st.lists(st.tuples(st.integers(-1000, 1000), st.floats(allow_nan=False, allow_infinity=False, width=32)),
                max_size=20))
def test_csv_round_trip(rows):
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as d:
        p = write_csv(Path(d) / "t.csv", ["i", "x"], rows, {"k": 1}, {"note": "hi"})
        meta, cols, back = read_csv(p)
    assert cols == ["i", "x"] and meta["config"] == {"k": 1} and meta["note"] == "hi"
    assert len(back) == len(rows)
    for (i, x), (bi, bx) in zip(rows, back):
        assert bi == i
        assert bx == pytest.approx(x, rel=1e-8, abs=1e-300)


def test_csv_row_length_checked(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "t.csv", ["a", "b"], [(1,)])


def test_to_jsonable_rejects_objects():
    with pytest.raises(TypeError):
        to_jsonable(object())
