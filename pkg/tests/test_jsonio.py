from __future__ import annotations

import json
import math

import numpy as np
import pytest

from curvlab.errors import POS_INF, ConfigError
from curvlab.jsonio import SCHEMA_VERSION, dumps, jsonable, read_json, sidecar_path, write_json


def test_jsonable_sentinels():
    out = jsonable({"a": math.inf, "b": -np.inf, "c": math.nan, "d": POS_INF, "e": np.arange(2), "f": np.float32(0.5)})
    assert out == {"a": {"sentinel": "+inf"}, "b": {"sentinel": "-inf"}, "c": None, "d": {"sentinel": "+inf"}, "e": [0, 1], "f": 0.5}
    json.loads(dumps(out))


def test_write_json_and_sidecar(tmp_path):
    p = write_json(tmp_path / "x.json", {"b": 1, "a": [1.5]}, {"wall_time": 3.0})
    text = p.read_text()
    assert json.loads(text) == {"schema_version": SCHEMA_VERSION, "a": [1.5], "b": 1}
    assert text.index('"a"') < text.index('"b"')
    side = json.loads(sidecar_path(p).read_text())
    assert side["wall_time"] == 3.0 and "written_at" in side
    assert sidecar_path(p).name == "x.meta.json"


def test_read_json_errors(tmp_path):
    with pytest.raises(ConfigError):
        read_json(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ConfigError):
        read_json(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        read_json(arr)
