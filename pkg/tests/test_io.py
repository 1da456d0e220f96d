import json

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from micromaser.io import Provenance, dumps_csv, dumps_json, format_number, read_csv, write_text


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_number_round_trips(value):
    assert float(format_number(value)) == value


def test_format_number_types():
    assert format_number(np.int64(7)) == "7"
    assert format_number(True) == "true"
    assert format_number(0.1) == "0.10000000000000001"
    assert format_number("x") == "x"


def test_csv_header_and_round_trip(tmp_path):
    provenance = Provenance("abc", 42)
    text = dumps_csv(("a", "b"), [{"a": 1, "b": 0.5}, {"a": 2, "b": 1e-20}], provenance, {"note": 3})
    lines = text.splitlines()
    assert lines[0] == "# config_sha256: abc"
    assert lines[1].startswith("# versions: micromaser=")
    assert lines[2] == "# seed: 42"
    assert lines[3] == "# note: 3"
    path = tmp_path / "out.csv"
    write_text(str(path), text)
    rows, fieldnames = read_csv(str(path))
    assert fieldnames == ["a", "b"]
    assert [float(row["b"]) for row in rows] == [0.5, 1e-20]


def test_read_missing_file(tmp_path):
    assert read_csv(str(tmp_path / "absent.csv")) == ([], None)


def test_json_converts_numpy_and_complex():
    document = json.loads(dumps_json({"z": np.array([1 + 2j]), "n": np.int32(3)}, Provenance("h", None)))
    assert document["data"] == {"n": 3, "z": [[1.0, 2.0]]}
    assert document["meta"]["config_sha256"] == "h"
    assert document["meta"]["seed"] is None
    assert set(document["meta"]["versions"]) == {"micromaser", "numpy", "scipy"}


def test_write_text_leaves_no_partial_file(tmp_path):
    path = tmp_path / "nested" / "out.txt"
    write_text(str(path), "hello")
    assert path.read_text() == "hello"
    assert sorted(p.name for p in path.parent.iterdir()) == ["out.txt"]
