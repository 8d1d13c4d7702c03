import json
import math

import numpy as np
import pytest

from reebspiral.export import (config_line, dump_json, format_value, read_config, read_csv,
                               svg_lines, svg_loglog, write_csv)


def test_format_value_round_trips_floats():
    for v in (0.1, 1 / 3, -2.5e-17, 1e300):
        assert float(format_value(v)) == v
    assert format_value(np.float64(0.25)) == "0.25"
    assert format_value(np.int64(3)) == "3"
    assert format_value(True) == "true"
    assert format_value("converged") == "converged"


def test_config_line_is_sorted():
    assert config_line({"b": 1, "a": 0.5}) == '# config: {"a": 0.5, "b": 1}'


def test_csv_round_trip(tmp_path):
    path = tmp_path / "x.csv"
    n = write_csv(path, ("a", "b"), [(1, 0.5), (2, math.nan)], {"model": "s3"})
    assert n == 2
    cfg, header, rows = read_csv(path)
    assert cfg == {"model": "s3"} and header == ["a", "b"]
    assert rows == [["1", "0.5"], ["2", "nan"]]


def test_csv_rejects_ragged_rows(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "x.csv", ("a", "b"), [(1,)], {})


def test_read_csv_needs_config_line(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_csv(path)


def test_read_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nmodel = s3\n\nkmax=12  # trailing\nrel_tol = 1e-9\n")
    assert read_config(path) == {"model": "s3", "kmax": "12", "rel-tol": "1e-9"}
    path.write_text("just words\n")
    with pytest.raises(ValueError):
        read_config(path)


def test_dump_json_is_stable():
    a = dump_json({"z": np.float64(1.5), "a": [1, 2]})
    assert a == dump_json({"a": [1, 2], "z": 1.5})
    assert json.loads(a) == {"a": [1, 2], "z": 1.5}


def test_svg_documents():
    doc = svg_lines([("s", [0, 1, 2], [1, 0, 1])], "title", "x", "y")
    assert doc.startswith("<svg") and "polyline" in doc and doc.rstrip().endswith("</svg>")
    x = [10, 20, 40]
    doc = svg_loglog(x, [("pos", [1e-2, 2.5e-3, 6.25e-4], -2.0, math.log(1.0))], "fit", "h0")
    assert doc.count("<circle") == 3 and "slope -2.000" in doc
