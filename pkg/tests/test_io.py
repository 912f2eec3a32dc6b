import json

import numpy as np

from exochemo import io


def test_csv_roundtrip_with_missing(tmp_path):
    p = io.write_csv(tmp_path / "a.csv", ("t", "x"), [(0.0, None), (0.5, float("nan")), (1.0, 0.1)],
                     timestamp=True)
    lines = p.read_text().splitlines()
    assert lines[0].startswith("# generated") and lines[1] == "t,x" and lines[2] == "0.0,"
    table = io.read_csv(p)
    assert np.isnan(table["x"][:2]).all() and table["x"][2] == 0.1


def test_floats_roundtrip_exactly(tmp_path):
    vals = [1 / 3, np.pi * 1e-300, 2.0 ** -1074]
    p = io.write_csv(tmp_path / "b.csv", ("v",), [(v,) for v in vals], timestamp=False)
    assert io.read_csv(p)["v"].tolist() == vals


def test_json_nonfinite_and_numpy(tmp_path):
    p = io.write_json(tmp_path / "s.json", {"a": np.float64("inf"), "b": np.bool_(True),
                                             "c": (np.int64(3), 1.5), "d": tmp_path})
    d = json.loads(p.read_text())
    assert d == {"a": None, "b": True, "c": [3, 1.5], "d": str(tmp_path)}
    p = io.write_json(tmp_path / "t.json", {}, timestamp=True)
    assert "generated" in json.loads(p.read_text())
