import json
import math

import numpy as np

from liberation import export


def test_csv_format(tmp_path):
    path = tmp_path / "a.csv"
    export.write_csv(path, ["x", "kind"], [(0.1, "a"), (np.float64(2.5e-17), "b")])
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.decode().splitlines() == ["x,kind", "0.1,a", "2.5e-17,b"]


def test_jsonable():
    doc = export.to_jsonable({"z": 1 + 2j, "v": np.array([1.0, math.nan]), "i": np.int64(3),
                              "inf": math.inf})
    text = json.dumps(doc)
    back = json.loads(text)
    assert back["z"] == {"re": 1.0, "im": 2.0}
    assert back["i"] == 3
    assert isinstance(back["v"][1], str) and isinstance(back["inf"], str)


def test_svgs(tmp_path):
    circle = 0.5 * np.exp(2j * np.pi * np.arange(12) / 12)
    export.boundary_svg(tmp_path / "b.svg", [circle], ["t = 1"])
    text = (tmp_path / "b.svg").read_text()
    assert text.startswith("<svg") and 'viewBox="0 0 800 800"' in text
    export.line_svg(tmp_path / "l.svg", np.linspace(0, 1, 5), np.arange(5.0), [(0.5, 0.2)], "x")
    assert "<path" in (tmp_path / "l.svg").read_text()
