from __future__ import annotations

import json
import math
import os

import numpy as np
import pytest

from conftest import octahedron
from mhvcurves import cli
from mhvcurves.realscatter import ComponentIndex, DensityGrid

G2 = ["--roots", "-2,-1,0,1,2", "--marked=-1.5,0.5,3,4:-1,6", "--type", "A"]
G1 = ["--roots", "-1,0,1", "--marked=-0.5,2,3,5:-1", "--type", "A"]


def write(tmp_path, name, obj) -> str:
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def wheel_graph_json():
    return {"vertices": [{"genus": 0, "legs": [i]} for i in range(1, 5)], "edges": [[1, 2], [2, 3], [3, 4], [4, 1]]}


def test_hypertree_check(tmp_path):
    f = write(tmp_path, "wheel.json", {"n": 4, "triples": [[1, 2, 4], [2, 3, 4]]})
    assert cli.run(["hypertree", "check", f]) == (0, {"verdict": "CT"})
    bad = write(tmp_path, "dup.json", {"n": 3, "triples": [[1, 2, 3], [1, 2, 3]]})
    code, body = cli.run(["hypertree", "check", bad])
    assert code == 0 and body["verdict"] == "not-CT"


def test_hypertree_from_tri_and_trinity(tmp_path):
    f = write(tmp_path, "octa.json", octahedron().to_json())
    code, body = cli.run(["hypertree", "from-tri", f])
    assert code == 0 and len(body["black"]["triples"]) == 4
    code, body = cli.run(["hypertree", "trinity", f, "--outer", "2"])
    assert code == 0 and body["outer_face"] == 2


def test_graph_enumerate(tmp_path):
    f = write(tmp_path, "wheel4.json", wheel_graph_json())
    code, body = cli.run(["graph", "enumerate", f, "--degree", "2", "--kind", "stable"])
    assert (code, body) == (0, [[1, 0, 1, 0], [0, 1, 0, 1]])
    code, body = cli.run(["graph", "stability", f, "--degrees", "2,0,0,0"])
    assert body["verdict"] == "unstable" and body["witness"] == [2, 3, 4]


def test_density_g1_csv_and_figure(tmp_path):
    out = str(tmp_path / "d.csv")
    fig = str(tmp_path / "d.png")
    code, body = cli.run(["density", "g1", *G1, "--out", out, "--figure", fig])
    assert code == 0
    assert abs(body["mass"] - 1) < 1e-6
    with open(out) as fh:
        assert fh.readline().strip() == "lambda,rho"
    assert len(cli.read_csv(out)) == 512 == body["rows"]
    with open(fig, "rb") as fh:
        assert fh.read(8) == b"\x89PNG\r\n\x1a\n"


def _grid(rho) -> DensityGrid:
    rho = np.asarray(rho, dtype=float)
    res = rho.shape[0]
    lam = np.tan((-np.pi + (np.arange(res) + 0.5) * 2 * np.pi / res) / 2)
    area = np.ones_like(rho)
    return DensityGrid((lam,) * rho.ndim, rho, area, (), 1.0, ComponentIndex.of(()), 0)


def test_csv_two_by_two_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    g = _grid(rng.random((2, 2)) * np.array([[1e-300, 1.0], [np.pi, 1e300]]))
    path = str(tmp_path / "g.csv")
    assert cli.emit_csv(g, path) == 4
    with open(path) as fh:
        assert fh.readline() == "lambda1,lambda2,rho\n"
    rows = cli.read_csv(path)
    assert rows == [tuple(float(x) for x in r) for r in g.rows()]


def test_csv_rejects_nan(tmp_path):
    g = _grid([[1.0, np.nan], [1.0, 1.0]])
    path = tmp_path / "nan.csv"
    with pytest.raises(cli.DomainError):
        cli.emit_csv(g, str(path))
    assert not path.exists()


def test_pgm_contract(tmp_path):
    data = cli.pgm_bytes(_grid(np.full((3, 5), 2.0)[:3, :3]))
    assert data.startswith(b"P5\n3 3\n255\n")
    assert set(data[len(b"P5\n3 3\n255\n") :]) == {255}
    rect = cli.pgm_bytes(_grid(np.arange(16.0).reshape(4, 4)))
    assert rect[:11] == b"P5\n4 4\n255\n"
    assert cli.pgm_bytes(_grid(np.arange(16.0).reshape(4, 4))) == rect
    with pytest.raises(cli.DomainError):
        cli.pgm_bytes(_grid(np.zeros((4, 4))))


def test_pgm_zero_band_through_singular_point(tmp_path):
    out = str(tmp_path / "c1.pgm")
    code, body = cli.run(["density", "g2", *G2, "--component", "1", "--resolution", "64", "--out", out])
    assert code == 0
    data = open(out, "rb").read()
    head = b"P5\n64 64\n255\n"
    assert data.startswith(head)
    img = np.frombuffer(data[len(head) :], dtype=np.uint8).reshape(64, 64)
    lam = np.tan((-np.pi + (np.arange(64) + 0.5) * 2 * np.pi / 64) / 2)
    o1, o2 = -5 / 6, -1.1  # chart image of the marked z's for this curve
    row = 63 - int(np.argmin(np.abs(lam - o2)))
    col = int(np.argmin(np.abs(lam - o1)))
    away = [c for c in range(64) if abs(c - col) > 2]
    assert np.all(img[row, away] == 0)
    assert img.max() == 255


def test_exit_codes_and_validate_only(tmp_path):
    code, body = cli.run(["hypertree", "bogus", "x.json"])
    assert code == 2 and body["kind"] == "input"
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 4,\n "triples": [1, 2')
    code, body = cli.run(["hypertree", "check", str(bad)])
    assert code == 2 and "line 2" in body["error"]
    assert cli.run([])[0] == 2
    code, body = cli.run(["nodal", "twochannel", "--p", "1,1,2,3"])
    assert code in (1, 2)
    code, body = cli.run(["mm", "build", "--roots", "0,1,2", "--t", "1.5,1.5", "--marked=3,4,5,6"])
    assert code == 2
    code, _ = cli.run(["mm", "build", "--roots", "0,1,2,3,4", "--t", "1.5,1.5"])
    assert code == 1
    wheel = write(tmp_path, "w.json", wheel_graph_json())
    for argv in (
        ["graph", "theta", wheel, "--degrees", "1,0,1,0", "--validate-only"],
        ["density", "g2", *G2, "--validate-only"],
        ["density", "mc", *G1, "--validate-only"],
        ["nodal", "g1", "--p", "1,2,3,4", "--validate-only"],
        ["mm", "preimages", *G2, "--target", "0.1,0.2", "--validate-only"],
    ):
        assert cli.run(argv) == (0, {"valid": True})
    assert cli.run(["density", "mc", *G1, "--samples", "10"])[0] == 2


def test_mc_determinism(tmp_path):
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    for path in (a, b):
        assert cli.main(["density", "mc", *G1, "--samples", "20000", "--seed", "5", "--out", path]) == 0
    assert open(a, "rb").read() == open(b, "rb").read()
    c = str(tmp_path / "c.csv")
    cli.main(["density", "mc", *G1, "--samples", "20000", "--seed", "6", "--out", c])
    assert open(a, "rb").read() != open(c, "rb").read()


def test_nodal_and_mm_commands(tmp_path, capsys):
    code, body = cli.run(["nodal", "g1", "--p", "1,2,3,4"])
    assert code == 0 and body["lambda_0"] == body["lambda_inf"]
    assert abs(complex(body["critical_points"][0]) - math.sqrt(24)) < 1e-12
    code, body = cli.run(["mm", "build", "--roots", "-1,0,1", "--t=-0.5", "--marked", "2,3,4,5"])
    assert code == 0 and body["residual"] < 1e-12
    triple = write(tmp_path, "m.json", {k: body[k] for k in ("U", "V", "W")})
    code, body = cli.run(["mm", "slopes", "--roots", "-1,0,1", "--marked", "2,3,4,5", "--triple", triple])
    assert code == 0 and abs(body["q"][0] - 0.734846922834953) < 1e-9
    out = str(tmp_path / "pre.json")
    assert cli.main(["mm", "preimages", *G2, "--target", "0.3,-0.7", "--out", out]) == 0
    assert json.load(open(out))["count"] == 4
    assert os.path.exists(out)
