import csv
import io
import json

import pytest

from switchover.cli import build_grid, experiment_from_mapping, main
from switchover.channel import ChannelParams


def call(capsys, *argv):
    rc = main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_region_six_corners(capsys):
    rc, out, _ = call(capsys, "region", "--epsilon", "0.25")
    assert rc == 0
    table = rows(out)
    assert table[0] == ["kind", "id", "x_1", "x_2", "rhs"]
    assert sum(r[0] == "corner" for r in table[1:]) == 6


def test_region_memoryless_single_facet(capsys):
    _, out, _ = call(capsys, "region", "--epsilon", "0.5")
    facets = [r for r in rows(out)[1:] if r[0] == "facet"]
    assert len(facets) == 1 and float(facets[0][-1]) == pytest.approx(0.5)


def test_region_asymmetric_and_outer(capsys):
    rc, out, _ = call(capsys, "region", "--p01", "0.2", "--p10", "0.1", "--outer")
    assert rc == 0
    kinds = {r[0] for r in rows(out)[1:]}
    assert {"corner", "facet", "outer_corner", "outer_facet"} <= kinds


def test_region_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["region", "--epsilon", "0.25", "--p01", "0.2"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["region"])
    assert exc.value.code == 2


def test_bound(capsys):
    rc, out, _ = call(capsys, "bound", "--n", "3", "--epsilon", "0.3")
    assert rc == 0 and float(out) == pytest.approx(0.65)


def test_tables_fbdc_and_olm(capsys):
    _, out, _ = call(capsys, "tables", "--epsilon", "0.40", "--policy", "fbdc")
    assert "thresholds: 0.757575758, 1, 1.32" in out
    assert out.count("\n[") == 4
    _, out, _ = call(capsys, "tables", "--epsilon", "0.40", "--policy", "olm")
    assert "thresholds: 0.666666667, 1, 1.5" in out
    with pytest.raises(SystemExit):
        main(["tables", "--epsilon", "0.4", "--policy", "mw"])


def test_simulate_row(capsys):
    rc, out, _ = call(capsys, "simulate", "--epsilon", "0.25", "--policy", "fbdc_table", "--rates", "0.1", "0.1",
                      "--frame", "5", "--horizon", "3000", "--seed", "1")
    assert rc == 0
    table = rows(out)
    assert table[0][:2] == ["lambda_1", "lambda_2"] and len(table) == 2
    assert table[1][table[0].index("stable")] == "1"


def test_simulate_bad_config_exit_2(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--config", str(tmp_path / "missing.json")])
    assert exc.value.code == 2


def _write(tmp_path, mapping):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(mapping))
    return str(path)


BASE = {"n": 2, "epsilon": 0.25, "arrivals": {"kind": "bernoulli", "rates": [0.0, 0.0]},
        "policy": {"kind": "fbdc_table"}, "frame_t": 5, "horizon": 2000, "seed": 4}


def test_sweep_byte_identical(capsys, tmp_path):
    cfg = _write(tmp_path, dict(BASE, grid={"points": [[0.1, 0.1], [0.2, 0.2]]}, replicates=2))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", cfg, "--out", str(a), "--jobs", "1"]) == 0
    assert main(["sweep", "--config", cfg, "--out", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(rows(a.read_text())) == 5
    assert "stable:" in capsys.readouterr().err


def test_sweep_empty_grid_header_only(capsys, tmp_path):
    cfg = _write(tmp_path, dict(BASE, grid={"points": []}))
    rc, out, _ = call(capsys, "sweep", "--config", cfg)
    assert rc == 0 and len(rows(out)) == 1


def test_sweep_failing_cell_exit_1(capsys, tmp_path):
    cfg = _write(tmp_path, dict(BASE, n=3, arrivals={"rates": [0.1, 0.1, 0.1]}, grid={"points": [[0.1, 0.1, 0.1]]}))
    rc, _, err = call(capsys, "sweep", "--config", cfg)
    assert rc == 1 and "cell 0" in err


def test_sweep_needs_config():
    with pytest.raises(SystemExit) as exc:
        main(["sweep"])
    assert exc.value.code == 2


def test_grid_axes_and_inside():
    flat = {"grid.start": [0.05, 0.05], "grid.stop": [0.3, 0.3], "grid.step": [0.05, 0.05]}
    assert len(build_grid(flat, 2, ChannelParams.symmetric(0.25))) == 36
    wide = {"grid.start": [0.05, 0.05], "grid.stop": [0.5, 0.5], "grid.step": [0.05, 0.05], "grid.inside": True}
    inside = build_grid(wide, 2, ChannelParams.symmetric(0.25))
    assert (0.3, 0.3) in inside and (0.3, 0.35) not in inside and len(inside) < 100
    assert len(build_grid(flat, 2, ChannelParams.symmetric(0.25), full=True)) == 26 * 26
    exp = experiment_from_mapping(dict(BASE, grid={"start": [0.1, 0.1], "stop": [0.1, 0.2], "step": [0.05, 0.05]}))
    assert exp.grid == ((0.1, 0.1), (0.1, 0.15), (0.1, 0.2))


def test_verify_pass_and_dump(capsys):
    rc, out, _ = call(capsys, "verify", "--epsilon", "0.25")
    assert rc == 0 and "FAIL" not in out and out.count("PASS") == 4
    rc, out, _ = call(capsys, "verify", "--epsilon", "0.25", "--dump")
    lines = out.splitlines()
    assert rc == 0 and len(lines) == 9 and all(len(l.split()) == 17 for l in lines)
