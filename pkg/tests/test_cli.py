from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from drpt.cli import main
from drpt.io import load_csv, parse_grid, parse_ratio
from drpt.ratio import ExpressionRatio, PrecomputedRatio, TableRatio


def write_real_csv(path, seed=0, n=30, m=25, with_r=False):
    g = np.random.default_rng(seed)
    rows = [(1, *g.normal(size=2)) for _ in range(n)] + [(2, *(g.normal(size=2) + 0.4)) for _ in range(m)]
    order = g.permutation(len(rows))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "x1", "x2"] + (["r"] if with_r else []))
        for k in order:
            s, a, b = rows[k]
            w.writerow([s, a, b] + ([np.exp(0.4 * a - 0.08)] if with_r else []))
    return path


def write_cat_csv(path, seed=0):
    g = np.random.default_rng(seed)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "cat"])
        for _ in range(40):
            w.writerow([1, int(g.random() < 0.5)])
        for _ in range(40):
            w.writerow([2, int(g.random() < 0.75)])
    return path


# -- io ------------------------------------------------------------------------


def test_load_csv_orders_samples(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("sample,x1\n2,5.0\n1,1.0\n2,6.0\n1,2.0\n")
    s, r = load_csv(str(p))
    assert (s.n, s.m) == (2, 2) and r is None
    assert s.points[:, 0].tolist() == [1.0, 2.0, 5.0, 6.0]


def test_load_csv_categorical_and_r(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("sample,cat,r\n1,0,1\n2,1,3\n1,1,3\n")
    s, r = load_csv(str(p))
    assert s.categorical and s.points.tolist() == [0, 1, 1] and r.tolist() == [1.0, 3.0, 3.0]


def test_load_csv_rejects_bad_files(tmp_path):
    for text in ("x1\n1.0\n", "sample,x1\n3,1.0\n", "sample,x1,cat\n1,1.0,0\n", "sample,x2\n1,1.0\n"):
        p = tmp_path / "bad.csv"
        p.write_text(text)
        with pytest.raises(ValueError):
            load_csv(str(p))


def test_parse_ratio_forms(tmp_path):
    assert isinstance(parse_ratio("column:r", np.ones(3)), PrecomputedRatio)
    with pytest.raises(ValueError):
        parse_ratio("column:r", None)
    t = tmp_path / "t.json"
    t.write_text("[1, 3]")
    assert isinstance(parse_ratio(str(t)), TableRatio)
    t.write_text('{"0": 1, "1": 2.5}')
    assert parse_ratio(str(t)).as_array(2).tolist() == [1.0, 2.5]
    e = parse_ratio("exp(mu*x)", params={"mu": 0.5})
    assert isinstance(e, ExpressionRatio) and e.params == {"mu": 0.5}


def test_parse_grid():
    assert parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_grid("0.1:0.3:0.1") == [0.1, 0.2, 0.3]
    assert parse_grid("1,2.5,4") == [1.0, 2.5, 4.0]
    with pytest.raises(ValueError):
        parse_grid("1:0:0.1")
    with pytest.raises(ValueError):
        parse_grid(",")


# -- CLI -------------------------------------------------------------------------


def test_cli_test_json_schema(tmp_path, capsys):
    data = write_real_csv(tmp_path / "d.csv")
    assert main(["test", "--data", str(data), "--ratio", "exp(0.4*x1 - 0.08)", "--H", "19", "--seed", "4"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) >= {"p_value", "t_observed", "t_permuted", "lambda_hat", "config", "timing", "n", "m", "path"}
    assert out["timing"] is None and len(out["t_permuted"]) == 19 and (out["n"], out["m"]) == (30, 25)
    assert out["config"]["H"] == 19 and out["config"]["seed"] == 4


def test_cli_test_is_byte_identical_across_workers(tmp_path):
    data = write_real_csv(tmp_path / "d.csv", with_r=True)
    outs = []
    for w in (1, 2, 8):
        o = tmp_path / f"r{w}.json"
        main(["test", "--data", str(data), "--ratio", "column:r", "--H", "29", "--workers", str(w), "--json-out", str(o)])
        outs.append(o.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_cli_record_timing(tmp_path):
    data = write_real_csv(tmp_path / "d.csv")
    o = tmp_path / "t.json"
    main(["test", "--data", str(data), "--ratio", "1", "--H", "9", "--record-timing", "--json-out", str(o)])
    assert json.loads(o.read_text())["timing"] > 0


def test_cli_categorical_table(tmp_path):
    data = write_cat_csv(tmp_path / "c.csv")
    table = tmp_path / "r.json"
    table.write_text("[1, 3]")
    o = tmp_path / "c.json"
    main(["test", "--data", str(data), "--ratio", str(table), "--stat", "discrete", "--json-out", str(o)])
    res = json.loads(o.read_text())
    assert res["path"] == "exact" and res["config"]["statistic"] == "discrete"


def test_cli_invert_csv(tmp_path):
    data = write_real_csv(tmp_path / "d.csv")
    o = tmp_path / "inv.csv"
    main(["invert", "--data", str(data), "--ratio", "exp(mu*x1 - mu^2/2)", "--name", "mu", "--grid", "0:1:0.5",
          "--H", "19", "--csv-out", str(o)])
    rows = list(csv.reader(o.open()))
    assert rows[0] == ["candidate", "p_value", "accepted"]
    assert [float(r[0]) for r in rows[1:]] == [0.0, 0.5, 1.0]
    for r in rows[1:]:
        assert int(r[2]) == (float(r[1]) > 0.05)


def test_cli_sim_outputs(tmp_path, capsys):
    out = tmp_path / "sim"
    main(["sim", "--scenario", "e3", "--grid", "0,0.9", "--n", "30", "--m", "30", "--reps", "5", "--H", "9",
          "--out-dir", str(out)])
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json", "power.csv", "power.svg"]
    assert "e3 param=0.9" in capsys.readouterr().out


def test_cli_rejects_unknown_scenario():
    with pytest.raises(SystemExit):
        main(["sim", "--scenario", "nope", "--grid", "0"])
