import json
import os

import pytest

from sparselocal.cli import main

CONFIG = {
    "weights": {"family": "constant", "c": 2.0},
    "n_grid": [80],
    "replicas": 40,
    "depth": 2,
    "seed": "c0ffee",
    "vertex_weights": {"family": "gamma", "shape": 2.0, "scale": 1.0},
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(CONFIG))
    return str(path)


def test_missing_config_exits_2(tmp_path, capsys):
    assert main(["generate", "--config", str(tmp_path / "nope.json")]) == 2
    assert "config error" in capsys.readouterr().err


def test_malformed_config_line_anchored(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "weights": oops\n}')
    assert main(["generate", "--config", str(path)]) == 2
    err = capsys.readouterr().err
    assert ":2:" in err  # line number of the defect


def test_generate_deterministic(config_path, tmp_path, capsys):
    out = str(tmp_path / "out")
    assert main(["generate", "--config", config_path, "--out-dir", out]) == 0
    first = capsys.readouterr().out
    assert main(["generate", "--config", config_path, "--out-dir", out]) == 0
    assert capsys.readouterr().out == first
    assert first.startswith("n 80\n")
    assert "gamma_2" in first
    # c = 2 gives mean degree about 2, so about n edges
    edges = int(first.splitlines()[1].split()[1])
    assert 40 <= edges <= 130


def test_generate_seed_override_changes_output(config_path, tmp_path, capsys):
    out = str(tmp_path / "out")
    main(["generate", "--config", config_path, "--out-dir", out])
    base = capsys.readouterr().out
    main(["generate", "--config", config_path, "--out-dir", out, "--seed", "12345"])
    assert capsys.readouterr().out != base


def test_bounds_writes_grid_and_manifest(config_path, tmp_path, capsys):
    out = str(tmp_path / "outb")
    assert main(["bounds", "--config", config_path, "--out-dir", out]) == 0
    grid = os.path.join(out, "bounds_grid.csv")
    assert os.path.exists(grid)
    lines = open(grid).read().strip().splitlines()
    assert len(lines) == 1 + 2  # header + (1 n) x (2 levels)
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    assert manifest["outputs"] == ["bounds_grid.csv"]
    assert manifest["seed"] == "c0ffee".rjust(32, "0")


def test_clt_writes_csv_with_trend(config_path, tmp_path):
    out = str(tmp_path / "outc")
    assert main(["clt", "--config", config_path, "--out-dir", out]) == 0
    path = os.path.join(out, "clt_edge-sum.csv")
    header = open(path).readline().strip().split(",")
    assert "trend_ok" in header and "ks" in header and "n_over_sigma2" in header


def test_couple_check_ok(tmp_path):
    cfg = dict(CONFIG, weights={"family": "constant", "c": 1.0}, replicas=60,
               depth=1, n_grid=[150])
    cfg.pop("vertex_weights")
    path = tmp_path / "cc.json"
    path.write_text(json.dumps(cfg))
    out = str(tmp_path / "outk")
    assert main(["couple", "--config", str(path), "--out-dir", out, "--check"]) == 0
    assert os.path.exists(os.path.join(out, "coupling.csv"))
    assert os.path.exists(os.path.join(out, "coupling_outcomes.csv"))
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    assert set(manifest["outputs"]) == {"coupling.csv", "coupling_outcomes.csv"}


def test_rde_outputs(tmp_path):
    cfg = dict(CONFIG, weights={"family": "constant", "c": 0.5},
               rde_pop_size=2000, rde_iterations=8)
    path = tmp_path / "rde.json"
    path.write_text(json.dumps(cfg))
    out = str(tmp_path / "outr")
    assert main(["rde", "--config", str(path), "--out-dir", out, "--check"]) == 0
    assert os.path.exists(os.path.join(out, "rde_gaps.csv"))
    assert os.path.exists(os.path.join(out, "rde_population.csv"))


def test_matching_oracle_check(config_path, tmp_path):
    out = str(tmp_path / "outm")
    assert main(["matching-oracle", "--config", config_path, "--out-dir", out,
                 "--check", "--replicas", "60"]) == 0


def test_workers_do_not_change_csv_bytes(config_path, tmp_path):
    out1, out2 = str(tmp_path / "w1"), str(tmp_path / "w2")
    assert main(["clt", "--config", config_path, "--out-dir", out1,
                 "--workers", "1"]) == 0
    assert main(["clt", "--config", config_path, "--out-dir", out2,
                 "--workers", "2"]) == 0
    a = open(os.path.join(out1, "clt_edge-sum.csv"), "rb").read()
    b = open(os.path.join(out2, "clt_edge-sum.csv"), "rb").read()
    assert a == b


def test_app_flag_overrides_config(tmp_path):
    cfg = dict(CONFIG, n_grid=[14], replicas=30,
               edge_weights={"family": "gamma", "shape": 1.0, "scale": 1.0})
    path = tmp_path / "app.json"
    path.write_text(json.dumps(cfg))
    out = str(tmp_path / "outa")
    assert main(["clt", "--config", str(path), "--out-dir", out,
                 "--app", "matching"]) == 0
    assert os.path.exists(os.path.join(out, "clt_matching.csv"))


def test_env_seed_override(config_path, tmp_path, capsys, monkeypatch):
    out = str(tmp_path / "oute")
    main(["generate", "--config", config_path, "--out-dir", out])
    base = capsys.readouterr().out
    monkeypatch.setenv("SPARSELOCAL_SEED", "9999")
    main(["generate", "--config", config_path, "--out-dir", out])
    assert capsys.readouterr().out != base
    # explicit --seed wins over the environment
    main(["generate", "--config", config_path, "--out-dir", out, "--seed", "c0ffee"])
    assert capsys.readouterr().out == base
