"""Config validation, the experiment runner and the command line."""
import csv
import hashlib
import json
import subprocess
import sys

import pytest

from jetlab import __version__
from jetlab.harness import (EXIT_CHECKS, EXIT_ERROR, EXIT_OK, SCHEMA, ConfigError,
                            config_hash, make_config, run_experiment)
from jetlab.harness.cli import main
from jetlab.harness.runner import OUT_ENV

PLATEAU_X = {"plateau": {"arg": {"coord": 0}, "inner": 0.3, "outer": 0.8}}
PLATEAU_Y = {"plateau": {"arg": {"coord": 1}, "inner": 0.3, "outer": 0.8}}
BUMP = {"mul": [PLATEAU_X, PLATEAU_Y]}
SMALL_GRID = {"per_delta": 4, "per_eps": 8, "other": 9, "per_axis": 21, "norm_grid": 11}

FIG7 = {"mode": "decompose", "m": 2, "r": 2,
        "sigma": {"coeffs": [{"alpha": [1, 1], "field": {"const": 1}},
                             {"alpha": [2, 2], "field": {"const": -1}}]}}
TRANSVERSE = {"mode": "transverse", "m": 2, "r": 1, "k": 1, "eps": 0.2, "delta": 0.02,
              "field": BUMP, "grid": SMALL_GRID}
SWEEP = {"mode": "sweep", "m": 2, "r": 1, "construction": "transverse",
         "kinds": ["conclusion_perp"], "field": BUMP, "refine": False, "grid": SMALL_GRID,
         "lattice": {"eps": [0.2, 0.15, 0.1], "ratio": [0.1, 0.075, 0.05]}}


def _write(tmp_path, raw, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return str(p)


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


# ------------------------------------------------------------------ config

def test_schema_is_a_valid_draft_2020_12_schema():
    import jsonschema
    jsonschema.Draft202012Validator.check_schema(SCHEMA)


@pytest.mark.parametrize("patch,msg", [
    ({"mode": "bogus"}, r"\$.mode"),
    ({"eps": -1}, r"\$.eps"),
    ({"k": 2}, r"\$.k"),
    ({"conormal": [1, 0, 0]}, r"\$.conormal"),
    ({"exact": True}, r"\$.exact"),
    ({"field": {"sqrt": {"coord": 0}}}, "expression"),
])
def test_config_errors_name_the_offending_path(patch, msg):
    with pytest.raises(ConfigError, match=msg):
        make_config({**TRANSVERSE, **patch})


def test_missing_required_key():
    raw = dict(TRANSVERSE)
    del raw["eps"]
    with pytest.raises(ConfigError, match="eps"):
        make_config(raw)


def test_hash_is_recomputable_from_written_config(tmp_path):
    cfg = make_config(FIG7)
    man, code = run_experiment(cfg, tmp_path)
    assert code == EXIT_OK
    text = (tmp_path / "config.json").read_text().rstrip("\n")
    assert hashlib.sha256(text.encode()).hexdigest() == man.config_hash
    assert config_hash(json.loads(text)) == man.config_hash
    listed = {f["name"]: f["sha256"] for f in _manifest(tmp_path)["files"]}
    for name, digest in listed.items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest


# ------------------------------------------------------------------ runner

def test_decompose_fig7(tmp_path):
    man, code = run_experiment(make_config(FIG7), tmp_path)
    assert code == EXIT_OK and man.checks["reconstruction"]
    rows = list(csv.DictReader((tmp_path / "terms.csv").open()))
    assert rows


def test_identical_configs_give_identical_csvs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment(make_config(TRANSVERSE), a)
    run_experiment(make_config(TRANSVERSE), b)
    csvs = sorted(p.name for p in a.glob("*.csv"))
    assert csvs
    for name in csvs:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_zero_field_transverse_is_all_zero(tmp_path):
    man, code = run_experiment(make_config({**TRANSVERSE, "field": {"const": 0}}), tmp_path)
    assert code == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())
    meas = rep["result"]["measurements"] if "result" in rep else rep["measurements"]
    assert meas["c0_error_uprime"] == 0 and meas["perp_sup"] == 0


def test_sweep_three_by_three(tmp_path):
    man, code = run_experiment(make_config(SWEEP), tmp_path)
    assert code == EXIT_OK, man.error
    rows = list(csv.reader((tmp_path / "sweep.csv").open()))
    assert len(rows) == 1 + 9
    assert sorted(f["name"] for f in man.files) == ["config.json", "report.json", "sweep.csv"]


def test_runtime_error_is_serialized(tmp_path):
    man, code = run_experiment(make_config({**TRANSVERSE, "field": {"const": 1}}), tmp_path)
    assert code == EXIT_ERROR
    m = _manifest(tmp_path)
    assert m["status"] == "error" and m["error"]["type"] == "SupportError"


def test_grid_scale_changes_config_and_hash(tmp_path):
    a, _ = run_experiment(make_config(TRANSVERSE), tmp_path / "a")
    b, _ = run_experiment(make_config(TRANSVERSE), tmp_path / "b", grid_scale=2.0)
    assert a.config_hash != b.config_hash
    assert json.loads((tmp_path / "b" / "config.json").read_text())["grid"]["per_delta"] == 8


# --------------------------------------------------------------------- CLI

def test_cli_version_and_schema(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0 and __version__ in capsys.readouterr().out
    assert main(["--schema"]) == 0
    assert json.loads(capsys.readouterr().out)["$schema"].endswith("2020-12/schema")


def test_cli_exit_codes(tmp_path):
    good = _write(tmp_path, FIG7)
    assert main(["decompose", "--config", good, "--out", str(tmp_path / "ok")]) == EXIT_OK
    assert main(["transverse", "--config", good, "--out", str(tmp_path / "mm")]) == EXIT_ERROR
    assert _manifest(tmp_path / "mm")["status"] == "error"
    bad = _write(tmp_path, {**TRANSVERSE, "field": {"sqrt": {"coord": 0}}}, "bad.json")
    assert main(["transverse", "--config", bad]) == EXIT_ERROR


def test_cli_exact_flag_only_for_decompose(tmp_path):
    good = _write(tmp_path, FIG7)
    assert main(["decompose", "--config", good, "--exact", "--out", str(tmp_path / "x")]) == 0
    tr = _write(tmp_path, TRANSVERSE, "tr.json")
    assert main(["transverse", "--config", tr, "--exact", "--out", str(tmp_path / "y")]) == 2


def test_structural_failure_exit_code_constant():
    assert EXIT_CHECKS == 1


def test_env_override_of_output_dir(tmp_path):
    cfg = _write(tmp_path, FIG7)
    out = tmp_path / "from_env"
    env = {**__import__("os").environ, OUT_ENV: str(out)}
    proc = subprocess.run([sys.executable, "-m", "jetlab.harness.cli", "decompose", "--config",
                           cfg], env=env, capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert (out / "manifest.json").exists()
    # --out still wins over the environment
    out2 = tmp_path / "from_flag"
    proc = subprocess.run([sys.executable, "-m", "jetlab.harness.cli", "decompose", "--config",
                           cfg, "--out", str(out2)], env=env, capture_output=True, text=True)
    assert proc.returncode == 0 and (out2 / "manifest.json").exists()
