import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from nbe import cli
from nbe.config import ConfigError, load_config
from nbe.estimators import InfeasibleError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
LN3 = math.log(3)


def run(tmp_path, command, config, *extra):
    return cli.main([command, "--config", str(config), "--out", str(tmp_path), "-q", *extra])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


SMALL = """
[system]
alphabet = 3
[measure]
kind = "uniform"
[compute]
epsilon = [0.4, 0.2]
n_min = 20
n_max = 120
seed = 1
samples = 20
[output]
prefix = "t"
"""


def test_entropy_rows(tmp_path):
    assert run(tmp_path, "entropy", CONFIGS / "sigma3.toml") == 0
    rows = read_csv(tmp_path / "sigma3_entropy.csv")
    assert list(rows[0]) == cli.COLUMNS
    bowen = [r for r in rows if r["quantity"] == "bowen"]
    assert len(bowen) == 3
    for r in bowen:
        assert abs(float(r["value"]) - (LN3 + float(r["epsilon"]))) <= 0.05
        assert r["n_min"] == "50" and r["n_max"] == "400"
    limit = [r for r in rows if r["quantity"] == "bowen_limit"]
    assert abs(float(limit[0]["value"]) - LN3) <= 0.02 * LN3
    side = json.loads((tmp_path / "sigma3_entropy.json").read_text())
    assert side["exit_status"] == 0
    assert len(side["provenance"]["config_sha256"]) == 64
    assert all(d["result"]["d_max"] for d in side["details"])


def test_oracle_check(tmp_path, capsys):
    cfg = write(tmp_path, "[system]\nalphabet = 2\n[compute]\nseed = 3\ninstances = 15\n"
                          "max_depth = 5\n")
    assert cli.main(["oracle-check", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("dp == brute-force") == 15
    rows = read_csv(tmp_path / "nbe_oracle-check.csv")
    assert all(r["converged"] == "true" for r in rows)


def test_missing_alphabet_exit_2_no_output(tmp_path):
    cfg = write(tmp_path, "[system]\nkind = \"full\"\n")
    out = tmp_path / "o"
    assert cli.main(["entropy", "--config", str(cfg), "--out", str(out), "-q"]) == 2
    assert not out.exists()


@pytest.mark.parametrize("text", [
    "[system]\nalphabet = 2\n[compute]\nn_min = 50\nn_max = 10\n",
    "[system]\nalphabet = 2\n[compute]\ndelta = 1.5\n",
    "[system]\nalphabet = 2\n[compute]\nepsilon = -0.1\n",
    "[system]\nalphabet = 2\nkind = \"sft\"\ntransitions = [[1, 1, 0], [1, 0, 0], [0, 0, 1]]\n",
    "[system]\nalphabet = 2\n[measure]\nkind = \"bernoulli\"\nprobs = [0.5, 0.25, 0.25]\n",
    "[system]\nalphabet = 2\n[bogus]\nx = 1\n",
    "[system]\nalphabet = 2\n[subset]\nkind = \"cylinders\"\ncylinders = [\"0000000000\"]\n"
    "[compute]\nepsilon = 0.3\nn_min = 2\nn_max = 4\n",
    "not toml at all [",
])
def test_bad_configs_exit_2(tmp_path, text):
    cfg = write(tmp_path, text)
    assert run(tmp_path, "entropy", cfg) == 2


def test_stochastic_needs_seed(tmp_path):
    cfg = write(tmp_path, "[system]\nalphabet = 2\n")
    with pytest.raises(ConfigError):
        load_config(cfg, command="sandwich")
    assert run(tmp_path, "sandwich", cfg) == 2
    assert run(tmp_path, "sandwich", cfg, "--seed", "4", "--n-min", "10", "--n-max", "60",
               "--epsilon", "0.2", "--samples", "10") == 0


def test_overrides_apply(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert run(tmp_path, "entropy", cfg, "--epsilon", "0.3", "--n-min", "15", "30") == 0
    rows = [r for r in read_csv(tmp_path / "t_entropy.csv") if r["quantity"] == "bowen"]
    assert {(r["epsilon"], r["n_min"]) for r in rows} == {("0.3", "15"), ("0.3", "30")}


def test_katok_brin_katok_spanning(tmp_path):
    cfg = write(tmp_path, SMALL)
    for cmd in ("katok", "brin-katok", "spanning"):
        assert run(tmp_path, cmd, cfg, "--delta", "0.01") == 0
    k = read_csv(tmp_path / "t_katok.csv")
    assert all(abs(float(r["value"]) - (LN3 + float(r["epsilon"]))) < 0.1 for r in k)
    bk = read_csv(tmp_path / "t_brin-katok.csv")
    assert {r["quantity"] for r in bk} == {"brin_katok", "brin_katok_limit"}
    sp = read_csv(tmp_path / "t_spanning.csv")
    assert {r["quantity"] for r in sp} == {"spanning", "spanning_limit"}


def test_frostman_command(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert run(tmp_path, "frostman", cfg, "--precision", "high", "--n-max", "60") == 0
    rows = read_csv(tmp_path / "t_frostman.csv")
    assert all(r["converged"] == "true" for r in rows)


def test_display_base(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert run(tmp_path, "entropy", cfg, "--display-base", "2") == 0
    rows = read_csv(tmp_path / "t_entropy.csv")
    r = next(r for r in rows if r["quantity"] == "bowen" and r["epsilon"] == "0.4")
    assert float(r["value"]) == pytest.approx((LN3 + 0.4) / math.log(2), abs=0.1)


def test_sweep_grid_sorted_and_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = CONFIGS / "sweep_sigma2.toml"
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(a), "-q"]) == 0
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(b), "-q"]) == 0
    ta = (a / "sweep_sweep.csv").read_bytes()
    assert ta == (b / "sweep_sweep.csv").read_bytes()
    rows = read_csv(a / "sweep_sweep.csv")
    assert len(rows) == 9
    keys = [(float(r["epsilon"]), int(r["n_min"])) for r in rows]
    assert keys == sorted(keys)


def test_thread_cap(tmp_path, monkeypatch):
    monkeypatch.setenv("NBE_THREADS", "1")
    cfg = load_config(CONFIGS / "sweep_sigma2.toml", command="entropy")
    assert cli._workers(cfg, 9) == 1
    monkeypatch.delenv("NBE_THREADS")
    assert cli._workers(cfg, 9) == 3


def test_replay_from_sidecar(tmp_path):
    cfg = write(tmp_path, SMALL)
    first, second = tmp_path / "first", tmp_path / "second"
    assert cli.main(["entropy", "--config", str(cfg), "--out", str(first), "-q",
                     "--epsilon", "0.35"]) == 0
    sidecar = first / "t_entropy.json"
    assert cli.main(["entropy", "--config", str(sidecar), "--out", str(second), "-q"]) == 0
    assert (first / "t_entropy.csv").read_bytes() == (second / "t_entropy.csv").read_bytes()


def test_json_that_is_not_a_sidecar(tmp_path):
    cfg = write(tmp_path, json.dumps({"system": {"alphabet": 2}}), "x.json")
    assert run(tmp_path, "entropy", cfg) == 2


def _failing(exc):
    def cell(cfg, eps, delta, n_min):
        raise exc
    return cell


@pytest.mark.parametrize("exc,code", [
    (InfeasibleError("no cover"), 3),
    (cli.InvariantBreach("broken"), 4),
    (RuntimeError("bug"), 1),
])
def test_error_categories_recorded_in_row(tmp_path, monkeypatch, exc, code):
    monkeypatch.setitem(cli.CELLS, "entropy", _failing(exc))
    cfg = write(tmp_path, SMALL)
    assert run(tmp_path, "entropy", cfg) == code
    rows = read_csv(tmp_path / "t_entropy.csv")
    assert len(rows) == 2 and all(r["value"] == "nan" and r["converged"] == "false" for r in rows)
    side = json.loads((tmp_path / "t_entropy.json").read_text())
    assert side["exit_status"] == code and side["errors"][0]["category"] == code


def test_sweep_continues_after_cell_failure(tmp_path, monkeypatch):
    real = cli.cell_entropy

    def flaky(cfg, eps, delta, n_min):
        if eps == 0.4:
            raise cli.InvariantBreach("injected")
        return real(cfg, eps, delta, n_min)

    monkeypatch.setitem(cli.CELLS, "entropy", flaky)
    monkeypatch.setenv("NBE_THREADS", "1")
    cfg = write(tmp_path, SMALL + "[sweep]\nquantity = \"entropy\"\n")
    assert run(tmp_path, "sweep", cfg) == 4
    rows = read_csv(tmp_path / "t_sweep.csv")
    assert len(rows) == 2
    assert {r["value"] == "nan" for r in rows} == {True, False}


def test_console_script_entry_point(tmp_path):
    cfg = write(tmp_path, SMALL)
    res = subprocess.run([sys.executable, "-m", "nbe.cli", "entropy", "--config", str(cfg),
                          "--out", str(tmp_path), "--epsilon", "0.3"],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "wrote" in res.stdout
