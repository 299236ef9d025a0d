import json
import subprocess
import sys

import pytest

from dtnlab.cli import (
    EXIT_CHECK,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_SOLVER,
    ConfigError,
    build_config,
    keyexample_report,
    main,
    parse_pairs,
)
from dtnlab.oracle import OracleError


def read(path):
    return json.loads(path.read_text())


def test_parse_pairs():
    d = parse_pairs(["# comment", "", "h = 0.1  # trailing", "mu=1,2.5", "deflate = no"], "cfg")
    assert d == {"h": 0.1, "mu": (1.0, 2.5), "deflate": False}
    with pytest.raises(ConfigError, match="cfg:1"):
        parse_pairs(["nonsense"], "cfg")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_pairs(["colour = red"], "cfg")
    with pytest.raises(ConfigError, match="bad value"):
        parse_pairs(["h = fast"], "cfg")


@pytest.mark.parametrize("overrides", [["experiment=bogus"], ["q=1", "mu=2"], ["h=0"], ["zero_tol=-1"],
                                       ["domain=torus"], ["radius=-1"], ["problem=neumann"]])
def test_config_errors_write_nothing(tmp_path, overrides):
    out = tmp_path / "out"
    cmd = "run" if overrides[0].startswith("experiment") else "solve"
    assert main([cmd, "--out", str(out), *overrides]) == EXIT_CONFIG
    assert not out.exists()


def test_unknown_command_and_mismatch(tmp_path):
    assert main(["frobnicate"]) == EXIT_CONFIG
    cfg = tmp_path / "c.txt"
    cfg.write_text("experiment = weyl\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["solve", "--config", str(tmp_path / "missing.txt"), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert not (tmp_path / "o").exists()


def test_solve_disk_csv(tmp_path):
    assert main(["solve", "--out", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "k,value" and len(lines) == 13
    vals = [float(x.split(",")[1]) for x in lines[1:]]
    exact = [0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6]
    assert all(abs(v - e) <= 0.02 * max(1, e) for v, e in zip(vals, exact))
    spec = read(tmp_path / "spectrum.json")
    assert spec["kind"] == "steklov" and len(spec["values"]) == 12
    assert read(tmp_path / "report.json")["ok"]


def test_config_file_and_determinism(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("experiment = spectrum\nproblem = robin\nsigma = 1.5\ncount = 5\nh = 0.1\n")
    for name in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / name), "q=-2"]) == EXIT_OK
    for f in ("spectrum.csv", "spectrum.json", "report.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert read(tmp_path / "a" / "report.json")["config"]["q"] == -2.0


def test_duality_command(tmp_path):
    assert main(["duality", "--out", str(tmp_path), "q=-30", "h=0.1", "n_grid=11"]) == EXIT_OK
    d = read(tmp_path / "duality.json")
    assert d["d"] == 5 and len(d["certificates"]) == 6
    assert (tmp_path / "robin_curves.csv").read_text().startswith("sigma,lambda_1,")


def test_nodal_command_multi_mu(tmp_path):
    assert main(["nodal", "--out", str(tmp_path), "mu=1,20,40.6", "h=0.1"]) == EXIT_OK
    runs = read(tmp_path / "nodal.json")["runs"]
    assert [r["d"] for r in runs] == [0, 3, 6]
    assert (tmp_path / "nodal_02.csv").read_text().startswith("k,N_k,M_k,d,bound_ok,ratio")


def test_keyexample_command(tmp_path):
    assert main(["keyexample", "--out", str(tmp_path), "n=3", "eps=0.1", "h=0.025"]) == EXIT_OK
    r = read(tmp_path / "keyexample.json")
    assert (r["N_1"], r["M_1"], r["d"], r["bound_ok"]) == (6, 6, 6, True)
    assert r["sigma_1"] < -10 and r["courant_exceeded"]
    # with an oracle tolerance the coarse mesh is reported as a failed check, not a crash
    assert main(["keyexample", "--out", str(tmp_path / "t"), "h=0.05", "oracle_rtol=0.02"]) == EXIT_CHECK
    rep = read(tmp_path / "t" / "report.json")
    assert not rep["ok"] and any(c["name"] == "oracle_sigma_1" and not c["ok"] for c in rep["checks"])


@pytest.mark.parametrize("n,d,N,M", [(1, 1, 2, 2), (0, 0, 1, 1)])
def test_keyexample_report_small_n(n, d, N, M):
    r = keyexample_report(n, 0.1, 0.05)
    assert (r["d"], r["N_1"], r["M_1"], r["bound_ok"]) == (d, N, M, True)


def test_keyexample_eps_too_large(tmp_path):
    with pytest.raises(OracleError, match="too large"):
        keyexample_report(3, 15.0, 0.1)
    assert main(["keyexample", "--out", str(tmp_path), "eps=15", "h=0.1"]) == EXIT_SOLVER
    rep = read(tmp_path / "report.json")
    assert rep["exit_code"] == EXIT_SOLVER and "too large" in rep["error"]


def test_lemma_weyl_btilde_commands(tmp_path):
    assert main(["lemma", "--out", str(tmp_path / "l"), "h=0.025", "delta=0.2"]) == EXIT_OK
    assert read(tmp_path / "l" / "lemma.json")["N"] <= 30
    assert main(["weyl", "--out", str(tmp_path / "w"), "h=0.0125"]) == EXIT_OK
    assert main(["weyl", "--out", str(tmp_path / "w2"), "h=0.05"]) == EXIT_CHECK
    assert main(["btilde", "--out", str(tmp_path / "b"), "q=-1", "h=0.025"]) == EXIT_OK
    assert (tmp_path / "b" / "btilde.csv").read_text().startswith("k,r_k")


def test_solver_failure_exit(tmp_path):
    assert main(["solve", "--out", str(tmp_path), "problem=dirichlet", "count=100000", "h=0.2"]) == EXIT_SOLVER
    assert read(tmp_path / "report.json")["error"].startswith("SpectrumError")


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "dtnlab", "solve", "--out", str(tmp_path), "h=0.2", "count=4"],
                       capture_output=True, text=True)
    assert p.returncode == 0 and "spectrum: ok" in p.stdout
