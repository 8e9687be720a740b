import hashlib
import json

import pytest

from gp_mass.cli import load_config, parse_floats, run
from gp_mass.errors import ConfigError
from gp_mass.grid import read_field

MODEL = """
[model]
dim = 1
L = 10.0
n = {n}
potential1 = {{ kind = "harmonic", coeffs = {{ scale = 1.0 }} }}
potential2 = {{ kind = "harmonic" }}
mu1 = {mu1}
mu2 = {mu2}
beta = {beta}
"""


def write_cfg(tmp_path, name="cfg.toml", n=256, mu1=-1.0, mu2=-1.0, beta=0.5, extra=""):
    p = tmp_path / name
    p.write_text(MODEL.format(n=n, mu1=mu1, mu2=mu2, beta=beta) + extra)
    return str(p)


def test_eig_prints_lambda_and_dumps_phi(tmp_path, capsys):
    cfg = write_cfg(tmp_path, n=1024)
    out = tmp_path / "eig"
    assert run(["eig", "--config", cfg, "--out", str(out)]) == 0
    assert "lambda1 = 0.99997" in capsys.readouterr().out
    rec = json.loads((out / "eig.json").read_text())
    assert rec["lambda"] == pytest.approx(1.0, abs=1e-4)
    grid, phi = read_field(out / "phi1.gpf")
    assert grid.n == 1024 and phi.min() >= 0


def test_maximize_record_and_manifest(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "mx"
    code = run(["maximize", "--alpha", "2.5", "--rho1", "1", "--rho2", "1",
                "--config", cfg, "--out", str(out)])
    assert code == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["gamma"] > 0
    assert rec["tolerances"]["rtol"] == 1e-6
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 0
    assert {f["path"] for f in man["files"]} == {"solution.json", "u1.gpf", "u2.gpf"}
    for f in man["files"]:
        assert hashlib.sha256((out / f["path"]).read_bytes()).hexdigest() == f["sha256"]
    assert {"numpy", "scipy", "gp_mass", "python"} <= set(man["versions"])


def test_reruns_are_bit_identical(tmp_path):
    cfg = write_cfg(tmp_path)
    for d in ("a", "b"):
        assert run(["sweep", "--rho1", "1", "--rho2", "1", "--points", "4",
                    "--config", cfg, "--out", str(tmp_path / d), "--plot"]) == 0
    for name in ("sweep.csv", "sweep.json", "sweep.gp"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "sweep.csv").read_text().splitlines()
    assert header[0].startswith("# ") and "tolerances" in header[0]
    assert header[1] == "alpha,M,omega1,omega2,gamma,gamma_prime,e,e_prime,residual,verdict"


def test_json_config_fallback(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"model": {"n": 128, "mu1": -1, "mu2": -1, "beta": 0.5},
                             "maximize": {"alpha": 2.5, "rho1": 1, "rho2": 1}}))
    assert run(["maximize", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
    q = tmp_path / "cfg.conf"
    q.write_text(p.read_text())
    assert load_config(q)["model"]["n"] == 128


@pytest.mark.parametrize("argv", [["maximize", "--bogus"], ["frobnicate"], []])
def test_usage_errors_exit_2(argv, capsys):
    assert run(argv) == 2
    assert "usage" in capsys.readouterr().err


def test_missing_scattering_is_config_error(tmp_path):
    p = tmp_path / "cfg.toml"
    p.write_text("[model]\nn = 128\nmu1 = -1\nmu2 = -1\n")
    assert run(["maximize", "--alpha", "2.5", "--rho1", "1", "--rho2", "1",
                "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_exit_codes(tmp_path):
    cfg = write_cfg(tmp_path)
    base = ["--rho1", "1", "--rho2", "1", "--config", cfg, "--out", str(tmp_path / "o")]
    assert run(["maximize", "--alpha", "1.5", *base]) == 2
    assert run(["maximize", "--alpha", "2.5", "--rtol", "1e-30", *base]) == 3
    deg = write_cfg(tmp_path, "deg.toml", mu1=1.0, mu2=1.0, beta=-1.0)
    assert run(["maximize", "--alpha", "2.5", "--rho1", "1", "--rho2", "1",
                "--config", deg, "--out", str(tmp_path / "d")]) == 4
    assert run(["maximize", "--alpha", "2.5", "--rho1", "1", "--rho2", "1",
                "--config", str(tmp_path / "missing.toml"), "--out", str(tmp_path / "x")]) == 2


def test_thread_env_validation(tmp_path, monkeypatch):
    monkeypatch.setenv("GP_MASS_THREADS", "many")
    cfg = write_cfg(tmp_path)
    assert run(["maximize", "--alpha", "2.5", "--rho1", "1", "--rho2", "1",
                "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_bifurcate_outputs(tmp_path):
    cfg = write_cfg(tmp_path, mu1=1.0, mu2=1.0, beta=0.2, n=512)
    out = tmp_path / "bf"
    assert run(["bifurcate", "--config", cfg, "--eps-grid", "logspace:-4:-2:5",
                "--out", str(out)]) == 0
    lines = (out / "bifurcate.csv").read_text().splitlines()
    assert lines[1] == "eps,alpha,gamma,ratio_gamma_sqrt_eps,l2_dist_to_anchor"
    assert len(lines) == 7
    k = json.loads((out / "kernel.json").read_text())
    assert k["field_residual"] < 1e-6 and k["nondeg_value"] > 0


def test_evolve_and_stability(tmp_path):
    cfg = write_cfg(tmp_path, extra="\n[maximize]\nalpha = 2.5\nrho1 = 1.0\nrho2 = 1.0\n")
    out = tmp_path / "ev"
    assert run(["evolve", "--config", cfg, "--horizon", "0.5", "--delta", "1e-3",
                "--snapshots", "0.2", "--out", str(out)]) == 0
    lines = (out / "evolve.csv").read_text().splitlines()
    assert lines[1] == "t,mass1,mass2,energy,orbital_distance"
    assert len(lines) == 2 + 6
    assert (out / "psi1_t0.2.gpf").exists()
    out2 = tmp_path / "st"
    assert run(["stability", "--config", cfg, "--horizon", "0.3", "--pseeds", "0",
                "--kinds", "bump,rotation", "--out", str(out2), "--threads", "2"]) == 0
    rows = (out2 / "stability.csv").read_text().splitlines()[2:]
    assert len(rows) == 4


def test_acceptance_subset_with_degenerate(tmp_path, capsys):
    code = run(["acceptance", "--only", "1,2", "--degenerate", "--out", str(tmp_path / "acc")])
    out = capsys.readouterr().out
    assert code == 0
    assert "expected-fail" in out and "3/3 criteria passed" in out


def test_parse_floats():
    assert parse_floats("1,2.5") == [1.0, 2.5]
    assert parse_floats("logspace:-2:0:3") == pytest.approx([0.01, 0.1, 1.0])
    assert parse_floats([1, 2]) == [1.0, 2.0]
    with pytest.raises(ConfigError):
        parse_floats("a,b")
