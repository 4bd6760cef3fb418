import logging
import subprocess
import sys

import numpy as np
import pytest

from frdvasc import cli, steady
from frdvasc.cli import ConfigError, RunConfig, main, parse_config_text, read_field_csv

BENCH_CFG = """\
# benchmark steady state
params.A0 = 1
params.beta = 0.5
params.d = 10
params.tau = 0
bc.phi = dirichlet
mass = 1
"""


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def report(path):
    out = {}
    for line in path.read_text().splitlines():
        k, v = line.split(" = ", 1)
        out[k] = v
    return out


def test_parse_config_text():
    v = parse_config_text("grid.n = 32  # comment\nperturb.rho = 1 1 1e-3; 2 1 -2e-4\n\n")
    assert v == {"grid.n": 32, "perturb.rho": ((1, 1, 1e-3), (2, 1, -2e-4))}


@pytest.mark.parametrize("text", [
    "params.betta = 1", "grid.n = 8\ngrid.n = 16", "grid.n 8", "grid.n = eight",
    "perturb.rho = 1 1",
])
def test_parse_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_run_config_from_mapping():
    cfg = RunConfig.from_mapping(parse_config_text(BENCH_CFG + "grid.n = 16\nfit.start = 1\n"
                                                   "fit.end = 3\n"))
    assert cfg.params.beta == 0.5 and cfg.bc.dirichlet and cfg.grid.n == 16
    assert cfg.fit_window == (1.0, 3.0)
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"params.d": -1.0})


def test_bad_config_exits_2(tmp_path):
    assert main(["steady", "--config", write(tmp_path, "params.betta = 1\n")]) == 2


def test_steady_benchmark(tmp_path):
    cfg = write(tmp_path, BENCH_CFG + "grid.n = 64\n")
    assert main(["steady", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rep = report(tmp_path / "o" / "steady_report.txt")
    assert float(rep["residual_momentum_l2"]) <= 1e-10
    # midpoint quadrature on 1024^2; the 2048^2 oracle is tested with the steady module
    assert float(rep["K_relative_error"]) <= 5e-6
    assert int(rep["grid_n"]) == 64
    rho = read_field_csv(tmp_path / "o" / "rho_hat.csv")
    assert rho.shape == (64, 64) and rho.min() > 0
    assert float(np.mean(rho)) == pytest.approx(1.0, abs=1e-3)
    header = (tmp_path / "o" / "rho_hat.csv").read_text().splitlines()[0].split(",")
    assert float(header[0]) == pytest.approx(0.5 / 64)


def test_steady_resonance_exits_2_and_names_mode(tmp_path, caplog):
    d = (100.0 / 2.0 - 1.0) / (2 * np.pi**2)
    cfg = write(tmp_path, f"params.beta = 100\nparams.d = {float(d)!r}\nbc.phi = dirichlet\n"
                          "grid.n = 8\n")
    with caplog.at_level(logging.ERROR):
        assert main(["steady", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "(m, n) = (1, 1)" in caplog.text


def test_steady_needs_dirichlet(tmp_path):
    cfg = write(tmp_path, "bc.phi = neumann\ngrid.n = 8\n")
    assert main(["steady", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_steady_beta_zero_constant_density(tmp_path):
    cfg = write(tmp_path, "params.beta = 0\nbc.phi = dirichlet\ngrid.n = 8\nmass = 1.5\n")
    assert main(["steady", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rho = read_field_csv(tmp_path / "o" / "rho_hat.csv")
    assert np.allclose(rho, 1.5, rtol=1e-15)


def test_steady_nonpositive_density_exits_3(tmp_path):
    # d just above the (1, 1) resonance with large beta gives a sign-changing density
    lo, hi = 49 / (10 * np.pi**2), 49 / (2 * np.pi**2)
    codes = []
    for d in np.linspace(lo, hi, 41)[1:-1]:
        cfg = write(tmp_path, f"params.beta = 100\nparams.d = {float(d)!r}\nbc.phi = dirichlet\n"
                              "grid.n = 16\n")
        codes.append(main(["steady", "--config", cfg, "--out", str(tmp_path / "o")]))
    assert 3 in codes and set(codes) <= {0, 2, 3}


SIM = """\
params.beta = 0.5
params.d = 10
params.tau = 1
bc.phi = neumann
grid.n = 8
t_end = 0.5
sample_every = 0.05
"""


def test_simulate_unperturbed_is_quiet(tmp_path):
    cfg = write(tmp_path, SIM)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    lines = (tmp_path / "o" / "diagnostics.csv").read_text().splitlines()
    assert lines[0].startswith("# frdvasc diagnostics v1")
    cols = lines[1].split(",")
    assert cols == list(cli.CSV_COLUMNS)
    rows = [dict(zip(cols, ln.split(","))) for ln in lines[2:]]
    assert len(rows) == 11
    assert float(rows[-1]["t"]) == 0.5
    for r in rows:
        assert float(r["energy"]) <= 1e-24
        assert float(r["mass"]) == pytest.approx(1.0, abs=1e-14)
    fit = report(tmp_path / "o" / "decay_fit.txt")
    assert fit["status"] == "ok"


def test_simulate_is_deterministic(tmp_path):
    cfg = write(tmp_path, SIM + "perturb.random_modes = 3\nperturb.random_amp = 1e-3\nseed = 7\n"
                               "snapshot_every = 0.25\n")
    for name in ("a", "b"):
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / name)]) == 0
    for f in ("diagnostics.csv", "decay_fit.txt", "rho_t2.csv", "phi_t1.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_simulate_blow_up_exits_4(tmp_path):
    cfg = write(tmp_path, "params.beta = 1e7\nparams.tau = 0\nbc.phi = neumann\ngrid.n = 16\n"
                          "t_end = 1\nsample_every = 0.05\nperturb.rho = 1 1 1e-2\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 4
    fit = report(tmp_path / "o" / "decay_fit.txt")
    assert fit["status"] == "blow-up"
    assert 0.0 < float(fit["blowup_time"]) < 1.0
    assert "# blow-up at t =" in (tmp_path / "o" / "diagnostics.csv").read_text()


def test_simulate_nonpositive_initial_density_exits_3(tmp_path):
    cfg = write(tmp_path, SIM + "perturb.rho = 1 1 2.0\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_check_small_grid_passes(tmp_path, capsys):
    cfg = write(tmp_path, "check.n = 4\ncheck.steps = 50\n")
    assert main(["check", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "8/8 checks passed" in out


def test_check_fails_with_corrupted_k(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(steady, "MASS_PREFACTOR", 4.0)
    cfg = write(tmp_path, "check.n = 4\ncheck.steps = 10\n")
    assert main(["check", "--config", cfg]) == 1
    assert "FAIL  K coefficient" in capsys.readouterr().out


def test_module_entry_point_version():
    out = subprocess.run([sys.executable, "-m", "frdvasc", "--version"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and out.stdout.startswith("frdvasc ")
