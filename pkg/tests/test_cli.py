import json
import math
from pathlib import Path

import pytest

from pulsefield.cli import main
from pulsefield.config import ConfigError, ExperimentConfig

NEUTRAL_CFG = """
[model]
model = lif
S = 2.1
gamma = 2.0

[coupling]
K = 0.0

[solver]
scheme = semilagrangian
n_theta = 256
cfl = 1.0
t_max = 1.5222612188617115
align_dt = true

[initial]
kind = vonmises
kappa = 2.0

[output]
dir = {out}
log_stride = 8

[run]
certify = false
"""

BLOWUP_CFG = """
[model]
model = lif
S = 2.1
gamma = 2.0

[coupling]
K = 0.1

[solver]
n_theta = 256
t_max = 50.0

[initial]
kind = vonmises
kappa = 1.0

[output]
dir = {out}

[run]
expect_blowup = {expect}
"""


def write_cfg(tmp_path, text, name="exp.cfg", **kw):
    p = tmp_path / name
    p.write_text(text.format(**kw))
    return p


def test_config_rejects_unknown_key(tmp_path):
    p = write_cfg(tmp_path, "[solver]\nn_tehta = 12\n[coupling]\nK = 0.1\n")
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.parse(p)
    assert "solver.n_tehta" in str(err.value)


def test_config_rejects_unknown_section(tmp_path):
    p = write_cfg(tmp_path, "[solvers]\nn_theta = 12\n")
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.parse(p)
    assert "solvers" in str(err.value)


def test_config_requires_coupling(tmp_path):
    p = write_cfg(tmp_path, "[model]\nmodel = lif\n")
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.parse(p)
    assert "coupling.K" in str(err.value)


def test_config_bad_value_path(tmp_path):
    p = write_cfg(tmp_path, "[coupling]\nK = fast\n")
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.parse(p)
    assert "coupling.K" in str(err.value)


def test_config_materializes_defaults(tmp_path):
    p = write_cfg(tmp_path, "[coupling]\nK = -0.1\n")
    cfg = ExperimentConfig.parse(p)
    r = cfg.resolved()
    assert r["solver"]["n_theta"] == 2048
    assert r["solver"]["scheme"] == "upwind"
    assert r["model"]["model"] == "lif"
    assert r["coupling"]["K"] == -0.1


def test_cli_exit_code_config_error(tmp_path, capsys):
    p = write_cfg(tmp_path, "[coupling]\nK = fast\n")
    assert main(["run", str(p)]) == 4
    assert "coupling.K" in capsys.readouterr().err


def test_cli_missing_config_is_config_error(tmp_path):
    assert main(["run", str(tmp_path / "nope.cfg")]) == 4


def test_run_neutral_scenario(tmp_path, capsys):
    p = write_cfg(tmp_path, NEUTRAL_CFG, out=tmp_path / "out")
    assert main(["run", str(p)]) == 0
    out = tmp_path / "out"
    assert (out / "resolved_config.json").exists()
    assert (out / "trajectory.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["blowup"] is None
    assert summary["exit_code"] == 0


def test_run_determinism_byte_identical(tmp_path):
    p = write_cfg(tmp_path, NEUTRAL_CFG, out=tmp_path / "a")
    assert main(["run", str(p)]) == 0
    q = write_cfg(tmp_path, NEUTRAL_CFG, name="exp2.cfg", out=tmp_path / "b")
    assert main(["run", str(q)]) == 0
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    b = (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert a == b


def test_unexpected_blowup_exit_code(tmp_path):
    p = write_cfg(tmp_path, BLOWUP_CFG, out=tmp_path / "out", expect="false")
    assert main(["run", str(p)]) == 2
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["blowup"]["kind"] == "flux"


def test_expected_blowup_exit_zero(tmp_path):
    p = write_cfg(tmp_path, BLOWUP_CFG, out=tmp_path / "out", expect="true")
    assert main(["run", str(p)]) == 0


def test_bundled_configs_resolve_by_name(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg_path = Path(__file__).resolve().parents[1]
    # resolution falls back to the packaged copies when no local file exists
    from pulsefield.cli import _resolve_config_path
    p = _resolve_config_path("neutral_k0.cfg")
    assert p.name == "neutral_k0.cfg"
    assert p.exists()


def test_stationary_subcommand_json(capsys):
    assert main(["stationary", "--model", "lif", "--S", "2.1", "--gamma", "2.0",
                 "--K", "-0.1"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["exists"] is True
    assert abs(payload["J_star"] - 0.53) < 0.02
    assert payload["K_upper"] == 1.0
    assert payload["K_lower"] is None
    assert payload["r"] > 0.0


def test_stationary_density_csv(tmp_path, capsys):
    out = tmp_path / "rho_star.csv"
    assert main(["stationary", "--model", "lif", "--S", "2.1", "--gamma", "2.0",
                 "--K", "-0.1", "--rho-csv", str(out)]) == 0
    capsys.readouterr()
    lines = out.read_text().splitlines()
    assert lines[0] == "theta,rho_star"
    assert len(lines) == 2050


def test_sweep_grid_refinement_cauchy(tmp_path):
    # terminal flux is Cauchy in the grid: successive refinements within 1e-3
    cfg = """
[model]
model = lif
S = 2.1
gamma = 2.0

[coupling]
K = -0.1

[solver]
t_max = 12.0

[initial]
kind = perturbed
epsilon = 0.2

[output]
dir = {out}

[run]
certify = false
"""
    p = write_cfg(tmp_path, cfg, out=tmp_path / "base")
    assert main(["sweep", "--config", str(p), "--param", "n_theta",
                 "--values", "512,1024,2048,4096",
                 "--out", str(tmp_path / "sw")]) == 0
    lines = (tmp_path / "sw" / "sweep.csv").read_text().splitlines()
    j_final = [float(ln.split(",")[5]) for ln in lines[1:]]
    assert all(ln.split(",")[2] == "ok" for ln in lines[1:])
    diffs = [abs(a - b) for a, b in zip(j_final, j_final[1:])]
    assert all(d < 1e-3 for d in diffs)


def test_simulate_and_certify_subcommands(tmp_path, capsys):
    out = tmp_path / "sim"
    assert main(["simulate", "--model", "lif", "--S", "2.1", "--gamma", "2.0",
                 "--K", "-0.1", "--ntheta", "256", "--tmax", "4.0",
                 "--ic", "perturbed", "--epsilon", "0.2",
                 "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["certify", "--trajectory", str(out / "trajectory.csv"),
                 "--model", "lif", "--S", "2.1", "--gamma", "2.0",
                 "--K", "-0.1"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["hypothesis_met"] is True
    assert payload["fraction_ok"] >= 0.99
    assert (out / "certification.json").exists()


def test_certify_flags_violations(tmp_path, capsys):
    # hand-built trajectory with V growing under a contracting model
    p = tmp_path / "trajectory.csv"
    rows = ["t,J0,mass,rho_min,rho_max,V,q_min,event"]
    v = 1.0
    for i in range(12):
        rows.append(f"{0.5 * i},0.5,1.0,0.2,0.4,{v},{2 * math.pi},")
        v *= 2.0
    p.write_text("\n".join(rows) + "\n")
    code = main(["certify", "--trajectory", str(p), "--model", "lif",
                 "--S", "2.1", "--gamma", "2.0", "--K", "-0.1"])
    assert code == 3
    payload = json.loads(capsys.readouterr().out)
    assert payload["violations"] > 0


def test_finite_subcommand(tmp_path, capsys):
    out = tmp_path / "fin"
    assert main(["finite", "--N", "20", "--model", "lif", "--S", "2.1",
                 "--gamma", "2.0", "--K", "-0.1", "--seed", "3",
                 "--nfirings", "200", "--out", str(out)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["n_events"] == 200
    assert (out / "firings.csv").exists()
    assert (out / "snapshots.csv").exists()


def test_run_dumps_quantile_profiles(tmp_path):
    cfg = """
[model]
model = lif
S = 2.1
gamma = 2.0

[coupling]
K = -0.1

[solver]
n_theta = 256
t_max = 1.0

[initial]
kind = vonmises
kappa = 1.0

[output]
dir = {out}
snapshot_times = 0.5
dump_quantiles = true

[run]
certify = false
"""
    p = write_cfg(tmp_path, cfg, out=tmp_path / "out")
    assert main(["run", str(p)]) == 0
    files = sorted((tmp_path / "out").glob("quantiles_t*.csv"))
    assert len(files) == 2
    lines = files[0].read_text().splitlines()
    assert lines[0] == "phi,Q,q"
    phi, q_col = [], []
    for ln in lines[1:]:
        a, b, c = ln.split(",")
        phi.append(float(a))
        q_col.append(float(c))
    import numpy as np
    # q is a quantile density: its integral over the index recovers 2*pi
    total = float(np.sum(np.asarray(q_col[:-1]) * np.diff(phi)))
    assert abs(total - 2.0 * math.pi) < 1e-8


def test_run_scenario_with_finite_block(tmp_path):
    cfg = """
[model]
model = lif
S = 2.1
gamma = 2.0

[coupling]
K = -0.1

[solver]
n_theta = 256
t_max = 2.0

[initial]
kind = perturbed
epsilon = 0.1

[output]
dir = {out}

[finite]
enabled = true
N = 25
seed = 1
n_firings = 150
"""
    p = write_cfg(tmp_path, cfg, out=tmp_path / "out")
    assert main(["run", str(p)]) == 0
    fdir = tmp_path / "out" / "finite"
    assert (fdir / "firings.csv").exists()
    info = json.loads((fdir / "summary.json").read_text())
    assert info["n_events"] == 150
    assert info["V_N_nonincreasing_fraction"] > 0.5


def test_sweep_empty_values(tmp_path, capsys):
    p = write_cfg(tmp_path, NEUTRAL_CFG, out=tmp_path / "out")
    assert main(["sweep", "--config", str(p), "--param", "K", "--values", "",
                 "--out", str(tmp_path / "sw")]) == 0
    text = (tmp_path / "sw" / "sweep.csv").read_text()
    assert text.splitlines()[0].startswith("param,value")
    assert len(text.splitlines()) == 1


def test_sweep_existence_flags(tmp_path):
    cfg = """
[model]
model = lif
S = 2.1
gamma = 2.0

[coupling]
K = -0.1

[solver]
n_theta = 128
t_max = 0.5

[initial]
kind = vonmises
kappa = 0.5

[output]
dir = {out}

[run]
certify = false
expect_blowup = true
"""
    p = write_cfg(tmp_path, cfg, out=tmp_path / "base")
    assert main(["sweep", "--config", str(p), "--param", "K",
                 "--values", "0.9,0.99,1.01,1.1",
                 "--out", str(tmp_path / "sw")]) == 0
    lines = (tmp_path / "sw" / "sweep.csv").read_text().splitlines()
    flags = [ln.split(",")[3] for ln in lines[1:]]
    assert flags == ["True", "True", "False", "False"]
