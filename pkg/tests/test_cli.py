import json
import subprocess
import sys

import numpy as np
import pytest

from exochemo import cli, io
from exochemo.errors import ConfigError


def _base(tmp_path, **over):
    cfg = {"mode": "stationary", "model": {"D": 0.1, "v_star": 1.0, "M": 1.0}, "grid": {"n": 401},
           "output_dir": str(tmp_path / "out"), "timestamp": False}
    cfg.update(over)
    return cfg


def test_parse_flags_full():
    cfg = cli.parse_flags(["--mode", "evolve", "--D", "0.1", "--vstar", "1", "--mass", "1", "--n", "401",
                           "--dt", "1e-4", "--T", "20", "--eps", "0.01", "--out", "run1"])
    assert cfg.mode == "evolve" and cfg.model.D == 0.1 and cfg.n == 401
    assert cfg.dt == 1e-4 and cfg.T == 20 and cfg.eps == 0.01
    assert str(cfg.output_dir) == "run1"


def test_parse_flags_config_file_with_override(tmp_path):
    path = tmp_path / "exp.json"
    cfg = _base(tmp_path, mode="evolve", scheme={"dt": 1e-4, "T": 1.0}, perturbation={"eps": 0.01})
    path.write_text(json.dumps(cfg))
    out = cli.parse_flags(["--config", str(path), "--eps", "0.02"])
    assert out.eps == 0.02 and out.T == 1.0 and out.mode == "evolve"


@pytest.mark.parametrize("argv", [["--D", "-1"], ["--n", "2"], ["--mode", "nope"], ["--dt", "abc"],
                                  ["--mass", "0"]])
def test_parse_flags_rejects(argv):
    with pytest.raises(ConfigError):
        cli.parse_flags(argv)


def test_bad_config_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        cli.parse_flags(["--config", str(p)])
    with pytest.raises(ConfigError):
        cli.parse_flags(["--config", str(tmp_path / "missing.json")])


def test_missing_mass_is_config_error(tmp_path):
    cfg = _base(tmp_path)
    del cfg["model"]["M"]
    with pytest.raises(ConfigError):
        cli.run(cfg)
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    assert cli.main(["--config", str(path)]) == cli.EXIT_CONFIG


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError):
        cli.run(_base(tmp_path, colour="red"))


def test_stationary_mode(tmp_path):
    s = cli.run(_base(tmp_path))
    assert s.exit_code == 0 and s.passed
    data = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert data["results"]["residual_inf"] < 1e-10
    assert 0.3679 < data["results"]["lambda_"] < 1.0
    assert all(v["passed"] for v in data["verdicts"])
    names = [v.check for v in s.verdicts]
    assert len(names) == len(set(names))
    table = io.read_csv(s.artifacts["stationary_csv"])
    assert set(table) == {"x", "v_bar", "u_bar"} and len(table["x"]) == 401


def test_evolve_zero_eps(tmp_path):
    cfg = _base(tmp_path, mode="evolve", scheme={"dt": 1e-4, "T": 0.5, "sample_every": 500},
                perturbation={"eps": 0.0})
    s = cli.run(cfg)
    assert s.exit_code == 0
    assert any(v.check == "stationary_persistence" and v.passed for v in s.verdicts)
    with open(s.artifacts["trajectory_csv"]) as fh:
        header = fh.readline().strip().split(",")
    assert header == list(io.TRAJECTORY_COLUMNS)
    mass = io.read_csv(s.artifacts["trajectory_csv"])["mass"]
    assert np.ptp(mass) <= 1e-14
    for path in s.artifacts.values():
        assert (tmp_path / "out").exists() and open(path).read()


def test_empty_cells_for_missing_diagnostics(tmp_path):
    cfg = _base(tmp_path, mode="evolve", model={"D": 0.0, "v_star": 1.0, "M": 1.0},
                scheme={"dt": 1e-4, "T": 0.05}, perturbation={"eps": 0.01})
    s = cli.run(cfg)
    t = io.read_csv(s.artifacts["trajectory_csv"])
    assert np.all(np.isnan(t["E_weighted"]))
    e = io.read_csv(s.artifacts["energies_csv"])
    assert np.all(np.isfinite(e["E_d0"]))


def test_deterministic_bodies(tmp_path):
    runs = []
    for k, stamp in enumerate((True, True, False)):
        cfg = _base(tmp_path, mode="evolve", scheme={"dt": 1e-4, "T": 0.05}, perturbation={"eps": 0.01},
                    output_dir=str(tmp_path / f"r{k}"), timestamp=stamp)
        runs.append(cli.run(cfg))
    bodies = []
    for s in runs:
        lines = open(s.artifacts["trajectory_csv"]).read().splitlines()
        bodies.append([ln for ln in lines if not ln.startswith("#")])
    assert bodies[0] == bodies[1] == bodies[2]
    assert open(runs[0].artifacts["trajectory_csv"]).readline().startswith("# generated")
    assert not open(runs[2].artifacts["trajectory_csv"]).readline().startswith("#")


def test_solver_failure_exit_code(tmp_path):
    cfg = _base(tmp_path, mode="evolve", scheme={"dt": 0.5, "T": 1.0}, perturbation={"eps": 0.01})
    s = cli.run(cfg)
    assert s.exit_code == cli.EXIT_SOLVER and "StepSizeError" in s.error


def test_violation_exit_code(tmp_path):
    # far too short for a trailing-window fit: the decay checks fail, nothing crashes
    cfg = _base(tmp_path, mode="decay", scheme={"dt": 1e-4, "T": 0.01, "sample_every": 10},
                perturbation={"eps": 0.01})
    s = cli.run(cfg)
    assert s.exit_code == cli.EXIT_VIOLATION
    assert any(not v.passed for v in s.verdicts)


def test_positivity_violation_exit_code(tmp_path):
    cfg = _base(tmp_path, mode="evolve", scheme={"dt": 1e-4, "T": 0.01}, perturbation={"eps": 10.0})
    assert cli.run(cfg).exit_code == cli.EXIT_VIOLATION


def test_sweep_and_convergence_modes(tmp_path):
    s = cli.run(_base(tmp_path, mode="sweep", sweep={"D_values": [0.1, 0.05]}))
    assert s.exit_code == 0
    assert any(v.check == "layer_width_decreasing" for v in s.verdicts)
    cfg = _base(tmp_path, mode="convergence", model={"D": 0.0, "v_star": 1.0, "M": 1.0}, grid={"n": 41},
                scheme={"dt": 4e-3, "T": 0.2}, perturbation={"eps": 0.01}, convergence={"levels": 3})
    s = cli.run(cfg)
    assert s.exit_code == 0, [v.line() for v in s.verdicts]


def test_oracle_mode_short(tmp_path):
    cfg = _base(tmp_path, mode="oracle", grid={"n": 101}, scheme={"dt": 1e-4, "T": 0.1},
                perturbation={"eps": 0.01})
    s = cli.run(cfg)
    assert s.exit_code == 0
    assert s.results["sup_phi_discrepancy"] < 1e-4


def test_main_prints_verdicts(tmp_path, capsys):
    code = cli.main(["--mode", "stationary", "--n", "101", "--out", str(tmp_path / "m"), "--no-timestamp"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.count("PASS") == 7 and "FAIL" not in out


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "exochemo", "--D", "-1"], capture_output=True, text=True)
    assert res.returncode == cli.EXIT_CONFIG
    assert "D" in res.stderr
