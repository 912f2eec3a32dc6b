"""Command-line experiment runner.

``exochemo --mode stationary --D 0.1`` or ``exochemo --config exp.json``.
Each run writes CSV/JSON artifacts to the output directory, prints one
PASS/FAIL line per check and exits with

* 0 when every check passes,
* 2 on a solver failure,
* 3 when a check fails,
* 4 on an invalid configuration.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

from . import io
from .diagnostics import fit_decay_rate, mass_audit, refinement_ladder, self_convergence
from .energy import solve_perturbation_direct, to_perturbation
from .errors import ConfigError, ExochemoError, InsufficientData, PositivityViolation
from .evolution import SchemeParams, evolve, make_initial_data, reference_for
from .grid import Grid
from .stationary import ModelParams, solve_stationary, stationary_sweep, verify_stationary

EXIT_OK, EXIT_SOLVER, EXIT_VIOLATION, EXIT_CONFIG = 0, 2, 3, 4

DEFAULTS: dict[str, Any] = {
    "mode": "stationary",
    "model": {"D": 0.1, "v_star": 1.0, "M": 1.0},
    "grid": {"n": 401},
    "scheme": {"dt": 1e-4, "T": 20.0, "sample_every": 100, "face": "exponential"},
    "perturbation": {"eps": 0.01, "mode": "cosine"},
    "sweep": {"D_values": [0.1, 0.05, 0.02]},
    "convergence": {"levels": 4},
    "output_dir": "exochemo_out",
    "seed": 0,
    "timestamp": True,
}


def load_schema() -> dict:
    return json.loads(resources.files("exochemo").joinpath("config.schema.json").read_text())


@dataclass
class ExperimentConfig:
    mode: str
    model: ModelParams
    n: int
    dt: float
    T: float
    sample_every: int
    face: str
    eps: float
    perturbation_mode: str
    D_values: list[float]
    levels: int
    output_dir: Path
    seed: int = 0
    timestamp: bool = True
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """Validate ``data`` against the schema and fill defaults for optional sections."""
        try:
            jsonschema.validate(data, load_schema())
        except jsonschema.ValidationError as exc:
            path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid config at {path}: {exc.message}") from None
        merged = copy.deepcopy(DEFAULTS)
        for key, val in data.items():
            if isinstance(val, dict):
                merged[key] = {**merged.get(key, {}), **val}
            else:
                merged[key] = val
        m, s, p = merged["model"], merged["scheme"], merged["perturbation"]
        try:
            model = ModelParams(D=float(m["D"]), v_star=float(m["v_star"]), M=float(m["M"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cls(
            mode=merged["mode"],
            model=model,
            n=int(merged["grid"]["n"]),
            dt=float(s["dt"]),
            T=float(s["T"]),
            sample_every=int(s["sample_every"]),
            face=s["face"],
            eps=float(p["eps"]),
            perturbation_mode=p["mode"],
            D_values=[float(d) for d in merged["sweep"]["D_values"]],
            levels=int(merged["convergence"]["levels"]),
            output_dir=Path(merged["output_dir"]),
            seed=int(merged["seed"]),
            timestamp=bool(merged["timestamp"]),
            raw=merged,
        )

    @property
    def scheme(self) -> SchemeParams:
        return SchemeParams(self.dt, self.T, sample_every=self.sample_every, face=self.face)


@dataclass
class Verdict:
    check: str
    passed: bool
    measured: float
    bound: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.check}: measured={self.measured:.6g} bound={self.bound:.6g}"


@dataclass
class RunSummary:
    config: dict
    verdicts: list[Verdict] = field(default_factory=list)
    artifacts: dict[str, str] = field(default_factory=dict)
    results: dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0
    exit_code: int = EXIT_OK
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(v.passed for v in self.verdicts)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["verdicts"] = [dict(check=v.check, passed=v.passed, measured=v.measured, bound=v.bound)
                         for v in self.verdicts]
        return d


def _check(out: list, name: str, measured, bound, ok: bool):
    measured = float("nan") if measured is None else float(measured)
    out.append(Verdict(name, bool(ok), measured, float(bound)))


# -- pipelines ---------------------------------------------------------------

def _stationary_checks(sol, verdicts, prefix=""):
    rep = verify_stationary(sol)
    c = rep.checks()
    p = sol.params
    _check(verdicts, prefix + "residual", sol.residual_inf, max(1e-10, rep.residual_floor), c["residual"])
    _check(verdicts, prefix + "identity", rep.identity_sup, 1e-12 * max(1.0, rep.u_max), c["identity"])
    _check(verdicts, prefix + "v_positive", rep.v_min, 0.0, c["v_positive"])
    _check(verdicts, prefix + "v_bounded", rep.v_max, p.v_star + 1e-12, c["v_bounded"])
    _check(verdicts, prefix + "mass", rep.mass_error, 1e-10 * max(1.0, p.M), c["mass"])
    lo = p.M * math.exp(-p.v_star)
    _check(verdicts, prefix + "lambda_bracket", sol.lam, p.M,
           lo <= sol.lam <= p.M)
    _check(verdicts, prefix + "gradient_bound", rep.gradient_slack_min,
           -1e-8 * rep.gradient_scale, c["gradient_bound"])
    return rep


def _run_stationary(cfg, summary):
    grid = Grid(cfg.n)
    sol = solve_stationary(cfg.model, grid)
    rep = _stationary_checks(sol, summary.verdicts)
    out = cfg.output_dir
    summary.artifacts["stationary_csv"] = str(io.write_stationary_csv(out / "stationary.csv", sol, cfg.timestamp))
    summary.results.update(lambda_=sol.lam, residual_inf=sol.residual_inf, outer_iters=sol.outer_iters,
                           newton_iters=sol.newton_iters, layer_width=sol.layer_width,
                           report=rep.as_dict())


def _run_sweep(cfg, summary):
    grid = Grid(cfg.n)
    sols = stationary_sweep(cfg.model, cfg.D_values, grid)
    widths = []
    rows = []
    for sol in sols:
        _stationary_checks(sol, summary.verdicts, prefix=f"D={sol.params.D:g}:")
        widths.append(sol.layer_width)
        rows.append((sol.params.D, sol.lam, sol.layer_width, sol.residual_inf))
    known = [w for w in widths if w is not None]
    diffs = np.diff(known) if len(known) > 1 else np.array([-1.0])
    _check(summary.verdicts, "layer_width_decreasing", float(np.max(diffs)) if diffs.size else -1.0,
           0.0, len(known) == len(widths) and bool(np.all(diffs < 0)))
    summary.artifacts["sweep_csv"] = str(io.write_csv(
        cfg.output_dir / "sweep.csv", ("D", "lambda", "layer_width", "residual_inf"), rows, cfg.timestamp))
    summary.results.update(D_values=cfg.D_values, layer_widths=widths, lambdas=[s.lam for s in sols])


def _reference(cfg, grid):
    if cfg.model.D > 0:
        return solve_stationary(cfg.model, grid)
    return reference_for(cfg.model, grid)


def _evolve(cfg, keep_states=False):
    grid = Grid(cfg.n)
    ref = _reference(cfg, grid)
    u0, v0 = make_initial_data(ref, cfg.eps, cfg.perturbation_mode)
    traj = evolve(u0, v0, cfg.model, cfg.scheme, ref, keep_states=keep_states)
    return ref, traj


def _evolve_checks(cfg, traj, summary):
    audit = mass_audit(traj)
    _check(summary.verdicts, "mass_conservation", audit.max_abs_drift, audit.tolerance, audit.passed)
    min_u = float(np.min(traj.column("min_u")))
    min_v = float(np.min(traj.column("min_v")))
    _check(summary.verdicts, "positivity_u", min_u, 0.0, min_u > 0)
    _check(summary.verdicts, "positivity_v", min_v, 0.0, min_v >= 0)
    if cfg.eps == 0:
        err = float(np.nanmax(traj.column("linf_u_err")))
        _check(summary.verdicts, "stationary_persistence", err, 1e-6, err <= 1e-6)
    summary.results.update(max_mass_drift=audit.max_abs_drift, min_u=min_u, min_v=min_v)


def _write_traj(cfg, traj, summary):
    out = cfg.output_dir
    summary.artifacts["trajectory_csv"] = str(io.write_trajectory_csv(out / "trajectory.csv", traj, cfg.timestamp))
    summary.artifacts["energies_csv"] = str(io.write_energies_csv(out / "energies.csv", traj, cfg.timestamp))


def _run_evolve(cfg, summary):
    ref, traj = _evolve(cfg)
    _evolve_checks(cfg, traj, summary)
    _write_traj(cfg, traj, summary)
    if cfg.model.D > 0:
        summary.artifacts["stationary_csv"] = str(io.write_stationary_csv(
            cfg.output_dir / "stationary.csv", ref, cfg.timestamp))


def _fit(summary, name, t, y, floor=1e-13):
    try:
        return fit_decay_rate(t, y, floor=floor)
    except InsufficientData as exc:
        summary.results[f"{name}_fit_error"] = str(exc)
        return None


def _run_decay(cfg, summary):
    if cfg.eps == 0:
        raise ConfigError("decay mode needs eps > 0")
    ref, traj = _evolve(cfg)
    _evolve_checks(cfg, traj, summary)
    _write_traj(cfg, traj, summary)
    t = traj.times
    v = summary.verdicts
    eu = traj.column("linf_u_err")
    if cfg.model.D > 0:
        fit = _fit(summary, "u", t, eu)
        _check(v, "decay_rate_positive", fit.alpha if fit else None, 0.0, bool(fit and fit.alpha > 0))
        _check(v, "decay_fit_r2", fit.r_squared if fit else None, 0.999, bool(fit and fit.r_squared >= 0.999))
        ratio = eu[-1] / eu[0]
        _check(v, "error_ratio", ratio, 1e-3, ratio <= 1e-3)
        E = traj.column("E_weighted")
        incr = float(np.max(np.diff(E))) / E[0]
        _check(v, "energy_nonincreasing", incr, 1e-10, incr <= 1e-10)
        efit = _fit(summary, "energy", t, E, floor=1e-26)
        _check(v, "energy_log_fit_r2", efit.r_squared if efit else None, 0.999,
               bool(efit and efit.r_squared >= 0.999))
        summary.results.update(fit_u=asdict(fit) if fit else None, fit_energy=asdict(efit) if efit else None)
    else:
        M = cfg.model.M
        fv = _fit(summary, "v", t, traj.column("linf_v_err"))
        a = fv.alpha if fv else None
        _check(v, "v_rate_bracket", a, 1.5 * M, bool(fv and 0.5 * M <= a <= 1.5 * M))
        _check(v, "v_rate_near_M", abs(a - M) / M if fv else None, 0.1, bool(fv and abs(a - M) <= 0.1 * M))
        fu = _fit(summary, "u", t, eu)
        _check(v, "u_rate_positive", fu.alpha if fu else None, 0.0, bool(fu and fu.alpha > 0))
        _check(v, "u_fit_r2", fu.r_squared if fu else None, 0.99, bool(fu and fu.r_squared >= 0.99))
        summary.results.update(fit_v=asdict(fv) if fv else None, fit_u=asdict(fu) if fu else None)


def _run_oracle(cfg, summary):
    ref, traj = _evolve(cfg, keep_states=True)
    _evolve_checks(cfg, traj, summary)
    p0 = to_perturbation(traj.states[0], ref)
    direct = solve_perturbation_direct(p0, cfg.model, ref, cfg.scheme)
    if len(direct.states) != len(traj.states):
        raise ExochemoError("primal and direct runs sampled different times")
    d_phi = d_psi = 0.0
    for s, q in zip(traj.states, direct.states):
        p = to_perturbation(s, ref)
        d_phi = max(d_phi, float(np.max(np.abs(p.phi.values - q.phi.values))))
        d_psi = max(d_psi, float(np.max(np.abs(p.psi.values - q.psi.values))))
    _check(summary.verdicts, "oracle_phi", d_phi, 1e-4, d_phi <= 1e-4)
    _check(summary.verdicts, "oracle_psi", d_psi, 1e-4, d_psi <= 1e-4)
    rows = [(s.t, s.phi.values.max(), s.psi.values.max()) for s in direct.states]
    summary.artifacts["direct_csv"] = str(io.write_csv(
        cfg.output_dir / "perturbation_direct.csv", ("t", "max_phi", "max_psi"), rows, cfg.timestamp))
    _write_traj(cfg, traj, summary)
    summary.results.update(sup_phi_discrepancy=d_phi, sup_psi_discrepancy=d_psi)


def _run_convergence(cfg, summary):
    ladder = refinement_ladder(cfg.n, cfg.dt, cfg.levels)
    rep = self_convergence(cfg.model, cfg.eps, cfg.T, ladder, cfg.perturbation_mode)
    v = summary.verdicts
    if rep.degenerate:
        spread = max(rep.perturbation_differences_u + rep.perturbation_differences_v)
        _check(v, "degenerate", spread, 1e-8, True)
    else:
        for tag, orders in (("u", rep.observed_orders_u), ("v", rep.observed_orders_v)):
            lo, hi = min(orders), max(orders)
            _check(v, f"order_{tag}_min", lo, 1.8, lo >= 1.8)
            _check(v, f"order_{tag}_max", hi, 2.2, hi <= 2.2)
    rows = [(n, dt, eu, ev, du, dv) for (n, dt), eu, ev, du, dv in
            zip(rep.grids, rep.errors_u, rep.errors_v, rep.differences_u, rep.differences_v)]
    summary.artifacts["convergence_csv"] = str(io.write_csv(
        cfg.output_dir / "convergence.csv",
        ("n", "dt", "err_u_vs_finest", "err_v_vs_finest", "diff_u_next", "diff_v_next"), rows, cfg.timestamp))
    summary.results.update(convergence=asdict(rep))


PIPELINES = {
    "stationary": _run_stationary,
    "sweep": _run_sweep,
    "evolve": _run_evolve,
    "decay": _run_decay,
    "oracle": _run_oracle,
    "convergence": _run_convergence,
}


def run(config) -> RunSummary:
    """Execute one experiment.  ``config`` is an ``ExperimentConfig`` or a raw dict.

    Solver failures are recorded in the summary (``exit_code`` 2) rather
    than raised; configuration errors raise ``ConfigError``.
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    summary = RunSummary(config=cfg.raw)
    start = time.perf_counter()
    try:
        PIPELINES[cfg.mode](cfg, summary)
    except ConfigError:
        raise
    except PositivityViolation as exc:
        summary.error = f"{type(exc).__name__}: {exc}"
        summary.exit_code = EXIT_VIOLATION
    except ExochemoError as exc:
        summary.error = f"{type(exc).__name__}: {exc}"
        summary.exit_code = EXIT_SOLVER
    summary.wall_time = time.perf_counter() - start
    if summary.error is None:
        summary.exit_code = EXIT_OK if summary.passed else EXIT_VIOLATION
    path = io.write_json(cfg.output_dir / "summary.json", summary.as_dict(), timestamp=cfg.timestamp)
    summary.artifacts["summary_json"] = str(path)
    return summary


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{message}\n{self.format_usage()}")


def _build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="exochemo", description="Exogenous chemotaxis experiments.")
    ap.add_argument("--config", type=Path, help="JSON experiment file, loaded before the flags")
    ap.add_argument("--mode", choices=sorted(PIPELINES))
    ap.add_argument("--D", type=float)
    ap.add_argument("--vstar", type=float)
    ap.add_argument("--mass", type=float)
    ap.add_argument("--n", type=int)
    ap.add_argument("--dt", type=float)
    ap.add_argument("--T", type=float)
    ap.add_argument("--eps", type=float)
    ap.add_argument("--sample-every", type=int)
    ap.add_argument("--out", type=str)
    ap.add_argument("--no-timestamp", action="store_true",
                    help="omit the generation-time line from CSV and JSON artifacts")
    return ap


def parse_flags(argv) -> ExperimentConfig:
    """Build a config from ``--config`` (if given), defaults and flag overrides."""
    args = _build_parser().parse_args(list(argv))
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    else:
        data = {k: copy.deepcopy(DEFAULTS[k]) for k in ("mode", "model", "grid")}
    data = copy.deepcopy(data)
    overrides = [
        ("mode", None, args.mode),
        ("model", "D", args.D),
        ("model", "v_star", args.vstar),
        ("model", "M", args.mass),
        ("grid", "n", args.n),
        ("scheme", "dt", args.dt),
        ("scheme", "T", args.T),
        ("scheme", "sample_every", args.sample_every),
        ("perturbation", "eps", args.eps),
        ("output_dir", None, args.out),
    ]
    for section, key, val in overrides:
        if val is None:
            continue
        if key is None:
            data[section] = val
        else:
            data.setdefault(section, {})[key] = val
    if args.no_timestamp:
        data["timestamp"] = False
    if data.get("mode") in ("evolve", "decay", "oracle", "convergence"):
        data.setdefault("scheme", {})
        data.setdefault("perturbation", {})
        for key in ("dt", "T"):
            data["scheme"].setdefault(key, DEFAULTS["scheme"][key])
        data["perturbation"].setdefault("eps", DEFAULTS["perturbation"]["eps"])
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_flags(argv)
        summary = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for v in summary.verdicts:
        print(v.line())
    if summary.error:
        print(f"ERROR {summary.error}")
    print(f"wall_time={summary.wall_time:.3f}s exit={summary.exit_code} "
          f"summary={summary.artifacts['summary_json']}")
    return summary.exit_code


if __name__ == "__main__":
    sys.exit(main())
