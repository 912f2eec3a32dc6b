"""Decay-rate fits, mass audits and self-convergence studies."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import InsufficientData
from .grid import Grid

__all__ = [
    "DecayFit",
    "fit_decay_rate",
    "MassAudit",
    "mass_audit",
    "ConvergenceReport",
    "self_convergence",
    "refinement_ladder",
]

MIN_FIT_POINTS = 5
MASS_TOL = 1e-10
DEGENERATE_TOL = 1e-8


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of ``log norm = logC - alpha t``."""

    alpha: float
    logC: float
    r_squared: float
    window: tuple[float, float]
    n_points: int
    floor_used: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def fit_decay_rate(times: Sequence[float], norms: Sequence[float],
                   window_fraction: float = 0.5, floor: float = 1e-13) -> DecayFit:
    """Fit an exponential rate to the trailing part of a decaying series.

    Parameters
    ----------
    times, norms
        Sample times (increasing) and nonnegative norms.  NaN norms are
        treated as unusable.
    window_fraction
        Fraction of the samples, counted from the end, that enter the fit.
    floor
        Samples at or below this value are dropped as round-off plateau.

    Raises
    ------
    InsufficientData
        Fewer than five usable samples remain in the window.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("times and norms must be 1-D and of equal length")
    if not 0.0 < window_fraction <= 1.0:
        raise ValueError("window_fraction must lie in (0, 1]")
    if np.any(y[np.isfinite(y)] < 0):
        raise ValueError("norms must be nonnegative")
    start = int(np.floor(len(t) * (1.0 - window_fraction)))
    tw, yw = t[start:], y[start:]
    keep = np.isfinite(yw) & (yw > floor)
    tw, yw = tw[keep], yw[keep]
    if tw.size < MIN_FIT_POINTS:
        raise InsufficientData(
            f"{tw.size} usable samples above floor {floor:g} in the trailing window "
            f"(need {MIN_FIT_POINTS})"
        )
    if tw[-1] <= tw[0]:
        raise InsufficientData("window has zero time extent")
    res = stats.linregress(tw, np.log(yw))
    r2 = float(res.rvalue ** 2) if np.isfinite(res.rvalue) else 1.0
    return DecayFit(
        alpha=float(-res.slope),
        logC=float(res.intercept),
        r_squared=min(1.0, r2),
        window=(float(tw[0]), float(tw[-1])),
        n_points=int(tw.size),
        floor_used=float(floor),
    )


@dataclass(frozen=True)
class MassAudit:
    max_abs_drift: float
    first_violation_t: Optional[float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.first_violation_t is None


def mass_audit(traj, tol: float = MASS_TOL) -> MassAudit:
    """Largest ``|mass(t) - mass(0)|`` over the samples of a trajectory.

    A sample violates conservation when the drift exceeds ``tol * M``.
    """
    if len(traj.samples) < 2:
        raise InsufficientData("mass audit needs at least two samples")
    mass = traj.column("mass")
    t = traj.times
    drift = np.abs(mass - mass[0])
    bound = tol * max(traj.params.M, np.finfo(float).tiny)
    bad = np.flatnonzero(~(drift <= bound))
    return MassAudit(
        max_abs_drift=float(np.max(drift)),
        first_violation_t=float(t[bad[0]]) if bad.size else None,
        tolerance=float(bound),
    )


@dataclass(frozen=True)
class ConvergenceReport:
    """Self-convergence of the primal solver on a refinement ladder.

    ``errors_*`` are sup-norm differences at ``T`` between each grid and the
    finest one; ``differences_*`` are between consecutive grids.  Orders come
    from ratios of consecutive differences, which (unlike ratios against the
    finest run) carry no bias from the finest run's own error.

    ``perturbation_differences_*`` compare ``u - u_bar_h`` (and ``v - v_bar_h``)
    between consecutive grids, each grid using its own stationary reference.
    The study is ``degenerate`` when all of them are at most 1e-8: nothing
    evolves and the solution differences only reflect the stationary
    discretization, so no order is reported.
    """

    grids: list[tuple[int, float]]
    T: float
    errors_u: list[float]
    errors_v: list[float]
    differences_u: list[float]
    differences_v: list[float]
    observed_orders_u: list[float]
    observed_orders_v: list[float]
    perturbation_differences_u: list[float] = field(default_factory=list)
    perturbation_differences_v: list[float] = field(default_factory=list)
    degenerate: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def errors(self) -> list[float]:
        return [max(a, b) for a, b in zip(self.errors_u, self.errors_v)]

    @property
    def observed_orders(self) -> list[float]:
        return self.observed_orders_u + self.observed_orders_v

    def orders_within(self, lo: float = 1.8, hi: float = 2.2) -> bool:
        orders = self.observed_orders
        return (not self.degenerate) and bool(orders) and all(lo <= p <= hi for p in orders)

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def refinement_ladder(n0: int, dt0: float, levels: int) -> list[tuple[int, float]]:
    """``[(n0, dt0), (2 n0 - 1, dt0 / 4), ...]``: h halves and dt quarters."""
    out = [(int(n0), float(dt0))]
    for _ in range(levels - 1):
        n, dt = out[-1]
        out.append((2 * n - 1, dt / 4.0))
    return out


def _orders(diffs):
    out = []
    for a, b in zip(diffs[:-1], diffs[1:]):
        out.append(float(np.log2(a / b)) if a > 0 and b > 0 else float("nan"))
    return out


def self_convergence(model, eps: float, T: float, grid_ladder: Sequence[tuple[int, float]],
                     mode: str = "cosine", sample_every: int = 1000) -> ConvergenceReport:
    """Run the primal solver on each grid of the ladder and compare at ``T``.

    Each grid uses its own stationary reference, so the initial data are the
    same continuum functions sampled on every grid.  Comparisons use the
    nodes the coarse grid shares with the finer ones.
    """
    from .evolution import SchemeParams, evolve, make_initial_data, reference_for
    from .stationary import solve_stationary

    ladder = [(int(n), float(dt)) for n, dt in grid_ladder]
    if len(ladder) < 3:
        raise ValueError("self-convergence requires at least 3 grids")
    for (n1, dt1), (n2, dt2) in zip(ladder[:-1], ladder[1:]):
        if n2 != 2 * n1 - 1 or not np.isclose(dt2, dt1 / 4.0, rtol=1e-12):
            raise ValueError("ladder must halve h and quarter dt at each level")
    finals, perts = [], []
    for n, dt in ladder:
        grid = Grid(n)
        ref = reference_for(model, grid) if model.D == 0 else solve_stationary(model, grid)
        u0, v0 = make_initial_data(ref, eps, mode)
        traj = evolve(u0, v0, model, SchemeParams(dt, T, sample_every=sample_every),
                      ref)
        finals.append((traj.final.u.values, traj.final.v.values))
        perts.append((traj.final.u.values - ref.u_bar.values, traj.final.v.values - ref.v_bar.values))

    def restrict(a, n_from, n_to):
        return a[:: (n_from - 1) // (n_to - 1)]

    n_fine = ladder[-1][0]
    u_f, v_f = finals[-1]
    errors_u, errors_v = [], []
    for (n, _), (u, v) in zip(ladder[:-1], finals[:-1]):
        errors_u.append(float(np.max(np.abs(u - restrict(u_f, n_fine, n)))))
        errors_v.append(float(np.max(np.abs(v - restrict(v_f, n_fine, n)))))
    def consecutive(pairs, c):
        out = []
        for k in range(len(ladder) - 1):
            a, b = pairs[k][c], pairs[k + 1][c]
            out.append(float(np.max(np.abs(a - restrict(b, ladder[k + 1][0], ladder[k][0])))))
        return out

    diffs_u, diffs_v = consecutive(finals, 0), consecutive(finals, 1)
    pdiffs_u, pdiffs_v = consecutive(perts, 0), consecutive(perts, 1)
    degenerate = max(pdiffs_u + pdiffs_v) <= DEGENERATE_TOL
    notes = ["perturbation differences below 1e-8; no order measurable"] if degenerate else []
    return ConvergenceReport(
        grids=ladder,
        T=float(T),
        errors_u=errors_u,
        errors_v=errors_v,
        differences_u=diffs_u,
        differences_v=diffs_v,
        observed_orders_u=[] if degenerate else _orders(diffs_u),
        observed_orders_v=[] if degenerate else _orders(diffs_v),
        perturbation_differences_u=pdiffs_u,
        perturbation_differences_v=pdiffs_v,
        degenerate=degenerate,
        notes=notes,
    )
