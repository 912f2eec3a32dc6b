"""Non-constant stationary state of the D > 0 system.

The stationary density is slaved to the chemical, ``u_bar = lam * exp(v_bar)``
with ``lam = M / int exp(v_bar)``, so only the Dirichlet problem

    D v'' = lam e^v v,   v(0) = v(1) = v_star

is solved: damped Newton for fixed ``lam`` (tridiagonal Jacobian), wrapped in
an outer fixed-point update of ``lam``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import NonConvergence, NonPositivity
from .grid import Field, Grid, derivative, integrate
from .kernels import sg_weight, thomas

log = logging.getLogger(__name__)

__all__ = [
    "ModelParams",
    "StationarySolution",
    "VerificationReport",
    "solve_stationary",
    "verify_stationary",
    "stationary_sweep",
    "layer_width",
    "discrete_residual",
]

_EPS = np.finfo(float).eps
MAX_HALVINGS = 30
CONTINUATION_FROM = 0.5


@dataclass(frozen=True)
class ModelParams:
    """Chemical diffusivity ``D``, boundary value ``v_star`` and cell mass ``M``.

    ``v_star`` is ignored when ``D == 0``.  ``M == 0`` is only accepted with
    ``allow_zero_mass=True`` (degenerate test configurations).
    """

    D: float
    v_star: float = 1.0
    M: float = 1.0
    allow_zero_mass: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("D", "v_star", "M"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite, got {val!r}")
        if self.D < 0:
            raise ValueError(f"D must be >= 0, got {self.D}")
        if self.M < 0 or (self.M == 0 and not self.allow_zero_mass):
            raise ValueError(f"M must be > 0, got {self.M}")
        if self.v_star < 0:
            raise ValueError(f"v_star must be >= 0, got {self.v_star}")

    @property
    def parabolic(self) -> bool:
        return self.D > 0


@dataclass(frozen=True, eq=False)
class StationarySolution:
    params: ModelParams
    v_bar: Field
    lam: float
    newton_iters: int = 0
    outer_iters: int = 0
    residual_inf: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.v_bar.grid

    @property
    def u_bar(self) -> Field:
        # never stored: the identity u = lam e^v holds to rounding by construction
        return Field(self.grid, self.lam * np.exp(self.v_bar.values))

    @property
    def lambda_(self) -> float:
        return self.lam

    @property
    def layer_width(self) -> Optional[float]:
        return layer_width(self)

    @classmethod
    def constant(cls, params: ModelParams, grid: Grid) -> "StationarySolution":
        """The constant state ``(M, 0)`` of the D = 0 system."""
        return cls(params, grid.zeros(), float(params.M))


def discrete_residual(v: np.ndarray, lam: float, D: float, h: float) -> np.ndarray:
    """``D * Lap_h v - lam e^v v`` at interior nodes (zero in the Dirichlet rows)."""
    r = np.zeros_like(v)
    r[1:-1] = D * (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h) - lam * np.exp(v[1:-1]) * v[1:-1]
    return r


def _newton(v, lam, D, h, v_star, tol, max_iters):
    """Damped Newton for the Dirichlet problem at fixed ``lam``; returns (v, iters)."""
    n = v.shape[0]
    c = D / (h * h)
    lo = np.full(n, c)
    up = np.full(n, c)
    lo[-1] = 0.0
    up[0] = 0.0
    res = discrete_residual(v, lam, D, h)
    rnorm = np.max(np.abs(res))
    for it in range(1, max_iters + 1):
        if rnorm <= tol:
            return v, it - 1
        di = -2.0 * c - lam * np.exp(v) * (1.0 + v)
        di[0] = di[-1] = 1.0
        step = thomas(lo, di, up, -res)
        step[0] = step[-1] = 0.0  # Dirichlet rows; a pivoting solver may leave rounding here
        if np.max(np.abs(step)) <= 4.0 * _EPS * max(1.0, v_star):
            return v, it  # rounding floor reached
        alpha = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = v + alpha * step
            if np.all(trial[1:-1] > 0.0):
                tres = discrete_residual(trial, lam, D, h)
                tnorm = np.max(np.abs(tres))
                if tnorm < rnorm or alpha == 1.0 and tnorm <= tol:
                    break
            alpha *= 0.5
        else:
            if not np.all(trial[1:-1] > 0.0):
                raise NonPositivity(
                    f"Newton iterate left v > 0 after {MAX_HALVINGS} halvings (D={D})"
                )
            return v, it  # no descent possible: stagnated at rounding level
        v, res, rnorm = trial, tres, tnorm
    raise NonConvergence(
        f"inner Newton did not converge in {max_iters} iterations (residual {rnorm:.3e})",
        iterations=max_iters, residual=rnorm, D=D,
    )


def _residual_floor(D, h, v_star):
    return 2.0 * _EPS * (4.0 * D / (h * h)) * max(1.0, v_star)


def _solve_from(params, grid, v0, tol, max_iters, max_newton):
    D, v_star, M = params.D, params.v_star, params.M
    h = grid.h
    v = np.array(v0, dtype=float)
    v[0] = v[-1] = v_star
    eff_tol = max(tol, _residual_floor(D, h, v_star))
    lam = M / integrate(Field(grid, np.exp(v)))
    newton_total = 0
    outer = 0
    converged = False
    while outer < max_iters and not converged:
        outer += 1
        v, its = _newton(v, lam, D, h, v_star, 0.1 * eff_tol, max_newton)
        newton_total += its
        lam_new = M / integrate(Field(grid, np.exp(v)))
        rnorm = float(np.max(np.abs(discrete_residual(v, lam_new, D, h))))
        log.debug("outer %d: lam=%.15g dlam=%.3e res=%.3e", outer, lam_new, lam_new - lam, rnorm)
        converged = abs(lam_new - lam) <= tol * max(lam, _EPS) and rnorm <= eff_tol
        lam = lam_new
    if not converged:
        raise NonConvergence(
            f"lambda fixed point did not converge in {max_iters} outer iterations "
            f"(D={D}, n={grid.n}, residual {rnorm:.3e})",
            iterations=max_iters, residual=rnorm, D=D,
        )
    # polish to rounding level: a leftover lambda defect is a smooth residual
    # that a time stepper started from this state would slowly relax away
    while outer < max_iters:
        outer += 1
        v2, its = _newton(v, lam, D, h, v_star, 0.0, max_newton)
        newton_total += its
        lam2 = M / integrate(Field(grid, np.exp(v2)))
        r2 = float(np.max(np.abs(discrete_residual(v2, lam2, D, h))))
        if r2 > rnorm:
            break
        done = abs(lam2 - lam) <= 4.0 * _EPS * max(lam2, _EPS)
        v, lam, rnorm = v2, lam2, r2
        if done:
            break
    return StationarySolution(params, Field(grid, v), float(lam), newton_total, outer, rnorm)


def solve_stationary(params: ModelParams, grid: Grid, tol: float = 1e-10, max_iters: int = 50,
                     max_newton: int = 50, initial: Optional[Field | np.ndarray] = None
                     ) -> StationarySolution:
    """Solve the stationary problem for ``D > 0``.

    Parameters
    ----------
    params : ModelParams
        Requires ``D > 0`` and ``v_star > 0``.
    grid : Grid
    tol : float
        Sup-norm bound on the discrete BVP residual and relative bound on the
        last change of ``lam``.  Raised to the rounding floor
        ``~ eps * D / h**2`` on very fine grids.
    max_iters, max_newton : int
        Outer (``lam``) and inner (Newton) iteration budgets.
    initial : Field or array, optional
        Warm start for ``v_bar``.  Defaults to ``v_star``; if that fails for
        ``D < 0.5`` the solve is retried by continuation in ``D`` from 0.5.

    Raises
    ------
    NonConvergence, NonPositivity
    """
    if not params.D > 0:
        raise ValueError("solve_stationary needs D > 0; use StationarySolution.constant for D = 0")
    if not params.v_star > 0:
        raise ValueError("solve_stationary needs v_star > 0")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if initial is not None:
        v0 = np.asarray(initial, dtype=float)
        return _solve_from(params, grid, v0, tol, max_iters, max_newton)
    v0 = np.full(grid.n, params.v_star)
    try:
        return _solve_from(params, grid, v0, tol, max_iters, max_newton)
    except (NonConvergence, NonPositivity):
        if params.D >= CONTINUATION_FROM:
            raise
        log.info("direct solve failed at D=%g, retrying by continuation", params.D)
    ladder = np.geomspace(CONTINUATION_FROM, params.D, 8)
    sol = None
    for D in ladder:
        p = replace(params, D=float(D))
        start = v0 if sol is None else sol.v_bar.values
        sol = _solve_from(p, grid, start, tol, max_iters, max_newton)
    return sol


def layer_width(sol: StationarySolution) -> Optional[float]:
    """Left-most x where ``v_bar`` first drops to ``v_star / 2`` (linear interpolation).

    ``None`` when ``v_bar`` stays above ``v_star / 2`` everywhere.
    """
    v = sol.v_bar.values
    target = 0.5 * sol.params.v_star
    below = np.nonzero(v <= target)[0]
    if below.size == 0:
        return None
    i = int(below[0])
    if i == 0:
        return 0.0
    x = sol.grid.x
    # v[i-1] > target >= v[i]
    s = (v[i - 1] - target) / (v[i - 1] - v[i])
    return float(x[i - 1] + s * (x[i] - x[i - 1]))


def stationary_sweep(params_base: ModelParams, D_values: Sequence[float], grid: Grid,
                     tol: float = 1e-10, max_iters: int = 50) -> list[StationarySolution]:
    """Solve for a descending list of ``D`` by continuation.

    The first entry is solved exactly as ``solve_stationary`` would; each
    later one starts from its predecessor.  A failure is re-raised as
    ``NonConvergence`` with ``.D`` set to the failing value.
    """
    D_values = [float(d) for d in D_values]
    if not D_values:
        return []
    if any(d <= 0 for d in D_values):
        raise ValueError("sweep values of D must be positive")
    if any(b >= a for a, b in zip(D_values, D_values[1:])):
        raise ValueError("sweep values of D must be strictly descending")
    out: list[StationarySolution] = []
    for D in D_values:
        p = replace(params_base, D=D)
        try:
            if out:
                sol = solve_stationary(p, grid, tol, max_iters, initial=out[-1].v_bar)
            else:
                sol = solve_stationary(p, grid, tol, max_iters)
        except (NonConvergence, NonPositivity) as exc:
            raise NonConvergence(f"sweep failed at D={D}: {exc}", D=D) from exc
        log.info("D=%g lam=%.12g layer=%s", D, sol.lam, sol.layer_width)
        out.append(sol)
    return out


@dataclass(frozen=True)
class VerificationReport:
    """Structural checks on a stationary pair.  Carries violations; never raises."""

    gradient_slack_min: float   # min of v^2 u - D v_x^2
    gradient_scale: float       # sup of v^2 u
    u_min: float
    u_max: float
    v_min: float
    v_max: float
    flux_sup: float             # sup of the scheme's face flux at (u_bar, v_bar)
    identity_sup: float         # sup |u_bar - lam e^v_bar|
    mass_error: float           # |int u_bar - M|
    residual_sup: float         # sup |D Lap_h v - u v|
    v_star: float
    M: float
    residual_floor: float = 0.0  # rounding floor of the discrete residual

    def checks(self, tol: float = 1e-10) -> dict[str, bool]:
        scale_u = max(1.0, self.u_max)
        out = {
            "gradient_bound": self.gradient_slack_min >= -1e-8 * self.gradient_scale,
            "v_positive": self.v_min > 0.0,
            "v_bounded": self.v_max <= self.v_star + 1e-12,
            "u_positive": self.u_min > 0.0 or self.M == 0.0,
            "identity": self.identity_sup <= 1e-12 * scale_u,
            "mass": self.mass_error <= 1e-10 * max(1.0, self.M),
            "flux": self.flux_sup <= 1e-9 * scale_u,
            "residual": self.residual_sup <= max(tol, self.residual_floor),
        }
        return {k: bool(v) for k, v in out.items()}

    @property
    def passed(self) -> bool:
        return all(self.checks().values())

    def as_dict(self) -> dict:
        d = {k: float(v) for k, v in self.__dict__.items()}
        d["checks"] = self.checks()
        return d


def verify_stationary(sol: StationarySolution) -> VerificationReport:
    p = sol.params
    g = sol.grid
    v = sol.v_bar.values
    u = sol.u_bar.values
    vx = derivative(sol.v_bar).values
    vvu = v * v * u
    dv = np.diff(v)
    b = sg_weight(dv)
    flux = (np.diff(u) - ((1.0 - b) * u[:-1] + b * u[1:]) * dv) / g.h
    return VerificationReport(
        gradient_slack_min=float(np.min(vvu - p.D * vx * vx)),
        gradient_scale=float(np.max(np.abs(vvu))),
        u_min=float(u.min()),
        u_max=float(u.max()),
        v_min=float(v.min()),
        v_max=float(v.max()),
        flux_sup=float(np.max(np.abs(flux))),
        identity_sup=float(np.max(np.abs(u - sol.lam * np.exp(v)))),
        mass_error=abs(integrate(sol.u_bar) - p.M),
        residual_sup=float(np.max(np.abs(discrete_residual(v, sol.lam, p.D, g.h)))),
        v_star=float(p.v_star),
        M=float(p.M),
        residual_floor=_residual_floor(p.D, g.h, p.v_star),
    )
