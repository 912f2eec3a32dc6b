"""Time integration of the chemotaxis system.

The density equation is advanced in conservative flux form on the nodal grid
(half control volumes at the two ends, zero flux through the outer faces):
diffusion implicit, chemotactic advection explicit with an exponentially
fitted face density.  The chemical is updated afterwards with the new
density: a pinned implicit solve when ``D > 0``, the exact factor
``exp(-dt u)`` when ``D = 0``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import LinearSolveFailure, PositivityViolation, StepperError, StepSizeError
from .grid import Field, Grid, antiderivative, derivative, integrate
from .stationary import ModelParams, StationarySolution

log = logging.getLogger(__name__)

__all__ = [
    "State",
    "SchemeParams",
    "Sample",
    "Trajectory",
    "make_initial_data",
    "step_parabolic",
    "step_pde_ode",
    "evolve",
    "stable_dt",
    "reference_for",
]

FACE_DENSITIES = ("exponential", "arithmetic")


@dataclass(frozen=True, eq=False)
class State:
    t: float
    u: Field
    v: Field

    @property
    def grid(self) -> Grid:
        return self.u.grid


@dataclass(frozen=True)
class SchemeParams:
    """Time step, horizon and sampling of a run.

    ``face`` selects the face density of the advective flux:
    ``"exponential"`` (default) weights the two neighbours so that any
    ``c * exp(v)`` carries exactly zero flux; ``"arithmetic"`` is the plain
    mean ``(u_i + u_{i+1}) / 2``.
    """

    dt: float
    T: float
    sample_every: int = 100
    cfl_safety: float = 0.9
    face: str = "exponential"

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"T must be positive, got {self.T}")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ValueError("sample_every must be a positive integer")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.face not in FACE_DENSITIES:
            raise ValueError(f"face must be one of {FACE_DENSITIES}")

    @property
    def nsteps(self) -> int:
        return max(1, int(math.ceil(self.T / self.dt - 1e-9)))

    @property
    def exponential(self) -> bool:
        return self.face == "exponential"


def stable_dt(v: Field, cfl_safety: float = 0.9) -> float:
    """Largest admissible step for the explicit part of the density update.

    With implicit diffusion the explicit central advection needs
    ``dt * |v_x|^2 <= 2`` and the explicit ``-u v_xx`` term needs
    ``dt * |v_xx| <= 1``; ``cfl_safety`` scales the smaller bound.
    """
    vx = derivative(v)
    vxx = derivative(vx)
    a = float(np.max(np.abs(vx.values)))
    c = float(np.max(np.abs(vxx.values)))
    return cfl_safety * min(2.0 / (1.0 + a * a), 1.0 / (1.0 + c))


def _check_dt(v: Field, scheme: SchemeParams):
    limit = stable_dt(v, scheme.cfl_safety)
    if scheme.dt > limit:
        raise StepSizeError(f"dt={scheme.dt:g} exceeds the stability limit {limit:.3g}")


def reference_for(model: ModelParams, grid: Grid,
                  stationary: Optional[StationarySolution] = None) -> Optional[StationarySolution]:
    if model.D == 0:
        return StationarySolution.constant(model, grid)
    return stationary


def make_initial_data(reference: StationarySolution, eps: float, mode: str = "cosine"
                      ) -> tuple[Field, Field]:
    """Mass-preserving perturbation of a stationary state.

    ``mode="cosine"`` adds ``eps*pi*cos(pi x)`` to the density, so the
    anti-derivative perturbation is ``eps*sin(pi x)`` and vanishes at both ends.
    The chemical gets ``eps*sin(pi x)`` (``D > 0``, keeps the Dirichlet data) or
    ``eps*(1 + sin(pi x))`` (``D = 0``, reference chemical is zero).
    ``mode="cosine2"`` uses the second mode ``k = 2`` instead.

    Raises ``PositivityViolation`` when the result has ``u <= 0`` or ``v < 0``.
    """
    k = {"cosine": 1, "cosine2": 2}.get(mode)
    if k is None:
        raise ValueError(f"unknown perturbation mode {mode!r}")
    grid = reference.grid
    x = grid.x
    c = np.cos(k * np.pi * x)
    c = 0.5 * (c - c[::-1]) if k % 2 else 0.5 * (c + c[::-1])
    s = np.sin(k * np.pi * x)
    s[0] = s[-1] = 0.0
    du = eps * k * np.pi * c
    if reference.params.D == 0:
        u0 = reference.params.M + du
        v0 = eps * (1.0 + s)
    else:
        u0 = reference.u_bar.values + du
        v0 = reference.v_bar.values + eps * s
    if np.any(u0 <= 0):
        raise PositivityViolation(f"eps={eps:g} makes the initial density non-positive")
    if np.any(v0 < 0):
        raise PositivityViolation(f"eps={eps:g} makes the initial chemical negative")
    return Field(grid, u0), Field(grid, v0)


def _advance(u: np.ndarray, v: np.ndarray, nsteps: int, model: ModelParams,
             scheme: SchemeParams, h: float, backend=None, carry=(None, None)):
    impl = backend or kernels
    uc, vc = carry
    if model.D > 0:
        impl.advance_parabolic(u, v, nsteps, scheme.dt, h, model.D, model.v_star,
                               scheme.exponential, uc, vc)
    else:
        impl.advance_pde_ode(u, v, nsteps, scheme.dt, h, scheme.exponential, uc, vc)


def _one_step(state: State, model: ModelParams, scheme: SchemeParams) -> State:
    _check_dt(state.v, scheme)
    u = np.array(state.u.values)
    v = np.array(state.v.values)
    try:
        _advance(u, v, 1, model, scheme, state.grid.h)
    except LinearSolveFailure as exc:
        raise StepperError(str(exc), t=state.t) from exc
    return State(state.t + scheme.dt, Field(state.grid, u), Field(state.grid, v))


def step_parabolic(state: State, model: ModelParams, scheme: SchemeParams) -> State:
    """One IMEX step of the ``D > 0`` system; boundary values of ``v`` are pinned."""
    if not model.D > 0:
        raise ValueError("step_parabolic needs D > 0")
    return _one_step(state, model, scheme)


def step_pde_ode(state: State, model: ModelParams, scheme: SchemeParams) -> State:
    """One step of the ``D = 0`` system; ``v`` follows ``v * exp(-dt u_new)`` nodewise."""
    if model.D != 0:
        raise ValueError("step_pde_ode needs D = 0")
    return _one_step(state, model, scheme)


@dataclass(frozen=True)
class Sample:
    t: float
    mass: float
    min_u: float
    min_v: float
    linf_u_err: Optional[float] = None
    linf_v_err: Optional[float] = None
    l2_phi: Optional[float] = None
    l2_psi: Optional[float] = None
    E_weighted: Optional[float] = None
    E_extended: Optional[float] = None
    E_d0: Optional[float] = None
    smallness_h1: Optional[float] = None


@dataclass(eq=False)
class Trajectory:
    params: ModelParams
    scheme: SchemeParams
    samples: list[Sample] = field(default_factory=list)
    final: Optional[State] = None
    states: list[State] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(s, name) is None else getattr(s, name)
                         for s in self.samples], dtype=float)

    @property
    def times(self) -> np.ndarray:
        return self.column("t")


def _sample(state: State, reference: Optional[StationarySolution]) -> Sample:
    from .energy import energy_report, to_perturbation

    u, v = state.u, state.v
    base = dict(t=state.t, mass=integrate(u), min_u=u.min(), min_v=v.min())
    if reference is None:
        return Sample(**base)
    p = to_perturbation(state, reference, check=False)
    e = energy_report(p, reference)
    return Sample(
        **base,
        linf_u_err=float(np.max(np.abs(u.values - reference.u_bar.values))),
        linf_v_err=float(np.max(np.abs(v.values - reference.v_bar.values))),
        l2_phi=float(np.sqrt(integrate(p.phi * p.phi))),
        l2_psi=float(np.sqrt(integrate(p.psi * p.psi))),
        E_weighted=e.E_weighted,
        E_extended=e.E_extended,
        E_d0=e.E_d0,
        smallness_h1=e.smallness_h1,
    )


def evolve(u0: Field, v0: Field, model: ModelParams, scheme: SchemeParams,
           stationary: Optional[StationarySolution] = None, *, keep_states: bool = False,
           backend=None) -> Trajectory:
    """Integrate from ``(u0, v0)`` to ``scheme.T`` and record a sample every
    ``scheme.sample_every`` steps (plus the final step).

    Error norms and energies are measured against ``stationary`` for
    ``D > 0`` (omitted when it is not given) and against ``(M, 0)`` for
    ``D = 0``.  The step-size restriction is re-checked at every sample.
    ``backend`` overrides the kernel module (see ``kernels.available_backends``).
    """
    grid = u0.grid
    if v0.grid != grid:
        raise ValueError("u0 and v0 live on different grids")
    if stationary is not None and stationary.grid != grid:
        raise ValueError("stationary solution lives on a different grid")
    reference = reference_for(model, grid, stationary)
    u = np.array(u0.values)
    v = np.array(v0.values)
    if model.D > 0:
        v[0] = v[-1] = model.v_star
    # rounding compensation carried across chunks; increments far below one
    # ulp of the state would otherwise be lost and the error would stall
    carry = (np.zeros(grid.n), np.zeros(grid.n))
    traj = Trajectory(model, scheme)
    total = scheme.nsteps
    k = 0
    state = State(0.0, Field(grid, u), Field(grid, v))
    while True:
        traj.samples.append(_sample(state, reference))
        if keep_states:
            traj.states.append(state)
        if k >= total:
            break
        _check_dt(state.v, scheme)
        chunk = min(scheme.sample_every, total - k)
        try:
            _advance(u, v, chunk, model, scheme, grid.h, backend, carry)
        except LinearSolveFailure as exc:
            raise StepperError(str(exc), t=k * scheme.dt) from exc
        k += chunk
        state = State(k * scheme.dt, Field(grid, u), Field(grid, v))
    traj.final = state
    return traj
