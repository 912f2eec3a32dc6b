"""Anti-derivative variables, energy functionals and a direct perturbation solver.

For ``D > 0`` the perturbation of a stationary pair is written as
``u = phi_x + u_bar``, ``v = psi + v_bar`` with ``phi(x) = int_0^x (u - u_bar)``.
For ``D = 0`` the density perturbation of ``(M, 0)`` is ``w = int_0^x (u - M)``
and the chemical itself is the second variable.  Both pairs satisfy
homogeneous Dirichlet data in the first component, which is what makes the
energy functionals below decay.

``solve_perturbation_direct`` integrates the perturbation equations with
their own discretization, so comparing it with the transformed primal run is
an independent consistency check of the density/chemical solver.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import LinearSolveFailure, MassMismatch, StepperError
from .grid import Field, antiderivative, derivative, integrate
from .kernels import thomas
from .stationary import ModelParams, StationarySolution

__all__ = [
    "PerturbationState",
    "EnergyReport",
    "to_perturbation",
    "from_perturbation",
    "weighted_energy",
    "energy_report",
    "solve_perturbation_direct",
    "PerturbationTrajectory",
]

MIN_REFERENCE = 1e-8


@dataclass(frozen=True, eq=False)
class PerturbationState:
    """``(phi, psi)`` for ``D > 0``; ``(w, v)`` for ``D = 0`` (stored in the same slots)."""

    t: float
    phi: Field
    psi: Field
    zero_diffusion: bool = False
    endpoint_defect: float = 0.0

    @property
    def w(self) -> Field:
        return self.phi

    @property
    def v(self) -> Field:
        return self.psi

    @property
    def grid(self):
        return self.phi.grid


@dataclass(frozen=True)
class EnergyReport:
    E_weighted: Optional[float]
    E_extended: float
    smallness_h1: float
    E_d0: Optional[float] = None


def to_perturbation(state, reference: StationarySolution, check: bool = True) -> PerturbationState:
    """Anti-derivative transform of a primal state ``(t, u, v)``.

    Raises ``MassMismatch`` when ``|phi(1)| > 1e-8 M``, i.e. when ``u`` and
    the reference do not carry the same mass.
    """
    if state.u.grid != reference.grid:
        raise ValueError("state and reference live on different grids")
    d0 = reference.params.D == 0
    phi = antiderivative(state.u - reference.u_bar)
    defect = abs(float(phi.values[-1]))
    if check and defect > 1e-8 * reference.params.M:
        raise MassMismatch(f"phi(1) = {phi.values[-1]:.3e}; mass differs from the reference")
    psi = state.v if d0 else state.v - reference.v_bar
    return PerturbationState(float(state.t), phi, psi, d0, defect)


def from_perturbation(p: PerturbationState, reference: StationarySolution):
    """Inverse of ``to_perturbation`` up to the O(h^2) derivative error: ``(u, v)`` fields."""
    u = reference.u_bar + derivative(p.phi)
    v = p.psi if p.zero_diffusion else reference.v_bar + p.psi
    return u, v


def weighted_energy(p: PerturbationState, reference: StationarySolution) -> EnergyReport:
    """``int phi^2/u_bar + psi^2/v_bar`` and its extension by ``int phi_x^2``.

    ``smallness_h1`` is ``||phi||_{H^1} + ||psi||_{L^2}``.
    """
    if reference.params.D == 0:
        raise ValueError("weighted energy needs a D > 0 reference; use energy_report")
    ub = reference.u_bar.values
    vb = reference.v_bar.values
    if vb.min() < MIN_REFERENCE or ub.min() < MIN_REFERENCE:
        raise ValueError("reference state is not bounded away from zero")
    phi, psi = p.phi, p.psi
    phix = derivative(phi)
    e_w = integrate(Field(phi.grid, phi.values ** 2 / ub + psi.values ** 2 / vb))
    phix2 = integrate(phix * phix)
    h1 = np.sqrt(integrate(phi * phi) + phix2) + np.sqrt(integrate(psi * psi))
    return EnergyReport(e_w, e_w + phix2, float(h1))


def _d0_energy(p: PerturbationState) -> EnergyReport:
    # sigma-tilde fixed to 1
    w, v = p.phi, p.psi
    wx, vx = derivative(w), derivative(v)
    vv = integrate(v * v) + integrate(vx * vx)
    ww = integrate(w * w) + integrate(wx * wx)
    return EnergyReport(None, ww + vv, float(np.sqrt(ww) + np.sqrt(vv)), vv)


def energy_report(p: PerturbationState, reference: StationarySolution) -> EnergyReport:
    if p.zero_diffusion:
        return _d0_energy(p)
    return weighted_energy(p, reference)


@dataclass(eq=False)
class PerturbationTrajectory:
    params: ModelParams
    states: list[PerturbationState] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])


def _dirichlet_operator(n, r, extra=None):
    lo = np.full(n, -r)
    up = np.full(n, -r)
    di = np.full(n, 1.0 + 2.0 * r)
    if extra is not None:
        di = di + extra
    lo[-1] = up[0] = 0.0
    di[0] = di[-1] = 1.0
    return lo, di, up


def _ddx(a, h):
    return np.gradient(a, h, edge_order=2)


def solve_perturbation_direct(p0: PerturbationState, model: ModelParams,
                              reference: StationarySolution, scheme) -> PerturbationTrajectory:
    """Integrate the perturbation equations directly.

    ``D > 0``::

        phi_t = phi_xx - phi_x v_bar_x - u_bar psi_x - phi_x psi_x
        psi_t = D psi_xx - u_bar psi - v_bar phi_x - phi_x psi

    ``D = 0``::

        w_t = w_xx - M v_x - w_x v_x
        v_t = -(M + w_x) v

    The Laplacians (and ``-u_bar psi``) are implicit with homogeneous
    Dirichlet rows, the other terms explicit; the chemical is updated after
    the first variable using its new value, and ``v`` follows the exact
    factor ``exp(-dt (M + w_x))`` when ``D = 0``.  Samples are taken at the
    same step indices as ``evolution.evolve``.
    """
    grid = p0.grid
    if reference.grid != grid:
        raise ValueError("reference lives on a different grid")
    n, h, dt = grid.n, grid.h, scheme.dt
    r = dt / (h * h)
    a = np.array(p0.phi.values)
    b = np.array(p0.psi.values)
    a[0] = a[-1] = 0.0
    d0 = model.D == 0
    if not d0:
        b[0] = b[-1] = 0.0
        ub = reference.u_bar.values
        vb = reference.v_bar.values
        vbx = _ddx(vb, h)
        ops_b = _dirichlet_operator(n, dt * model.D / (h * h), dt * ub)
    M = model.M
    ops_a = _dirichlet_operator(n, r)
    total = scheme.nsteps
    out = PerturbationTrajectory(model)

    def record(k):
        out.states.append(PerturbationState(k * dt, Field(grid, a), Field(grid, b), d0))

    record(0)
    rhs = np.empty(n)
    try:
        for k in range(1, total + 1):
            ax = _ddx(a, h)
            bx = _ddx(b, h)
            if d0:
                rhs[:] = a + dt * (-M * bx - ax * bx)
            else:
                rhs[:] = a + dt * (-ax * vbx - ub * bx - ax * bx)
            rhs[0] = rhs[-1] = 0.0
            a = thomas(*ops_a, rhs)
            ax = _ddx(a, h)
            if d0:
                b = b * np.exp(-dt * (M + ax))
            else:
                rhs[:] = b + dt * (-vb * ax - ax * b)
                rhs[0] = rhs[-1] = 0.0
                b = thomas(*ops_b, rhs)
            if k % scheme.sample_every == 0 or k == total:
                record(k)
    except LinearSolveFailure as exc:
        raise StepperError(str(exc), t=k * dt) from exc
    return out
