"""Pure numpy/scipy implementation of the time-stepping kernels.

Same call signatures as the compiled ``_kernels`` extension.  Selected by
``exochemo.kernels`` when the extension is missing or when
``EXOCHEMO_PURE_PYTHON=1`` is set.
"""
import numpy as np
from scipy.linalg import solve_banded

from .errors import LinearSolveFailure

NAME = "python"

# Bernoulli-series coefficients of 1/d - 1/expm1(d) - 1/2, odd powers 1..9
_SG_SERIES = (-1.0 / 12.0, 1.0 / 720.0, -1.0 / 30240.0, 1.0 / 1209600.0, -1.0 / 47900160.0)
_SG_SWITCH = 0.1


def sg_weight(delta):
    """Weight of the downstream node in the exponentially fitted face density.

    Returns ``b(d) = 1/d - 1/(e^d - 1)``; the face density is
    ``(1 - b) u_i + b u_{i+1}`` with ``d = v_{i+1} - v_i``.  ``b(0) = 1/2``
    recovers the arithmetic mean.
    """
    d = np.asarray(delta, dtype=float)
    out = np.empty_like(d)
    small = np.abs(d) < _SG_SWITCH
    ds = d[small]
    d2 = ds * ds
    acc = np.full_like(ds, _SG_SERIES[-1])
    for coef in _SG_SERIES[-2::-1]:
        acc = acc * d2 + coef
    out[small] = 0.5 + ds * acc
    dl = d[~small]
    out[~small] = 1.0 / dl - 1.0 / np.expm1(dl)
    return out if out.ndim else float(out)


def thomas(lower, diag, upper, rhs):
    """Solve a tridiagonal system; ``lower[0]`` and ``upper[-1]`` are ignored."""
    diag = np.asarray(diag, dtype=float)
    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = np.asarray(upper, dtype=float)[:-1]
    ab[1] = diag
    ab[2, :-1] = np.asarray(lower, dtype=float)[1:]
    try:
        x = solve_banded((1, 1), ab, np.asarray(rhs, dtype=float), check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise LinearSolveFailure(f"singular tridiagonal system: {exc}") from None
    if not np.all(np.isfinite(x)):
        raise LinearSolveFailure("tridiagonal solve produced non-finite values")
    return x


def advective_flux(u, v, h, exponential=True):
    """Explicit face flux ``-rho_{i+1/2} (v_{i+1} - v_i)/h`` on the n-1 interior faces."""
    dv = np.diff(v)
    b = sg_weight(dv) if exponential else 0.5
    rho = (1.0 - b) * u[:-1] + b * u[1:]
    return -rho * dv / h


def total_flux(u, v, h, exponential=True):
    """Diffusive plus advective face flux ``u_x - u v_x`` on the n-1 interior faces."""
    return np.diff(u) / h + advective_flux(u, v, h, exponential)


def _u_band(n, dt, h):
    r = dt / (h * h)
    ab = np.zeros((3, n))
    ab[0, 1:] = -r
    ab[1] = 1.0 + 2.0 * r
    ab[2, :-1] = -r
    # half control volumes at the ends carry zero boundary flux
    ab[0, 1] = -2.0 * r
    ab[2, n - 2] = -2.0 * r
    return ab


def _kahan_add(x, c, dx):
    y = dx - c
    t = x + y
    c[:] = (t - x) - y
    x[:] = t


def _carry(c, n):
    if c is None:
        return np.zeros(n)
    if c.shape[0] != n:
        raise ValueError("compensation array has the wrong length")
    return c


def _u_step(u, uc, v, dt, h, ab, exponential):
    # increment form: (I - dt W^-1 L) du = dt W^-1 div F(u_old), where the
    # state is u - uc (compensated); F is linear in u so F(u - uc) = F(u) - F(uc)
    n = u.shape[0]
    dv = np.diff(v)
    b = sg_weight(dv) if exponential else 0.5
    f = (np.diff(u) - ((1.0 - b) * u[:-1] + b * u[1:]) * dv) / h
    f -= (np.diff(uc) - ((1.0 - b) * uc[:-1] + b * uc[1:]) * dv) / h
    rhs = np.empty(n)
    q = dt / h
    rhs[1:-1] = q * (f[1:] - f[:-1])
    rhs[0] = 2.0 * q * f[0]
    rhs[-1] = -2.0 * q * f[-1]
    try:
        du = solve_banded((1, 1), ab, rhs, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise LinearSolveFailure(f"singular u-system: {exc}") from None
    _kahan_add(u, uc, du)


def advance_parabolic(u, v, nsteps, dt, h, D, v_star, exponential=True, uc=None, vc=None):
    """Advance ``(u, v)`` in place by ``nsteps`` IMEX steps of the D > 0 system.

    ``uc``/``vc`` carry the rounding compensation of the state between calls
    (the represented state is ``u - uc``, ``v - vc``); updated in place.
    """
    n = u.shape[0]
    uc = _carry(uc, n)
    vc = _carry(vc, n)
    ab = _u_band(n, dt, h)
    s = dt * D / (h * h)
    abv = np.zeros((3, n))
    abv[0, 2:] = -s
    abv[2, :-2] = -s
    abv[1, 0] = abv[1, -1] = 1.0
    rhs = np.empty(n)
    for _ in range(nsteps):
        _u_step(u, uc, v, dt, h, ab, exponential)
        abv[1, 1:-1] = 1.0 + 2.0 * s + dt * u[1:-1]
        rhs[1:-1] = ((s * (v[2:] - 2.0 * v[1:-1] + v[:-2]) - dt * u[1:-1] * v[1:-1])
                     - (s * (vc[2:] - 2.0 * vc[1:-1] + vc[:-2]) - dt * u[1:-1] * vc[1:-1]))
        rhs[0] = (v_star - v[0]) + vc[0]
        rhs[-1] = (v_star - v[-1]) + vc[-1]
        try:
            dv = solve_banded((1, 1), abv, rhs, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise LinearSolveFailure(f"singular v-system: {exc}") from None
        _kahan_add(v, vc, dv)
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise LinearSolveFailure("non-finite state after step")


def advance_pde_ode(u, v, nsteps, dt, h, exponential=True, uc=None, vc=None):
    """Advance ``(u, v)`` in place by ``nsteps`` steps of the D = 0 system.

    ``vc`` is accepted for symmetry and left untouched: the multiplicative
    chemical update needs no compensation.
    """
    uc = _carry(uc, u.shape[0])
    ab = _u_band(u.shape[0], dt, h)
    for _ in range(nsteps):
        _u_step(u, uc, v, dt, h, ab, exponential)
        v *= np.exp(-dt * u)
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise LinearSolveFailure("non-finite state after step")
