"""Independent reference computations for the acceptance tests.

Nothing here imports ``exochemo``: the oracles reach the same quantities by
different algorithms, so agreement is evidence rather than tautology.

Stationary problem (D > 0)::

    D v'' = lam e^v v  on (0, 1),   v(0) = v(1) = v_star,   lam int e^v = M

Both shooting oracles exploit the symmetry ``v(x) = v(1 - x)`` and shoot
over the left half only, which keeps the growing mode of the linearisation
(rate ~ sqrt(lam e / D)) well inside double precision.
"""
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import fsolve


def shoot_continuum(D, v_star=1.0, M=1.0, guess=None):
    """Solve the continuum boundary-value problem by shooting.

    Unknowns are the initial slope ``s = v'(0)`` and ``lam``; the residuals
    are ``v'(1/2) = 0`` and ``2 lam int_0^{1/2} e^v = M``.  Integration uses
    DOP853 at rtol 1e-13.

    Without a ``guess`` the unknowns are continued from ``D = 1`` down to
    ``D`` in geometric steps.

    Returns
    -------
    lam, slope : float
    """
    if guess is None:
        guess = (-0.46 * v_star, 0.4 * M)
        if D < 1.0:
            for d in np.geomspace(1.0, D, 30)[:-1]:
                guess = shoot_continuum(d, v_star, M, guess)[::-1]

    def rhs(x, y, lam):
        v, dv, _ = y
        return [dv, lam * np.exp(v) * v / D, np.exp(v)]

    def residual(p):
        s, lam = p
        sol = solve_ivp(rhs, (0.0, 0.5), [v_star, s, 0.0], args=(lam,),
                        method="DOP853", rtol=1e-13, atol=1e-15)
        return [sol.y[1, -1], 2.0 * lam * sol.y[2, -1] - M]

    s, lam = fsolve(residual, list(guess), xtol=1e-14)
    r = residual([s, lam])
    if max(abs(r[0]), abs(r[1])) > 1e-9:
        raise RuntimeError(f"continuum shooting did not converge: residual {r}")
    return float(lam), float(s)


def _march(s, lam, D, v_star, n):
    # v_{i+1} = 2 v_i - v_{i-1} + h^2 lam e^{v_i} v_i / D up to the midpoint + 1
    h = 1.0 / (n - 1)
    m = (n - 1) // 2
    v = np.empty(m + 2)
    v[0] = v_star
    v[1] = v_star + s * h
    c = h * h * lam / D
    for i in range(1, m + 1):
        v[i + 1] = 2.0 * v[i] - v[i - 1] + c * np.exp(v[i]) * v[i]
    return v


def shoot_discrete(D, n, v_star=1.0, M=1.0, guess=(-1.0, 0.5)):
    """Solve the nodal three-point discretization by marching the recurrence.

    Same discrete equations as a Newton-type solver on a uniform grid of
    ``n`` nodes (``n`` odd), with trapezoid mass.  The unknown first step and
    ``lam`` are fixed by discrete symmetry ``v_{m+1} = v_{m-1}`` about the
    midpoint node ``m`` and the mass condition.

    Returns
    -------
    lam : float
    v : ndarray of length n
    """
    if n % 2 == 0:
        raise ValueError("discrete shooting needs an odd node count")
    h = 1.0 / (n - 1)
    m = (n - 1) // 2

    def full(s, lam):
        half = _march(s, lam, D, v_star, n)
        return np.concatenate([half[: m + 1], half[m - 1:: -1]])

    def residual(p):
        s, lam = p
        half = _march(s, lam, D, v_star, n)
        e = np.exp(full(s, lam))
        mass = lam * h * (e.sum() - 0.5 * (e[0] + e[-1]))
        return [(half[m + 1] - half[m - 1]) / h, mass - M]

    s, lam = fsolve(residual, list(guess), xtol=1e-15)
    r = residual([s, lam])
    if max(abs(r[0]), abs(r[1])) > 1e-9:
        raise RuntimeError(f"discrete shooting did not converge: residual {r}")
    return float(lam), full(s, lam)


def richardson(coarse, fine, order=2):
    """Second-order Richardson extrapolation from step h (coarse) and h/2 (fine)."""
    return fine + (fine - coarse) / (2 ** order - 1)
