# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled time-stepping kernels.

Mirrors ``_kernels_py`` call for call.  The ``advance_*`` functions run the
whole step loop without returning to the interpreter.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, fabs, isfinite

from .errors import LinearSolveFailure

cnp.import_array()

NAME = "cython"

cdef double _SWITCH = 0.1


cdef inline double _sg(double d) noexcept nogil:
    cdef double d2
    if fabs(d) < _SWITCH:
        d2 = d * d
        return 0.5 + d * (-1.0 / 12.0 + d2 * (1.0 / 720.0 + d2 * (-1.0 / 30240.0
                          + d2 * (1.0 / 1209600.0 + d2 * (-1.0 / 47900160.0)))))
    return 1.0 / d - 1.0 / expm1(d)


def sg_weight(delta):
    """Weight of the downstream node in the exponentially fitted face density."""
    arr = np.asarray(delta, dtype=np.float64)
    flat = np.ascontiguousarray(arr.ravel())
    out = np.empty_like(flat)
    cdef double[::1] d = flat
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(d.shape[0]):
        o[i] = _sg(d[i])
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


cdef int _thomas(const double[::1] a, const double[::1] b, const double[::1] c,
                 const double[::1] d, double[::1] x, double[::1] cp) noexcept nogil:
    # a[0], c[n-1] unused; returns -1 on a zero or non-finite pivot
    cdef Py_ssize_t n = b.shape[0], i
    cdef double m = b[0]
    if m == 0.0 or not isfinite(m):
        return -1
    cp[0] = c[0] / m
    x[0] = d[0] / m
    for i in range(1, n):
        m = b[i] - a[i] * cp[i - 1]
        if m == 0.0 or not isfinite(m):
            return -1
        cp[i] = c[i] / m
        x[i] = (d[i] - a[i] * x[i - 1]) / m
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return 0


def thomas(lower, diag, upper, rhs):
    """Solve a tridiagonal system; ``lower[0]`` and ``upper[-1]`` are ignored."""
    cdef double[::1] a = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(diag, dtype=np.float64)
    cdef double[::1] c = np.ascontiguousarray(upper, dtype=np.float64)
    cdef double[::1] d = np.ascontiguousarray(rhs, dtype=np.float64)
    n = b.shape[0]
    if not (a.shape[0] == c.shape[0] == d.shape[0] == n):
        raise ValueError("diagonals and right-hand side must have equal length")
    x = np.empty(n)
    cp = np.empty(n)
    if _thomas(a, b, c, d, x, cp) != 0:
        raise LinearSolveFailure("zero or non-finite pivot in tridiagonal solve")
    if not np.all(np.isfinite(x)):
        raise LinearSolveFailure("tridiagonal solve produced non-finite values")
    return x


def total_flux(u, v, double h, bint exponential=True):
    """Diffusive plus advective face flux ``u_x - u v_x`` on the n-1 interior faces."""
    out = advective_flux(u, v, h, exponential)
    return out + np.diff(np.asarray(u, dtype=np.float64)) / h


def advective_flux(u, v, double h, bint exponential=True):
    """Explicit face flux ``-rho_{i+1/2} (v_{i+1} - v_i)/h`` on the n-1 interior faces."""
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    out = np.empty(uu.shape[0] - 1)
    cdef double[::1] f = out
    _flux(uu, vv, f, h, exponential)
    return out


cdef inline void _flux(const double[::1] u, const double[::1] v, double[::1] f,
                       double h, bint exponential) noexcept nogil:
    cdef Py_ssize_t i
    cdef double dv, b
    for i in range(u.shape[0] - 1):
        dv = v[i + 1] - v[i]
        b = _sg(dv) if exponential else 0.5
        f[i] = -((1.0 - b) * u[i] + b * u[i + 1]) * dv / h


cdef int _u_step(double[::1] u, double[::1] uc, const double[::1] v, double dt, double h,
                 bint exponential, double[::1] lo, double[::1] di, double[::1] up,
                 double[::1] rhs, double[::1] f, double[::1] cp, double[::1] du) noexcept nogil:
    # increment form: (I - dt W^-1 L) du = dt W^-1 div F(u_old), where the
    # state is u - uc (compensated); F is linear in u so F(u - uc) = F(u) - F(uc)
    cdef Py_ssize_t n = u.shape[0], i
    cdef double q = dt / h
    cdef double dv, b
    cdef int status
    for i in range(n - 1):
        dv = v[i + 1] - v[i]
        b = _sg(dv) if exponential else 0.5
        f[i] = ((u[i + 1] - u[i]) - ((1.0 - b) * u[i] + b * u[i + 1]) * dv) / h
        f[i] -= ((uc[i + 1] - uc[i]) - ((1.0 - b) * uc[i] + b * uc[i + 1]) * dv) / h
    rhs[0] = 2.0 * q * f[0]
    for i in range(1, n - 1):
        rhs[i] = q * (f[i] - f[i - 1])
    rhs[n - 1] = -2.0 * q * f[n - 2]
    status = _thomas(lo, di, up, rhs, du, cp)
    if status == 0:
        _kahan_add(u, uc, du)
    return status


cdef inline void _kahan_add(double[::1] x, double[::1] c, const double[::1] dx) noexcept nogil:
    cdef Py_ssize_t i
    cdef double y, t
    for i in range(x.shape[0]):
        y = dx[i] - c[i]
        t = x[i] + y
        c[i] = (t - x[i]) - y
        x[i] = t


cdef void _u_matrix(Py_ssize_t n, double dt, double h, double[::1] lo,
                    double[::1] di, double[::1] up) noexcept nogil:
    cdef double r = dt / (h * h)
    cdef Py_ssize_t i
    for i in range(n):
        lo[i] = -r
        di[i] = 1.0 + 2.0 * r
        up[i] = -r
    up[0] = -2.0 * r
    lo[n - 1] = -2.0 * r


cdef bint _all_finite(const double[::1] a) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(a.shape[0]):
        if not isfinite(a[i]):
            return False
    return True


def _carry(c, Py_ssize_t n):
    if c is None:
        return np.zeros(n)
    if c.shape[0] != n:
        raise ValueError("compensation array has the wrong length")
    return c


def advance_parabolic(double[::1] u, double[::1] v, long nsteps, double dt,
                      double h, double D, double v_star, bint exponential=True,
                      uc=None, vc=None):
    """Advance ``(u, v)`` in place by ``nsteps`` IMEX steps of the D > 0 system.

    ``uc``/``vc`` carry the rounding compensation of the state between calls
    (the represented state is ``u - uc``, ``v - vc``); updated in place.
    """
    cdef Py_ssize_t n = u.shape[0], i
    cdef long k
    cdef int status = 0
    cdef double s = dt * D / (h * h)
    cdef double[::1] ucv = _carry(uc, n), vcv = _carry(vc, n)
    cdef double[::1] lo = np.empty(n), di = np.empty(n), up = np.empty(n)
    cdef double[::1] vlo = np.empty(n), vdi = np.empty(n), vup = np.empty(n)
    cdef double[::1] rhs = np.empty(n), f = np.empty(n - 1), cp = np.empty(n)
    cdef double[::1] dx = np.empty(n)
    _u_matrix(n, dt, h, lo, di, up)
    with nogil:
        for i in range(n):
            vlo[i] = -s
            vup[i] = -s
        vup[0] = 0.0
        vlo[n - 1] = 0.0
        vdi[0] = 1.0
        vdi[n - 1] = 1.0
        for k in range(nsteps):
            status = _u_step(u, ucv, v, dt, h, exponential, lo, di, up, rhs, f, cp, dx)
            if status != 0:
                break
            for i in range(1, n - 1):
                vdi[i] = 1.0 + 2.0 * s + dt * u[i]
                rhs[i] = (s * (v[i + 1] - 2.0 * v[i] + v[i - 1]) - dt * u[i] * v[i]) \
                    - (s * (vcv[i + 1] - 2.0 * vcv[i] + vcv[i - 1]) - dt * u[i] * vcv[i])
            rhs[0] = (v_star - v[0]) + vcv[0]
            rhs[n - 1] = (v_star - v[n - 1]) + vcv[n - 1]
            status = _thomas(vlo, vdi, vup, rhs, dx, cp)
            if status != 0:
                break
            _kahan_add(v, vcv, dx)
            if not (_all_finite(u) and _all_finite(v)):
                status = -1
                break
    if status != 0:
        raise LinearSolveFailure("tridiagonal solve failed or produced non-finite state")


def advance_pde_ode(double[::1] u, double[::1] v, long nsteps, double dt,
                    double h, bint exponential=True, uc=None, vc=None):
    """Advance ``(u, v)`` in place by ``nsteps`` steps of the D = 0 system.

    ``vc`` is accepted for symmetry and left untouched: the multiplicative
    chemical update needs no compensation.
    """
    cdef Py_ssize_t n = u.shape[0], i
    cdef long k
    cdef int status = 0
    cdef double[::1] ucv = _carry(uc, n)
    cdef double[::1] lo = np.empty(n), di = np.empty(n), up = np.empty(n)
    cdef double[::1] rhs = np.empty(n), f = np.empty(n - 1), cp = np.empty(n)
    cdef double[::1] dx = np.empty(n)
    _u_matrix(n, dt, h, lo, di, up)
    with nogil:
        for k in range(nsteps):
            status = _u_step(u, ucv, v, dt, h, exponential, lo, di, up, rhs, f, cp, dx)
            if status != 0:
                break
            for i in range(n):
                v[i] = v[i] * exp(-dt * u[i])
            if not (_all_finite(u) and _all_finite(v)):
                status = -1
                break
    if status != 0:
        raise LinearSolveFailure("tridiagonal solve failed or produced non-finite state")
