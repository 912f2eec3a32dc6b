"""Backend selection for the hot time-stepping kernels.

The compiled extension is used when it imports; otherwise the numpy/scipy
fallback.  Set ``EXOCHEMO_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = None

if os.environ.get("EXOCHEMO_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.NAME

sg_weight = _impl.sg_weight
thomas = _impl.thomas
advective_flux = _impl.advective_flux
total_flux = _impl.total_flux
advance_parabolic = _impl.advance_parabolic
advance_pde_ode = _impl.advance_pde_ode


def available_backends():
    """Map backend name to module for every backend that imports."""
    out = {_kernels_py.NAME: _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out[_kernels.NAME] = _kernels
    return out
