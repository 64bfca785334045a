"""Backend selection for the hot time-stepping loops.

The compiled extension is used when importable. Set ``SPIKEPOOL_PURE_PYTHON=1``
to force the NumPy fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if not os.environ.get("SPIKEPOOL_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

_BY_NAME = {"python": _kernels_py}
if BACKEND == "cython":
    _BY_NAME["cython"] = _impl


def _resolve(impl):
    """``None`` for the active backend, a backend name, or a kernel module."""
    if impl is None:
        return _impl
    if isinstance(impl, str):
        try:
            return _BY_NAME[impl]
        except KeyError:
            raise ValueError(f"kernel backend {impl!r} is not available") from None
    return impl


# largest double strictly below the unit threshold
VMAX = float(np.nextafter(1.0, 0.0))


def _as_2d(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[:, None], True
    if x.ndim != 2:
        raise ValueError(f"expected a (steps,) or (steps, n) array, got shape {x.shape}")
    return x, False


def _state(state, n):
    if state is None:
        return np.zeros(n)
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (n,) or not state.flags.c_contiguous:
        raise ValueError(f"state must be a contiguous float64 array of shape ({n},)")
    return state


def lowpass(x, a, b, state=None, impl=None):
    """Run ``y[t] = a*y[t-1] + b*x[t]`` along axis 0.

    ``state`` (one entry per column) holds ``y[-1]`` and is updated in place.
    """
    x2, flat = _as_2d(x)
    st = _state(state, x2.shape[1])
    out = _resolve(impl).lowpass(x2, float(a), float(b), st)
    return out[:, 0] if flat else out


def integrate_fire(drive, voltage=None, decay=0.0, amplitude=1.0, vmax=VMAX, impl=None):
    """Integrate per-step voltage increments into spikes.

    ``drive[t]`` is added to the (leaky) voltage; the voltage is floored at 0,
    a spike of ``amplitude`` is emitted on reaching 1 and the voltage is reduced
    by 1, then capped at ``vmax`` so that at most one spike fires per step.
    """
    d2, flat = _as_2d(drive)
    v = _state(voltage, d2.shape[1])
    out = _resolve(impl).integrate_fire(d2, v, float(decay), float(amplitude), float(vmax))
    return out[:, 0] if flat else out
