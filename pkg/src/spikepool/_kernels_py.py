"""NumPy reference implementations of the time-stepping kernels."""
import numpy as np


def lowpass(x, a, b, state):
    out = np.empty_like(x)
    s = state.copy()
    for t in range(x.shape[0]):
        s = a * s + b * x[t]
        out[t] = s
    state[:] = s
    return out


def integrate_fire(drive, voltage, decay, amplitude, vmax):
    keep = 1.0 - decay
    out = np.zeros_like(drive)
    v = voltage.copy()
    for t in range(drive.shape[0]):
        v = v * keep + drive[t]
        np.maximum(v, 0.0, out=v)
        fired = v >= 1.0
        out[t, fired] = amplitude
        v[fired] -= 1.0
        np.minimum(v, vmax, out=v)
    voltage[:] = v
    return out
