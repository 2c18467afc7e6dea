"""Pure-numpy reference kernels for the 1-D explicit step.

The compiled extension in ``_kernels.pyx`` mirrors these element by
element, in the same operation order, so both backends produce
bit-identical doubles.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def combine_1d(v: np.ndarray, w0: np.ndarray, wp: np.ndarray, wm: np.ndarray) -> np.ndarray:
    """out[i] = w0[i]*v[i] + wp[i]*v[i+1] + wm[i]*v[i-1].

    Callers guarantee wp[-1] == 0 and wm[0] == 0.
    """
    out = w0 * v
    out[:-1] = out[:-1] + wp[:-1] * v[1:]
    out[1:] = out[1:] + wm[1:] * v[:-1]
    return out


def upwind_grad_1d(v: np.ndarray, b: np.ndarray, dx: float) -> np.ndarray:
    """One-sided difference selected by the drift sign; zero where the
    upwind neighbor is off-grid."""
    fwd = np.zeros_like(v)
    bwd = np.zeros_like(v)
    fwd[:-1] = (v[1:] - v[:-1]) / dx
    bwd[1:] = (v[1:] - v[:-1]) / dx
    return np.where(b >= 0.0, fwd, bwd)
