"""Grid distances between trajectories (discrete L2, H1 and sup)."""
import numpy as np

from . import _kernels
from .errors import InputError


def _diff(a, b):
    if not a.same_grid(b) or a.n != b.n:
        raise InputError("trajectories live on different grids")
    return a.nodes - b.nodes


def _trap(N, h):
    w = np.full(N + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _mask(a, window):
    if window is None:
        return np.ones(a.N + 1, dtype=bool)
    t = a.t
    lo, hi = window
    return (t >= lo - 1e-12) & (t <= hi + 1e-12)


def l2_distance(a, b):
    d = _diff(a, b)
    return float(np.sqrt(np.dot(_trap(a.N, a.h), np.sum(d * d, axis=1))))


def h1_distance(a, b):
    """sqrt(sum_k w_k h (|a_k - b_k|^2 + |a'_k - b'_k|^2)), trapezoid weights."""
    d = _diff(a, b)
    dv = _kernels.d1_numpy(d, a.h)
    return float(np.sqrt(np.dot(_trap(a.N, a.h), np.sum(d * d + dv * dv, axis=1))))


def h1_norm(a):
    d = a.nodes
    dv = _kernels.d1_numpy(d, a.h)
    return float(np.sqrt(np.dot(_trap(a.N, a.h), np.sum(d * d + dv * dv, axis=1))))


def sup_distance(a, b, window=None):
    """Max node-wise Euclidean distance, optionally restricted to ``[lo, hi]``."""
    d = _diff(a, b)
    m = _mask(a, window)
    if not m.any():
        raise InputError(f"window {window} contains no grid node")
    return float(np.max(np.linalg.norm(d[m], axis=1)))
