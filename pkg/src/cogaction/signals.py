"""External input signals t -> u(t) on a finite horizon."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

SIGNAL_KINDS = ("zero", "constant", "sinusoid", "piecewise-constant-replay")

# relative slack when locating a hold interval, so that t = k*hold computed in
# floating point lands in row k rather than k-1
_HOLD_SLACK = 1e-9


def _vec(x, dim=None):
    a = np.array(x, dtype=float).ravel()
    a.setflags(write=False)
    if dim is not None and a.shape[0] != dim:
        raise InputError(f"expected {dim} components, got {a.shape[0]}")
    return a


@dataclass(frozen=True, eq=False)
class InputSignal:
    kind: str
    dim: int
    horizon: float
    value: np.ndarray | None = None
    amplitude: np.ndarray | None = None
    frequency: np.ndarray | None = None
    phase: np.ndarray | None = None
    table: np.ndarray | None = None
    hold: float | None = None

    def _check_time(self, t):
        t = np.asarray(t, dtype=float)
        slack = 1e-12 * max(1.0, self.horizon)
        if np.any(t < -slack) or np.any(t > self.horizon + slack) or np.any(np.isnan(t)):
            raise InputError(f"t outside [0, {self.horizon}]")
        return t

    def _row(self, t, left=False):
        x = np.asarray(t) / self.hold
        if left:
            idx = np.ceil(x - _HOLD_SLACK * np.maximum(1.0, x)) - 1
        else:
            idx = np.floor(x + _HOLD_SLACK * np.maximum(1.0, x))
        return np.clip(idx, 0, self.table.shape[0] - 1).astype(int)

    def sample_many(self, ts, left=False):
        """Samples at each time in ``ts``, shape ``(len(ts), dim)``.

        ``left=True`` takes the left limit of piecewise-constant signals, which
        the integrators use for the end-of-step stage.
        """
        ts = self._check_time(np.atleast_1d(ts))
        if self.kind == "zero":
            return np.zeros((ts.shape[0], self.dim))
        if self.kind == "constant":
            return np.tile(self.value, (ts.shape[0], 1))
        if self.kind == "sinusoid":
            arg = 2.0 * math.pi * self.frequency[None] * ts[:, None] + self.phase[None]
            return self.amplitude[None] * np.sin(arg)
        return self.table[self._row(ts, left)].copy()

    def sample(self, t):
        return self.sample_many(np.array([t]))[0]

    def bounds(self):
        """Componentwise (min, max) over the horizon."""
        if self.kind == "zero":
            z = np.zeros(self.dim)
            return z, z
        if self.kind == "constant":
            return self.value, self.value
        if self.kind == "sinusoid":
            return -np.abs(self.amplitude), np.abs(self.amplitude)
        rows = self.table[: self._row(self.horizon) + 1]
        return rows.min(axis=0), rows.max(axis=0)


def zero(dim, horizon):
    return InputSignal("zero", int(dim), float(horizon))


def constant(value, horizon):
    v = _vec(value)
    return InputSignal("constant", v.shape[0], float(horizon), value=v)


def sinusoid(amplitude, frequency, phase=None, horizon=1.0):
    """u_i(t) = amplitude_i * sin(2 pi frequency_i t + phase_i); frequency in Hz."""
    a = _vec(amplitude)
    f = _vec(np.broadcast_to(frequency, a.shape))
    p = _vec(np.zeros_like(a) if phase is None else np.broadcast_to(phase, a.shape))
    return InputSignal("sinusoid", a.shape[0], float(horizon), amplitude=a, frequency=f, phase=p)


def replay(table, hold, horizon):
    """Piecewise-constant replay: row ``floor(t / hold)``, clamped to the last row."""
    tab = np.atleast_2d(np.asarray(table, dtype=float))
    if tab.shape[0] == 0:
        raise InputError("replay table is empty")
    if hold <= 0:
        raise InputError("hold interval must be positive")
    if not np.all(np.isfinite(tab)):
        raise InputError("replay table has non-finite entries")
    tab.setflags(write=False)
    return InputSignal("piecewise-constant-replay", tab.shape[1], float(horizon),
                       table=tab, hold=float(hold))


def load_replay_csv(path):
    """Read a table with header ``u0..u{m-1}``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise InputError(f"{path}: missing header")
        expected = [f"u{i}" for i in range(len(header))]
        if [h.strip() for h in header] != expected:
            raise InputError(f"{path}: header must be {','.join(expected)}")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise InputError(f"{path}: replay table is empty")
    return np.array(rows)


def sample_signal(signal: InputSignal, t: float) -> np.ndarray:
    return signal.sample(t)


def stage_samples(signal, times, dim=0):
    """RK4 stage inputs for steps starting at ``times[:-1]``.

    Returns ``(steps, 3, m)``: the right limit at the step start, the midpoint,
    and the left limit at the step end. With no signal, ``m = dim = 0``.
    """
    steps = len(times) - 1
    if signal is None:
        return np.zeros((steps, 3, dim))
    t0, t1 = times[:-1], times[1:]
    out = np.empty((steps, 3, signal.dim))
    out[:, 0] = signal.sample_many(t0)
    out[:, 1] = signal.sample_many(0.5 * (t0 + t1))
    out[:, 2] = signal.sample_many(t1, left=True)
    return out
