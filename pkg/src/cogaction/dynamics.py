"""Causal limit dynamics integrated with classical fixed-step RK4.

Second-order kinds solve ``m q'' + eta q' + grad U(q, u(t)) = 0`` (``eta = 0``
is Newton); gradient-flow kinds solve ``q' = -grad U(q, u(t)) / eta``.
Online kinds read the input signal at the RK4 stage times: the right limit at
the step start, the midpoint, and the left limit at the step end, so that
hold boundaries aligned with the grid are integrated without smearing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _accel, _kernels
from .action import Trajectory
from .errors import DivergenceError, InputError
from .potential import as_potential
from .signals import InputSignal, stage_samples

SECOND_ORDER = ("newton", "heavy-ball", "online-heavy-ball")
FIRST_ORDER = ("gradient-flow", "online-gradient-flow")
KINDS = SECOND_ORDER + FIRST_ORDER


@dataclass(frozen=True, eq=False)
class DynamicsSpec:
    kind: str
    potential: object
    q0: np.ndarray
    T: float
    dt: float
    mass: float | None = 1.0
    eta: float = 0.0
    v0: np.ndarray | None = None
    signal: InputSignal | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown dynamics kind {self.kind!r}")
        pot = as_potential(self.potential)
        object.__setattr__(self, "potential", pot)
        q0 = np.array(self.q0, dtype=float).ravel()
        if q0.shape != (pot.dim,):
            raise InputError(f"q0 must have dimension {pot.dim}")
        object.__setattr__(self, "q0", q0)
        if not (self.T > 0 and self.dt > 0) or self.dt > self.T * (1 + 1e-12):
            raise InputError("need 0 < dt <= T")
        if self.kind == "newton" and self.eta != 0:
            raise InputError("newton dynamics has eta = 0; use heavy-ball for eta > 0")
        if self.kind in ("heavy-ball", "online-heavy-ball") + FIRST_ORDER and not self.eta > 0:
            raise InputError(f"{self.kind} needs eta > 0")
        if self.kind in SECOND_ORDER:
            if not (self.mass and self.mass > 0):
                raise InputError("second-order dynamics needs mass > 0")
            v0 = np.zeros(pot.dim) if self.v0 is None else np.array(self.v0, dtype=float).ravel()
            if v0.shape != (pot.dim,):
                raise InputError(f"v0 must have dimension {pot.dim}")
            object.__setattr__(self, "v0", v0)
        online = self.kind.startswith("online")
        if online and self.signal is None:
            raise InputError(f"{self.kind} needs an input signal")
        if pot.time_varying and self.signal is None:
            raise InputError("time-varying potential needs a signal")
        if self.signal is not None and pot.time_varying and self.signal.dim != pot.signal_dim:
            raise InputError("signal dimension does not match the potential")

    @property
    def steps(self):
        # whole steps covering [0, T]; the step actually taken is T/steps <= dt
        r = self.T / self.dt
        return max(1, math.ceil(r - 1e-9 * r))

    @property
    def step(self):
        return self.T / self.steps

    @property
    def times(self):
        return np.linspace(0.0, self.T, self.steps + 1)

    def describe(self):
        return {"kind": self.kind, "T": self.T, "dt": self.dt, "step": self.step,
                "steps": self.steps, "mass": self.mass, "eta": self.eta,
                "integrator": "rk4-fixed-step"}


@dataclass(frozen=True, eq=False)
class IntegrationResult:
    t: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray | None
    energy: np.ndarray
    spec: DynamicsSpec

    def trajectory(self):
        return Trajectory(self.positions, self.spec.T)


def _stage_inputs(spec):
    pot = spec.potential
    sig = spec.signal if pot.time_varying else None
    return np.ascontiguousarray(stage_samples(sig, spec.times, 0))


def _numpy_grad(pot):
    def grad(q, u):
        return pot.grads(q[None], u[None] if u.size else None)[0]
    return grad


def _raise_divergence(spec, bad):
    t_bad = spec.times[bad]
    raise DivergenceError(f"state became non-finite at t={t_bad!r}", t_bad)


def _node_inputs(spec):
    if spec.potential.time_varying:
        return spec.signal.sample_many(spec.times)
    return None


def integrate_second_order(spec: DynamicsSpec) -> IntegrationResult:
    if spec.kind not in SECOND_ORDER:
        raise InputError(f"{spec.kind} is not a second-order kind")
    pot = spec.potential
    us = _stage_inputs(spec)
    h = spec.step
    if _accel.use_numba():
        Q, V, bad = _kernels.rk4_second_order_loop(*pot.packed, spec.q0, spec.v0, float(spec.mass),
                                                   float(spec.eta), h, spec.steps, us)
    else:
        # divergence is detected from non-finite states below, not from warnings
        with np.errstate(over="ignore", invalid="ignore"):
            Q, V, bad = _kernels.rk4_second_order_numpy(_numpy_grad(pot), spec.q0, spec.v0,
                                                        spec.mass, spec.eta, h, spec.steps, us)
    if bad >= 0:
        _raise_divergence(spec, bad)
    E = mechanical_energy(Q, V, spec.mass, pot, _node_inputs(spec))
    return IntegrationResult(spec.times, Q, V, E, spec)


def integrate_gradient_flow(spec: DynamicsSpec) -> IntegrationResult:
    if spec.kind not in FIRST_ORDER:
        raise InputError(f"{spec.kind} is not a gradient-flow kind")
    pot = spec.potential
    us = _stage_inputs(spec)
    h = spec.step
    if _accel.use_numba():
        Q, bad = _kernels.rk4_first_order_loop(*pot.packed, spec.q0, float(spec.eta), h,
                                               spec.steps, us)
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            Q, bad = _kernels.rk4_first_order_numpy(_numpy_grad(pot), spec.q0, spec.eta, h,
                                                    spec.steps, us)
    if bad >= 0:
        _raise_divergence(spec, bad)
    E = mechanical_energy(Q, None, None, pot, _node_inputs(spec))
    return IntegrationResult(spec.times, Q, None, E, spec)


def integrate(spec: DynamicsSpec) -> IntegrationResult:
    if spec.kind in SECOND_ORDER:
        return integrate_second_order(spec)
    return integrate_gradient_flow(spec)


def mechanical_energy(positions, velocities, mass, potential, inputs=None) -> np.ndarray:
    """``m/2 |q'|^2 + U(q, u(t))`` per sample; kinetic part is 0 without velocities."""
    Q = np.atleast_2d(np.asarray(positions, dtype=float))
    pot = as_potential(potential)
    if pot.time_varying and inputs is None:
        raise InputError("time-varying potential needs input samples")
    if inputs is not None and len(inputs) != len(Q):
        raise InputError("positions and inputs differ in length")
    E = pot.values(Q, inputs if pot.time_varying else None)
    if velocities is not None:
        V = np.atleast_2d(np.asarray(velocities, dtype=float))
        if V.shape != Q.shape:
            raise InputError("positions and velocities differ in shape")
        E = E + 0.5 * mass * np.sum(V * V, axis=1)
    return E


def fit_decay_rate(t, q):
    """Least-squares rate ``r`` of ``|q| ~ C e^{-r t}`` (scalar series)."""
    t = np.asarray(t, dtype=float)
    y = np.log(np.abs(np.asarray(q, dtype=float).ravel()))
    slope = np.polyfit(t, y, 1)[0]
    return -float(slope)


def energy_drift(E):
    return float(np.max(np.abs(E - E[0])) / max(abs(E[0]), math.ulp(1.0)))
