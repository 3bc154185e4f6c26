"""Potentials V(q) and input-driven potentials U(q, u).

Every potential carries a user-declared lower bound, an analytic gradient and,
for the kinds that are quadratic in ``q``, an analytic Hessian. Several terms
can be summed with :class:`CompositePotential`; all time-varying terms of a sum
read the same input vector.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from . import _accel, _kernels
from .errors import InputError, NumericDomainError

KINDS = ("quadratic", "double-well", "rosenbrock", "logistic-loss", "time-varying-coupled")
_CODES = {
    "quadratic": _kernels.QUADRATIC,
    "double-well": _kernels.DOUBLE_WELL,
    "rosenbrock": _kernels.ROSENBROCK,
    "logistic-loss": _kernels.LOGISTIC,
    "time-varying-coupled": _kernels.COUPLED,
}
_BOUND_SLACK = 1e-12


class LowerBoundViolation(NumericDomainError):
    pass


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """One potential term.

    ``params`` is kind specific: ``K`` (quadratic), ``scale`` (double-well),
    ``a``/``b`` (rosenbrock), ``X``/``y`` (logistic-loss), ``gain``/``B``
    (time-varying-coupled). Use the constructor helpers rather than building
    this directly.
    """

    kind: str
    dim: int
    params: Mapping[str, object]
    lower_bound: float = 0.0
    signal_dim: int = 0

    @property
    def time_varying(self) -> bool:
        return self.kind == "time-varying-coupled"

    @property
    def quadratic_in_q(self) -> bool:
        return self.kind in ("quadratic", "time-varying-coupled")

    @property
    def terms(self):
        return (self,)

    # -- batch evaluation (numpy reference path) --------------------------

    def values(self, Q, U=None):
        """Vectorized values over rows of ``Q`` (shape ``(M, n)``)."""
        p = self.params
        if self.kind == "quadratic":
            return 0.5 * np.einsum("mi,ij,mj->m", Q, p["K"], Q)
        if self.kind == "double-well":
            return p["scale"] * np.sum((Q * Q - 1.0) ** 2, axis=1)
        if self.kind == "rosenbrock":
            d1 = Q[:, 1:] - Q[:, :-1] ** 2
            d2 = p["a"] - Q[:, :-1]
            return np.sum(p["b"] * d1 * d1 + d2 * d2, axis=1)
        if self.kind == "logistic-loss":
            z = -(Q @ p["X"].T) * p["y"]
            return np.mean(np.logaddexp(0.0, z), axis=1)
        uu = np.sum(U * U, axis=1)
        d = Q - U @ p["B"].T
        return 0.5 * p["gain"] * uu * np.sum(d * d, axis=1)

    def grads(self, Q, U=None):
        p = self.params
        if self.kind == "quadratic":
            return Q @ p["K"]
        if self.kind == "double-well":
            return 4.0 * p["scale"] * Q * (Q * Q - 1.0)
        if self.kind == "rosenbrock":
            g = np.zeros_like(Q)
            d1 = Q[:, 1:] - Q[:, :-1] ** 2
            g[:, :-1] += -4.0 * p["b"] * Q[:, :-1] * d1 - 2.0 * (p["a"] - Q[:, :-1])
            g[:, 1:] += 2.0 * p["b"] * d1
            return g
        if self.kind == "logistic-loss":
            X, y = p["X"], p["y"]
            sig = expit(-(Q @ X.T) * y)
            return -(sig * y) @ X / X.shape[0]
        uu = np.sum(U * U, axis=1)
        return p["gain"] * uu[:, None] * (Q - U @ p["B"].T)

    def hessians(self, Q, U=None):
        """Per-row Hessians, shape ``(M, n, n)``; only for quadratic-in-q kinds."""
        M, n = Q.shape
        if self.kind == "quadratic":
            return np.broadcast_to(self.params["K"], (M, n, n)).copy()
        if self.kind == "time-varying-coupled":
            uu = np.sum(U * U, axis=1)
            return self.params["gain"] * uu[:, None, None] * np.eye(n)[None]
        raise InputError(f"no analytic Hessian for kind {self.kind!r}")

    def pack(self):
        p = self.params
        if self.kind == "quadratic":
            flat = np.ravel(p["K"])
        elif self.kind == "double-well":
            flat = np.array([p["scale"]])
        elif self.kind == "rosenbrock":
            flat = np.array([p["a"], p["b"]])
        elif self.kind == "logistic-loss":
            X = p["X"]
            flat = np.concatenate([[X.shape[0]], X.ravel(), p["y"]])
        else:
            flat = np.concatenate([[p["gain"], self.signal_dim], np.ravel(p["B"])])
        return _CODES[self.kind], np.asarray(flat, dtype=float)


@dataclass(frozen=True, eq=False)
class CompositePotential:
    """Sum of potential terms sharing ``q`` and the input vector."""

    terms: tuple
    _packed: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if not self.terms:
            raise InputError("a composite potential needs at least one term")
        dims = {t.dim for t in self.terms}
        if len(dims) != 1:
            raise InputError(f"terms disagree on dimension: {sorted(dims)}")
        sdims = {t.signal_dim for t in self.terms if t.time_varying}
        if len(sdims) > 1:
            raise InputError(f"time-varying terms disagree on signal dimension: {sorted(sdims)}")
        codes, chunks = zip(*(t.pack() for t in self.terms))
        offs = np.concatenate([[0], np.cumsum([len(c) for c in chunks])]).astype(np.int64)
        object.__setattr__(self, "_packed", (np.array(codes, dtype=np.int64), offs,
                                             np.concatenate(chunks)))

    @property
    def dim(self):
        return self.terms[0].dim

    @property
    def time_varying(self):
        return any(t.time_varying for t in self.terms)

    @property
    def signal_dim(self):
        return max((t.signal_dim for t in self.terms if t.time_varying), default=0)

    @property
    def lower_bound(self):
        return float(sum(t.lower_bound for t in self.terms))

    @property
    def quadratic_in_q(self):
        return all(t.quadratic_in_q for t in self.terms)

    @property
    def packed(self):
        return self._packed

    def values(self, Q, U=None):
        if _accel.use_numba():
            return _kernels.potential_values_loop(*self._packed, Q, self._signal_rows(Q, U))
        return sum(t.values(Q, U) for t in self.terms)

    def grads(self, Q, U=None):
        if _accel.use_numba():
            return _kernels.potential_grads_loop(*self._packed, Q, self._signal_rows(Q, U))
        return sum(t.grads(Q, U) for t in self.terms)

    def hessians(self, Q, U=None):
        return sum(t.hessians(Q, U) for t in self.terms)

    def _signal_rows(self, Q, U):
        if U is None:
            return np.zeros((Q.shape[0], 0))
        return np.ascontiguousarray(U, dtype=float)


def as_potential(obj) -> CompositePotential:
    """Normalize a spec, a sequence of specs, or a composite to a composite."""
    if isinstance(obj, CompositePotential):
        return obj
    if isinstance(obj, PotentialSpec):
        return CompositePotential((obj,))
    if isinstance(obj, Sequence) and all(isinstance(t, PotentialSpec) for t in obj):
        return CompositePotential(tuple(obj))
    raise InputError(f"not a potential: {obj!r}")


# ---------------------------------------------------------------------------
# constructors


def quadratic(K, lower_bound=0.0) -> PotentialSpec:
    """V(q) = q.K.q / 2 for a symmetric positive-semidefinite ``K``."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape[0] != K.shape[1]:
        raise InputError(f"K must be square, got shape {K.shape}")
    if not np.allclose(K, K.T, atol=1e-12):
        raise InputError("K must be symmetric")
    K = 0.5 * (K + K.T)
    if np.linalg.eigvalsh(K).min() < -1e-12 * max(1.0, np.abs(K).max()):
        raise InputError("K must be positive semidefinite (potential would be unbounded below)")
    return PotentialSpec("quadratic", K.shape[0], {"K": _frozen(K)}, float(lower_bound))


def double_well(dim=1, scale=1.0) -> PotentialSpec:
    """V(q) = scale * sum_i (q_i^2 - 1)^2."""
    if scale <= 0:
        raise InputError("double-well scale must be positive")
    return PotentialSpec("double-well", int(dim), {"scale": float(scale)}, 0.0)


def rosenbrock(dim=2, a=1.0, b=100.0) -> PotentialSpec:
    if dim < 2:
        raise InputError("rosenbrock needs dim >= 2")
    if b <= 0:
        raise InputError("rosenbrock b must be positive")
    return PotentialSpec("rosenbrock", int(dim), {"a": float(a), "b": float(b)}, 0.0)


def logistic_loss(X, y) -> PotentialSpec:
    """Mean logistic loss of the linear classifier ``q`` on a frozen dataset."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise InputError("dataset needs matching, non-empty X rows and labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InputError("labels must be -1 or +1")
    return PotentialSpec("logistic-loss", X.shape[1], {"X": _frozen(X), "y": _frozen(y)}, 0.0)


def coupled(B, gain=1.0) -> PotentialSpec:
    """U(q, u) = gain/2 * |u|^2 * |q - B u|^2.

    Pulls ``q`` toward ``B u`` with stiffness ``gain * |u|^2`` and vanishes
    identically when ``u = 0``.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if gain <= 0:
        raise InputError("coupling gain must be positive")
    return PotentialSpec("time-varying-coupled", B.shape[0],
                         {"gain": float(gain), "B": _frozen(B)}, 0.0, signal_dim=B.shape[1])


def load_dataset_csv(path):
    """Read ``x0..x{d-1},label`` rows; returns ``(X, y)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[-1].strip() != "label":
            raise InputError(f"{path}: header must end with 'label'")
        expected = [f"x{i}" for i in range(len(header) - 1)]
        if [h.strip() for h in header[:-1]] != expected:
            raise InputError(f"{path}: feature columns must be {','.join(expected)}")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise InputError(f"{path}: dataset is empty")
    data = np.array(rows)
    return data[:, :-1], data[:, -1]


# ---------------------------------------------------------------------------
# point operations


def _check_point(pot, q, u):
    q = np.asarray(q, dtype=float).ravel()
    if q.shape[0] != pot.dim:
        raise InputError(f"q has dimension {q.shape[0]}, potential expects {pot.dim}")
    if pot.time_varying:
        if u is None:
            raise InputError("time-varying potential needs an input u")
        u = np.asarray(u, dtype=float).ravel()
        if u.shape[0] != pot.signal_dim:
            raise InputError(f"u has dimension {u.shape[0]}, potential expects {pot.signal_dim}")
        return q[None], u[None]
    if u is not None:
        raise InputError("static potential takes no input u")
    return q[None], None


def check_values(pot, values, Q):
    """Raise if any value is non-finite or below the declared lower bound."""
    bad = ~np.isfinite(values)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise NumericDomainError(f"non-finite potential value at q={Q[k].tolist()}", where=k)
    lb = pot.lower_bound
    low = values < lb - _BOUND_SLACK * (1.0 + abs(lb))
    if low.any():
        k = int(np.flatnonzero(low)[0])
        raise LowerBoundViolation(
            f"potential value {values[k]!r} below declared bound {lb!r} at q={Q[k].tolist()}",
            where=k)


def eval_potential(spec, q, u=None) -> float:
    pot = as_potential(spec)
    Q, U = _check_point(pot, q, u)
    v = pot.values(Q, U)
    check_values(pot, v, Q)
    return float(v[0])


def grad_potential(spec, q, u=None) -> np.ndarray:
    pot = as_potential(spec)
    Q, U = _check_point(pot, q, u)
    g = pot.grads(Q, U)[0]
    if not np.all(np.isfinite(g)):
        raise NumericDomainError(f"non-finite gradient at q={Q[0].tolist()}")
    return g


def relative_error(analytic, reference) -> float:
    """Norm-wise relative error; absolute when the reference is exactly zero."""
    analytic = np.asarray(analytic, dtype=float)
    reference = np.asarray(reference, dtype=float)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(reference))
    err = np.linalg.norm(analytic - reference)
    return float(err / scale) if scale > 0 else float(err)


def central_difference(f, x, step):
    x = np.array(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = step
        g.flat[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g


@dataclass
class GradientCheck:
    max_rel_error: float
    errors: list
    threshold: float = 1e-6

    @property
    def passed(self):
        return self.max_rel_error < self.threshold


def check_gradient(spec, points, step=1e-5, threshold=1e-6) -> GradientCheck:
    """Compare the analytic gradient with central differences at each ``(q, u)``."""
    if step <= 0:
        raise InputError("step must be positive")
    points = list(points)
    if not points:
        raise InputError("need at least one point")
    errors = []
    for q, u in points:
        g = grad_potential(spec, q, u)
        fd = central_difference(lambda x: eval_potential(spec, x, u), q, step)
        errors.append(relative_error(g, fd))
    return GradientCheck(max(errors), errors, threshold)


def random_points(pot, count, seed=0, scale=1.5):
    """Seeded ``(q, u)`` pairs for checks; ``u`` is ``None`` for static potentials."""
    pot = as_potential(pot)
    rng = np.random.default_rng(seed)
    pts = []
    for _ in range(count):
        q = rng.uniform(-scale, scale, pot.dim)
        u = rng.uniform(-scale, scale, pot.signal_dim) if pot.time_varying else None
        pts.append((q, u))
    return pts
