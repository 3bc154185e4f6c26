"""Action functionals discretized on a uniform grid.

Four families share one integrand template

    weight(t) * ( a2/2 |q''|^2 + a1/2 |q'|^2 + cross q'.q'' + a0/2 |q|^2 + sign * U(q, u) )

integrated with the trapezoid rule over nodes ``t_k = k h``:

==================  ===========  ======  =====  ====  ====  ==================
family              a2           a1      cross  a0    sign  default weight
==================  ===========  ======  =====  ====  ====  ==================
classical-S         0            m       0      0     -1    1, or e^{eta t/m}
W-eps               eps^2 m      0       0      0     +1    e^{-t/eps}
W-eps-dissipative   eps^2 m      eps eta 0      0     +1    e^{-t/eps}
Gamma               mu           nu      gamma  kappa +1    any positive
==================  ===========  ======  =====  ====  ====  ==================

with ``mu = alpha + gamma2**2``, ``nu = beta + gamma1**2``, ``gamma = gamma1*gamma2``.

Derivatives use second-order central stencils inside and one-sided
second-order stencils at the ends. The classical family is the exception: its
kinetic term is summed per interval with forward differences, because the
central first difference cannot see odd-even oscillations and would make the
second variation spuriously indefinite.

Free variables are nodes ``2..N`` under the Cauchy clamp (node 0 = q0,
node 1 = q0 + h v0) and nodes ``1..N-1`` under the Dirichlet clamp
(node 0 = q0, node N = qT).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import ConfigurationError, HypothesisViolation, InputError, NumericDomainError
from .potential import as_potential, check_values
from .signals import InputSignal

FAMILIES = ("classical-S", "W-eps", "W-eps-dissipative", "Gamma")
W_FAMILIES = ("W-eps", "W-eps-dissipative")

WEIGHT_FLOOR = 1e-300
LOG_WEIGHT_FLOOR = math.log(WEIGHT_FLOOR)
THEOREM_MAX_DECAY = 600.0


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Node values ``nodes[k] = q(k h)`` on ``[0, T]``, shape ``(N+1, n)``."""

    nodes: np.ndarray
    T: float

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        if nodes.ndim != 2 or nodes.shape[0] < 5:
            raise InputError("a trajectory needs at least 5 nodes (N >= 4)")
        if not np.all(np.isfinite(nodes)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(nodes), axis=1))[0])
            raise NumericDomainError(f"non-finite trajectory node {bad}", where=bad)
        if not self.T > 0:
            raise InputError("horizon T must be positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "T", float(self.T))

    @classmethod
    def from_function(cls, f, T, N):
        t = np.linspace(0.0, T, N + 1)
        return cls(np.asarray(f(t), dtype=float).reshape(N + 1, -1), T)

    @property
    def N(self):
        return self.nodes.shape[0] - 1

    @property
    def n(self):
        return self.nodes.shape[1]

    @property
    def h(self):
        return self.T / self.N

    @property
    def t(self):
        return np.linspace(0.0, self.T, self.N + 1)

    def velocity(self):
        return _kernels.d1_numpy(self.nodes, self.h)

    def acceleration(self):
        return _kernels.d2_numpy(self.nodes, self.h)

    def third_derivative_end(self):
        q = self.nodes
        return (q[-1] - 3.0 * q[-2] + 3.0 * q[-3] - q[-4]) / self.h ** 3

    def same_grid(self, other):
        return self.N == other.N and math.isclose(self.T, other.T, rel_tol=1e-12)


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightFunction:
    """Positive time weight. ``table`` is node-indexed for the tabulated kind."""

    kind: str = "constant-one"
    eps: float | None = None
    eta: float | None = None
    mass: float | None = None
    table: tuple | None = None

    def __post_init__(self):
        if self.kind == "exp-decay":
            if not (self.eps and self.eps > 0):
                raise InputError("exp-decay weight needs eps > 0")
        elif self.kind == "exp-growth":
            if self.eta is None or self.eta < 0 or not (self.mass and self.mass > 0):
                raise InputError("exp-growth weight needs eta >= 0 and mass > 0")
        elif self.kind == "tabulated":
            if not self.table or min(self.table) <= 0:
                raise InputError("tabulated weight needs a non-empty positive table")
        elif self.kind != "constant-one":
            raise InputError(f"unknown weight kind {self.kind!r}")

    def log_weights(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant-one":
            return np.zeros_like(t)
        if self.kind == "exp-decay":
            return -t / self.eps
        if self.kind == "exp-growth":
            return self.eta * t / self.mass
        raise InputError("tabulated weights are only defined at grid nodes")

    def bounds(self, T):
        """``(C1, C2)`` with ``C1 <= weight(t) <= C2`` on ``[0, T]``."""
        if self.kind == "constant-one":
            return 1.0, 1.0
        if self.kind == "exp-decay":
            return math.exp(-T / self.eps), 1.0
        if self.kind == "exp-growth":
            return 1.0, math.exp(self.eta * T / self.mass)
        return min(self.table), max(self.table)

    def decay_exponent(self, T):
        """Largest |log weight| over the horizon."""
        if self.kind == "tabulated":
            return max(abs(math.log(v)) for v in self.table)
        return float(np.max(np.abs(self.log_weights(np.array([0.0, T])))))


def exp_decay(eps):
    return WeightFunction("exp-decay", eps=float(eps))


def exp_growth(eta, mass):
    return WeightFunction("exp-growth", eta=float(eta), mass=float(mass))


def tabulated(values):
    return WeightFunction("tabulated", table=tuple(float(v) for v in values))


# ---------------------------------------------------------------------------
# specs


@dataclass(frozen=True, eq=False)
class ActionSpec:
    family: str
    potential: object
    q0: np.ndarray
    v0: np.ndarray
    T: float
    mass: float = 1.0
    eta: float = 0.0
    eps: float | None = None
    alpha: float = 0.0
    beta: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    kappa: float = 0.0
    weight: WeightFunction | None = None
    signal: InputSignal | None = None
    clamp: str = "cauchy"
    qT: np.ndarray | None = None
    theorem_mode: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        pot = as_potential(self.potential)
        object.__setattr__(self, "potential", pot)
        q0 = np.array(self.q0, dtype=float).ravel()
        v0 = np.array(self.v0, dtype=float).ravel()
        if q0.shape != (pot.dim,) or v0.shape != (pot.dim,):
            raise InputError(f"q0 and v0 must have the potential's dimension {pot.dim}")
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "v0", v0)
        if not self.T > 0:
            raise InputError("horizon T must be positive")
        if not self.mass > 0:
            raise InputError("mass must be positive")
        if self.eta < 0:
            raise InputError("dissipation eta must be non-negative")
        if self.family in W_FAMILIES:
            if not (self.eps and self.eps > 0):
                raise InputError(f"{self.family} needs eps > 0")
            if self.weight is not None and self.weight != exp_decay(self.eps):
                raise InputError(f"{self.family} fixes its weight to exp-decay(eps)")
        if self.family == "Gamma" and (self.alpha < 0 or self.beta < 0 or self.kappa < 0):
            raise InputError("alpha, beta and kappa must be non-negative")
        if self.clamp not in ("cauchy", "dirichlet"):
            raise InputError(f"unknown clamp {self.clamp!r}")
        if self.clamp == "dirichlet":
            if self.family != "classical-S":
                raise InputError("the Dirichlet clamp is only offered for classical-S")
            if self.qT is None:
                raise InputError("the Dirichlet clamp needs a terminal position qT")
            qT = np.array(self.qT, dtype=float).ravel()
            if qT.shape != (pot.dim,):
                raise InputError("qT must have the potential's dimension")
            object.__setattr__(self, "qT", qT)
        if pot.time_varying:
            if self.signal is None:
                raise InputError("time-varying potential needs a signal")
            if self.signal.dim != pot.signal_dim:
                raise InputError(f"signal dimension {self.signal.dim} != {pot.signal_dim}")
            if self.signal.horizon < self.T * (1 - 1e-12):
                raise InputError("signal horizon shorter than the action horizon")

    @property
    def mu(self):
        return self.alpha + self.gamma2 ** 2

    @property
    def nu(self):
        return self.beta + self.gamma1 ** 2

    @property
    def gamma(self):
        return self.gamma1 * self.gamma2

    def coefficients(self):
        """``(a2, a1, cross, a0, sign, forward_kinetic)`` of the integrand template."""
        m = self.mass
        if self.family == "classical-S":
            return 0.0, m, 0.0, 0.0, -1.0, True
        if self.family == "W-eps":
            return self.eps ** 2 * m, 0.0, 0.0, 0.0, 1.0, False
        if self.family == "W-eps-dissipative":
            return self.eps ** 2 * m, self.eps * self.eta, 0.0, 0.0, 1.0, False
        return self.mu, self.nu, self.gamma, self.kappa, 1.0, False

    def weight_function(self):
        if self.family in W_FAMILIES:
            return exp_decay(self.eps)
        if self.weight is not None:
            return self.weight
        if self.family == "classical-S" and self.eta > 0:
            return exp_growth(self.eta, self.mass)
        return WeightFunction()

    def replace(self, **changes):
        import dataclasses

        return dataclasses.replace(self, **changes)


def check_hypotheses(spec: ActionSpec):
    """Raise :class:`HypothesisViolation` for the first failed theorem hypothesis."""
    if spec.family == "Gamma":
        for name, value in (("alpha>0", spec.alpha), ("beta>0", spec.beta),
                            ("kappa>0", spec.kappa)):
            if not value > 0:
                raise HypothesisViolation(name, f"{name.split('>')[0]} = {value!r} must be positive")
    lb = spec.potential.lower_bound
    if not np.isfinite(lb):
        raise HypothesisViolation("bounded-below", "potential has no finite declared lower bound")
    w = spec.weight_function()
    if w.decay_exponent(spec.T) > THEOREM_MAX_DECAY:
        raise HypothesisViolation(
            "weight-bounds",
            f"weight varies by e^{w.decay_exponent(spec.T):.1f} over the horizon "
            f"(limit e^{THEOREM_MAX_DECAY:.0f}); use a larger eps or a shorter horizon")
    c1, c2 = w.bounds(spec.T)
    if not (0 < c1 <= c2 < np.inf):
        raise HypothesisViolation("weight-bounds", f"weight bounds C1={c1!r}, C2={c2!r}")


# ---------------------------------------------------------------------------
# discrete functional


@dataclass(frozen=True, eq=False)
class DiscreteFunctional:
    spec: ActionSpec
    N: int
    h: float
    t: np.ndarray
    weights: np.ndarray
    c: np.ndarray
    cmid: np.ndarray
    U: np.ndarray | None
    free_start: int
    free_stop: int
    fixed: dict = field(repr=False)

    @property
    def n(self):
        return self.spec.potential.dim

    @property
    def T(self):
        return self.spec.T

    @property
    def family(self):
        return self.spec.family

    @property
    def free(self):
        return slice(self.free_start, self.free_stop)

    @property
    def n_free(self):
        return (self.free_stop - self.free_start) * self.n

    @property
    def is_quadratic(self):
        return self.spec.potential.quadratic_in_q

    def describe(self):
        return {"family": self.family, "N": self.N, "h": self.h,
                "weight": self.spec.weight_function().kind}

    # -- trajectories -----------------------------------------------------

    def assemble(self, x_free):
        nodes = np.empty((self.N + 1, self.n))
        for k, v in self.fixed.items():
            nodes[k] = v
        nodes[self.free] = np.asarray(x_free, dtype=float).reshape(-1, self.n)
        return nodes

    def free_vector(self, traj):
        return np.ascontiguousarray(traj.nodes[self.free]).ravel()

    def initial_trajectory(self):
        """Straight line ``q0 + t v0`` (or the chord to ``qT`` under Dirichlet)."""
        s = self.spec
        if s.clamp == "dirichlet":
            nodes = s.q0[None] + (self.t / s.T)[:, None] * (s.qT - s.q0)[None]
        else:
            nodes = s.q0[None] + self.t[:, None] * s.v0[None]
        for k, v in self.fixed.items():
            nodes[k] = v
        return Trajectory(nodes, s.T)

    def check_trajectory(self, traj):
        if not isinstance(traj, Trajectory):
            raise InputError("expected a Trajectory")
        if traj.N != self.N or traj.n != self.n or not math.isclose(traj.T, self.T, rel_tol=1e-12):
            raise InputError(f"trajectory grid (N={traj.N}, n={traj.n}, T={traj.T}) does not match "
                             f"functional grid (N={self.N}, n={self.n}, T={self.T})")
        for k, v in self.fixed.items():
            if not np.allclose(traj.nodes[k], v, rtol=1e-12, atol=1e-12):
                raise InputError(f"node {k} violates the {self.spec.clamp} clamp")

    # -- value and gradient ----------------------------------------------

    def _potential_terms(self, nodes, with_grad):
        pot = self.spec.potential
        vals = pot.values(nodes, self.U)
        if not np.all(np.isfinite(vals)):
            k = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise NumericDomainError(f"non-finite integrand at node {k}", where=k)
        check_values(pot, vals, nodes)
        sign = self.spec.coefficients()[4]
        value = sign * float(np.dot(self.c, vals))
        if not with_grad:
            return value, None
        return value, sign * self.c[:, None] * pot.grads(nodes, self.U)

    def value_nodes(self, nodes):
        a2, a1, cross, a0, _, forward = self.spec.coefficients()
        vq, _ = _kernels.quadratic_part(nodes, self.h, self.c, self.cmid, a2, a1, cross, a0, forward)
        vp, _ = self._potential_terms(nodes, False)
        value = vq + vp
        if not np.isfinite(value):
            raise NumericDomainError("non-finite functional value")
        return value

    def value_and_grad_nodes(self, nodes):
        a2, a1, cross, a0, _, forward = self.spec.coefficients()
        vq, gq = _kernels.quadratic_part(nodes, self.h, self.c, self.cmid, a2, a1, cross, a0, forward)
        vp, gp = self._potential_terms(nodes, True)
        g = gq + gp
        for k in self.fixed:
            g[k] = 0.0
        value = vq + vp
        if not np.isfinite(value):
            raise NumericDomainError("non-finite functional value")
        return value, g

    def value_and_grad(self, x_free):
        """Value and free-variable gradient as flat vectors (solver interface)."""
        v, g = self.value_and_grad_nodes(self.assemble(x_free))
        return v, np.ascontiguousarray(g[self.free]).ravel()

    # -- Hessian ----------------------------------------------------------

    def hessian_sparse(self, nodes=None, include_potential=True):
        """Exact Hessian over free variables when the potential is quadratic in q.

        For other potentials only the derivative and confinement terms are
        included (``include_potential`` is ignored); the result then serves as a
        preconditioner, not as the Hessian.
        """
        N, n, h = self.N, self.n, self.h
        a2, a1, cross, a0, sign, forward = self.spec.coefficients()
        D1, D2 = _stencil_matrices(N, h)
        C = sp.diags(self.c)
        H = a2 * (D2.T @ C @ D2) + a0 * C
        if cross:
            H = H + cross * (D2.T @ C @ D1 + D1.T @ C @ D2)
        if a1:
            if forward:
                Df = sp.diags([-np.ones(N), np.ones(N)], [0, 1], shape=(N, N + 1)) / h
                H = H + a1 * (Df.T @ sp.diags(self.cmid) @ Df)
            else:
                H = H + a1 * (D1.T @ C @ D1)
        H = sp.kron(H, sp.identity(n), format="csr")
        if include_potential and self.is_quadratic:
            if nodes is None:
                nodes = self.initial_trajectory().nodes
            blocks = sign * self.c[:, None, None] * self.spec.potential.hessians(nodes, self.U)
            H = H + sp.block_diag(list(blocks), format="csr")
        idx = np.arange(self.free_start * n, self.free_stop * n)
        return H[idx][:, idx].tocsr()


def _stencil_matrices(N, h):
    """Sparse first- and second-derivative operators matching the kernels."""
    k = np.arange(1, N)
    r1 = np.concatenate([[0, 0, 0], k, k, [N, N, N]])
    c1 = np.concatenate([[0, 1, 2], k + 1, k - 1, [N, N - 1, N - 2]])
    v1 = np.concatenate([[-3, 4, -1], np.ones(N - 1), -np.ones(N - 1), [3, -4, 1]]) / (2 * h)
    r2 = np.concatenate([[0] * 4, k, k, k, [N] * 4])
    c2 = np.concatenate([[0, 1, 2, 3], k + 1, k, k - 1, [N, N - 1, N - 2, N - 3]])
    v2 = np.concatenate([[2, -5, 4, -1], np.ones(N - 1), -2 * np.ones(N - 1), np.ones(N - 1),
                         [2, -5, 4, -1]]) / (h * h)
    D1 = sp.csr_matrix((v1, (r1, c1)), shape=(N + 1, N + 1))
    D2 = sp.csr_matrix((v2, (r2, c2)), shape=(N + 1, N + 1))
    return D1, D2


def build_discrete(spec: ActionSpec, N: int) -> DiscreteFunctional:
    """Precompute grid, node weights, signal samples and clamped nodes."""
    N = int(N)
    if N < 4:
        raise InputError("N must be at least 4")
    if spec.theorem_mode:
        check_hypotheses(spec)
    T = spec.T
    h = T / N
    t = np.linspace(0.0, T, N + 1)
    w = spec.weight_function()
    if w.kind == "tabulated":
        if len(w.table) != N + 1:
            raise InputError(f"tabulated weight has {len(w.table)} entries, grid has {N + 1} nodes")
        logw = np.log(np.array(w.table))
        logmid = 0.5 * (logw[1:] + logw[:-1])
    else:
        logw = w.log_weights(t)
        logmid = w.log_weights(0.5 * (t[1:] + t[:-1]))
    if logw.min() < LOG_WEIGHT_FLOOR:
        raise ConfigurationError(
            f"node weights underflow below {WEIGHT_FLOOR:g} (log-weight {logw.min():.1f}); "
            "increase eps or shorten the horizon")
    if logw.max() > -LOG_WEIGHT_FLOOR:
        raise ConfigurationError("node weights overflow; decrease eta/m or shorten the horizon")
    weights = np.maximum(np.exp(logw), WEIGHT_FLOOR)
    trap = np.ones(N + 1)
    trap[0] = trap[-1] = 0.5
    c = h * trap * weights
    cmid = h * np.maximum(np.exp(logmid), WEIGHT_FLOOR)
    U = spec.signal.sample_many(t) if spec.potential.time_varying else None
    if spec.clamp == "dirichlet":
        fixed = {0: spec.q0.copy(), N: spec.qT.copy()}
        start, stop = 1, N
    else:
        fixed = {0: spec.q0.copy(), 1: spec.q0 + h * spec.v0}
        start, stop = 2, N + 1
    for arr in (t, weights, c, cmid):
        arr.setflags(write=False)
    return DiscreteFunctional(spec, N, h, t, weights, c, cmid, U, start, stop, fixed)


# ---------------------------------------------------------------------------
# operations


def eval_action(df: DiscreteFunctional, traj: Trajectory) -> float:
    df.check_trajectory(traj)
    return df.value_nodes(traj.nodes)


def grad_action(df: DiscreteFunctional, traj: Trajectory) -> np.ndarray:
    """Exact gradient over the free nodes; clamped rows are zero. Shape ``(N+1, n)``."""
    df.check_trajectory(traj)
    return df.value_and_grad_nodes(traj.nodes)[1]


def gamma_rewritten_value(df: DiscreteFunctional, traj: Trajectory) -> float:
    """Gamma evaluated through (alpha, beta, gamma1, gamma2, kappa) instead of (mu, nu, gamma)."""
    s = df.spec
    if s.family != "Gamma":
        raise InputError("only defined for the Gamma family")
    df.check_trajectory(traj)
    vel, acc, q = traj.velocity(), traj.acceleration(), traj.nodes
    mix = s.gamma1 * vel + s.gamma2 * acc
    dens = (0.5 * s.alpha * np.sum(acc * acc, axis=1) + 0.5 * s.beta * np.sum(vel * vel, axis=1)
            + 0.5 * np.sum(mix * mix, axis=1) + 0.5 * s.kappa * np.sum(q * q, axis=1)
            + s.potential.values(q, df.U))
    return float(np.dot(df.c, dens))


def _require_w_family(df):
    if df.family not in W_FAMILIES:
        raise InputError(f"defined for {W_FAMILIES}, not {df.family!r}")


def el_residual_weps(df: DiscreteFunctional, traj: Trajectory, first: int = 4) -> np.ndarray:
    """Fourth-order Euler-Lagrange residual at nodes ``first..N-first``.

    ``eps^2 m q'''' - 2 eps m q''' + m q'' + grad U``, plus ``eta (q' - eps q'')``
    for the dissipative family, all with central stencils.

    With the default ``first=4`` every stencil stays on nodes ``2..N-2``. Node 1
    is fixed by the clamp rather than by stationarity and nodes ``N-1, N`` carry
    the discrete terminal closure, so stencils reaching them do not converge
    at a discrete minimizer.
    """
    _require_w_family(df)
    if first < 2 or df.N < 2 * first:
        raise InputError(f"the residual needs first >= 2 and N >= {2 * first}")
    if traj.N != df.N or not math.isclose(traj.T, df.T, rel_tol=1e-12):
        raise InputError("trajectory grid does not match")
    s, h, q = df.spec, df.h, traj.nodes
    m, eps = s.mass, s.eps
    k = np.arange(first, df.N - first + 1)
    d1 = (q[k + 1] - q[k - 1]) / (2 * h)
    d2 = (q[k + 1] - 2 * q[k] + q[k - 1]) / h ** 2
    d3 = (q[k + 2] - 2 * q[k + 1] + 2 * q[k - 1] - q[k - 2]) / (2 * h ** 3)
    d4 = (q[k + 2] - 4 * q[k + 1] + 6 * q[k] - 4 * q[k - 1] + q[k - 2]) / h ** 4
    U = None if df.U is None else df.U[k]
    res = eps ** 2 * m * d4 - 2 * eps * m * d3 + m * d2 + s.potential.grads(q[k], U)
    if df.family == "W-eps-dissipative":
        res = res + s.eta * (d1 - eps * d2)
    return res


def boundary_residual(df: DiscreteFunctional, traj: Trajectory):
    """``(|q''(T)|, |q'''(T)|)`` from one-sided stencils at the final node."""
    _require_w_family(df)
    if traj.N != df.N:
        raise InputError("trajectory grid does not match")
    return (float(np.linalg.norm(traj.acceleration()[-1])),
            float(np.linalg.norm(traj.third_derivative_end())))


def residual_report(df: DiscreteFunctional, traj: Trajectory, stationarity_norm=None) -> dict:
    if stationarity_norm is None:
        stationarity_norm = float(np.max(np.abs(grad_action(df, traj))))
    el = bnd = None
    if df.family in W_FAMILIES and df.N >= 8:
        el = float(np.max(np.abs(el_residual_weps(df, traj))))
        bnd = list(boundary_residual(df, traj))
    return {"family": df.family, "N": df.N, "el_residual_max": el,
            "boundary_residual": bnd, "stationarity_norm": float(stationarity_norm)}
