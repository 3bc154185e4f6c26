"""Direct minimization of discrete action functionals.

The workhorse is limited-memory BFGS with a backtracking Armijo line search.
Its initial inverse-Hessian is a banded Cholesky factor of the functional's
derivative terms (plus the potential when it is quadratic in ``q``), which makes
the first step an exact Newton step on quadratic problems. Without it the
exponentially graded weights of the W-eps family leave late nodes essentially
unconstrained for a plain quasi-Newton method.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .action import DiscreteFunctional, Trajectory, residual_report
from .errors import InputError, NumericDomainError
from .metrics import h1_distance, h1_norm

MAX_DENSE_EIG = 4000
F_ROUNDING = 1e-13
# stalled: no gradient progress over the window while at least this share of its
# steps passed only the rounding fallback
STALL_WINDOW = 1000
STALL_FALLBACK = 0.4


def thread_count():
    """Worker cap from ``COGACTION_THREADS`` (default: machine parallelism)."""
    raw = os.environ.get("COGACTION_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise InputError(f"COGACTION_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


@dataclass
class SolverOptions:
    max_iterations: int = 5000
    gradient_tolerance: float = 1e-8
    sufficient_decrease: float = 1e-4
    backtrack: float = 0.5
    memory: int = 10
    init: str = "straight-line"
    initial: Trajectory | None = None
    precondition: bool = True

    def __post_init__(self):
        if self.max_iterations < 1 or self.memory < 1:
            raise InputError("max_iterations and memory must be positive")
        if not (self.gradient_tolerance > 0 and self.sufficient_decrease > 0):
            raise InputError("tolerances must be positive")
        if not 0 < self.backtrack < 1:
            raise InputError("backtracking factor must lie in (0, 1)")
        if self.init not in ("straight-line", "custom"):
            raise InputError(f"unknown initialization {self.init!r}")
        if self.init == "custom" and self.initial is None:
            raise InputError("custom initialization needs a trajectory")


REPORT_FIELDS = ("converged", "iterations", "final_value", "stationarity_norm",
                 "el_residual_max", "boundary_residual", "wall_time")


@dataclass
class SolverReport:
    converged: bool
    iterations: int
    final_value: float
    stationarity_norm: float
    el_residual_max: float | None = None
    boundary_residual: list | None = None
    wall_time: float = 0.0
    message: str = field(default="", compare=False)
    values: list = field(default_factory=list, repr=False, compare=False)

    def to_dict(self, wall_time=True):
        d = {k: getattr(self, k) for k in REPORT_FIELDS}
        if not wall_time:
            d["wall_time"] = None
        return d


def _preconditioner(df, nodes):
    H = df.hessian_sparse(nodes)
    n = H.shape[0]
    coo = H.tocoo()
    u = int(np.max(np.abs(coo.col - coo.row))) if coo.nnz else 0
    ab = np.zeros((u + 1, n))
    for d in range(u + 1):
        ab[u - d, d:] = H.diagonal(d)
    try:
        cb = sla.cholesky_banded(ab, lower=False)
    except np.linalg.LinAlgError:
        return None
    return lambda r: sla.cho_solve_banded((cb, False), r, check_finite=False)


def _approx_wolfe(f, f_new, slope, slope_new, delta):
    # near a minimizer the Armijo test compares numbers that agree to rounding;
    # fall back to the directional derivative, which is still informative there
    return (f_new <= f + F_ROUNDING * (1.0 + abs(f))
            and slope_new <= (2.0 * delta - 1.0) * slope)


def _finish(df, x, f, g, it, converged, values, t0, message):
    traj = Trajectory(df.assemble(x), df.T)
    res = residual_report(df, traj, float(np.max(np.abs(g))) if g.size else 0.0)
    rep = SolverReport(converged, it, float(f), res["stationarity_norm"], res["el_residual_max"],
                       res["boundary_residual"], time.perf_counter() - t0, message, values)
    return traj, rep


def minimize_action(df: DiscreteFunctional, opts: SolverOptions | None = None,
                    initial: Trajectory | None = None):
    """Minimize over the free nodes; returns ``(trajectory, report)``.

    Never raises on non-convergence or line-search stalls: the best iterate is
    returned with ``converged=False``.
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    init = initial if initial is not None else (opts.initial if opts.init == "custom" else None)
    if init is None:
        init = df.initial_trajectory()
    df.check_trajectory(init)
    x = df.free_vector(init)
    try:
        f, g = df.value_and_grad(x)
    except NumericDomainError as exc:
        raise InputError(f"rejected initialization: {exc}") from exc
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise InputError("rejected initialization: non-finite functional or gradient")
    tol = opts.gradient_tolerance
    values = [f]

    def done(f, g):
        return np.max(np.abs(g)) <= tol * (1.0 + abs(f)) if g.size else True

    if done(f, g):
        return _finish(df, x, f, g, 0, True, values, t0, "initial point is stationary")

    apply_h0 = _preconditioner(df, init.nodes) if opts.precondition else None
    S, Y, rho = [], [], []
    gamma = 1.0
    best_g, best_it, fallback = np.max(np.abs(g)), 0, []
    message = "iteration limit reached"
    for it in range(1, opts.max_iterations + 1):
        # two-loop recursion
        r = g.copy()
        alphas = []
        for s, y, p in zip(reversed(S), reversed(Y), reversed(rho)):
            a = p * np.dot(s, r)
            alphas.append(a)
            r -= a * y
        r = apply_h0(r) if apply_h0 is not None else gamma * r
        for (s, y, p), a in zip(zip(S, Y, rho), reversed(alphas)):
            b = p * np.dot(y, r)
            r += (a - b) * s
        d = -r
        slope = np.dot(g, d)
        if not slope < 0:
            S.clear(), Y.clear(), rho.clear()
            d = -(apply_h0(g) if apply_h0 is not None else gamma * g)
            slope = np.dot(g, d)
        step = 1.0
        while True:
            x_new = x + step * d
            if np.array_equal(x_new, x):
                return _finish(df, x, f, g, it - 1, False, values, t0,
                               "line search stalled at machine-minimum step")
            try:
                f_new, g_new = df.value_and_grad(x_new)
                armijo = f_new <= f + opts.sufficient_decrease * step * slope
                ok = np.isfinite(f_new) and (
                    armijo
                    or _approx_wolfe(f, f_new, slope, np.dot(g_new, d), opts.sufficient_decrease))
            except NumericDomainError:
                ok = False
            if ok:
                break
            step *= opts.backtrack
        s, y = x_new - x, g_new - g
        sy = np.dot(s, y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s), Y.append(y), rho.append(1.0 / sy)
            if len(S) > opts.memory:
                S.pop(0), Y.pop(0), rho.pop(0)
            gamma = sy / np.dot(y, y)
        x, f, g = x_new, f_new, g_new
        values.append(f)
        if done(f, g):
            return _finish(df, x, f, g, it, True, values, t0, "gradient tolerance reached")
        gmax = np.max(np.abs(g))
        fallback.append(not armijo)
        if gmax < 0.999 * best_g:
            best_g, best_it = gmax, it
        elif (it - best_it >= STALL_WINDOW
              and sum(fallback[-STALL_WINDOW:]) >= STALL_FALLBACK * STALL_WINDOW):
            return _finish(df, x, f, g, it, False, values, t0,
                           "no progress: gradient is at its rounding floor")
    return _finish(df, x, f, g, opts.max_iterations, False, values, t0, message)


def solve_stationary(df: DiscreteFunctional, initial: Trajectory | None = None,
                     tol=1e-10, max_iterations=50):
    """Newton iteration on the gradient, for functionals that need not be convex.

    Only available when the potential is quadratic in ``q`` (exact Hessian).
    """
    if not df.is_quadratic:
        raise InputError("stationary solve needs a potential quadratic in q")
    t0 = time.perf_counter()
    init = initial or df.initial_trajectory()
    df.check_trajectory(init)
    x = df.free_vector(init)
    f, g = df.value_and_grad(x)
    values = [f]
    for it in range(max_iterations + 1):
        if np.max(np.abs(g)) <= tol * (1.0 + abs(f)):
            return _finish(df, x, f, g, it, True, values, t0, "stationary point")
        if it == max_iterations:
            break
        H = df.hessian_sparse(df.assemble(x)).tocsc()
        x = x - spla.spsolve(H, g)
        f, g = df.value_and_grad(x)
        values.append(f)
    return _finish(df, x, f, g, max_iterations, False, values, t0, "Newton iteration limit")


def hessian_matrix(df: DiscreteFunctional, traj: Trajectory, step=1e-5):
    """Dense free-node Hessian: assembled exactly, or symmetric differences of the gradient."""
    df.check_trajectory(traj)
    if df.n_free > MAX_DENSE_EIG:
        raise InputError(f"{df.n_free} free variables exceed the dense limit {MAX_DENSE_EIG}")
    if df.is_quadratic:
        return df.hessian_sparse(traj.nodes).toarray()
    x = df.free_vector(traj)
    H = np.empty((x.size, x.size))
    for j in range(x.size):
        dj = step * max(1.0, abs(x[j]))
        e = np.zeros_like(x)
        e[j] = dj
        H[:, j] = (df.value_and_grad(x + e)[1] - df.value_and_grad(x - e)[1]) / (2 * dj)
    return 0.5 * (H + H.T)


def hessian_spectrum(df: DiscreteFunctional, traj: Trajectory, k: int) -> np.ndarray:
    """The ``k`` algebraically smallest eigenvalues of the free-node Hessian."""
    if not 1 <= k <= df.n_free:
        raise InputError(f"k must lie in [1, {df.n_free}]")
    H = hessian_matrix(df, traj)
    return sla.eigvalsh(H, subset_by_index=[0, k - 1])


# ---------------------------------------------------------------------------
# multistart


@dataclass
class MultistartResult:
    runs: list
    errors: list
    clusters: list
    threshold: float

    @property
    def cluster_count(self):
        return len(self.clusters)

    def summary(self, wall_time=False):
        return {
            "starts": len(self.runs),
            "threshold": self.threshold,
            "clusters": self.clusters,
            "errors": self.errors,
            "reports": [None if r is None else r[1].to_dict(wall_time) for r in self.runs],
        }


def perturbed_starts(df: DiscreteFunctional, starts: int, seed: int):
    """Straight line first, then seeded smooth perturbations vanishing on clamped nodes."""
    base = df.initial_trajectory()
    rng = np.random.default_rng(seed)
    s, t, T, h = df.spec, df.t, df.T, df.h
    scale = 1.0 + float(np.max(np.abs(s.q0))) + T * float(np.max(np.abs(s.v0)))
    if s.clamp == "dirichlet":
        envelope = t * (T - t) / T ** 2
    else:
        envelope = t * (t - h) / T ** 2
    out = [base]
    modes = np.stack([np.cos(j * np.pi * t / T) for j in range(1, 4)], axis=1)
    for _ in range(starts - 1):
        coef = rng.normal(size=(3, df.n))
        nodes = base.nodes + scale * envelope[:, None] * (modes @ coef)
        for k, v in df.fixed.items():
            nodes[k] = v
        out.append(Trajectory(nodes, T))
    return out


def cluster_trajectories(trajs, values, threshold):
    clusters = []
    members = []
    for i, tr in enumerate(trajs):
        if tr is None:
            continue
        for c in members:
            if h1_distance(trajs[c[0]], tr) <= threshold:
                c.append(i)
                break
        else:
            members.append([i])
    for c in members:
        best = min(c, key=lambda i: (values[i], i))
        clusters.append({"size": len(c), "best_value": float(values[best]),
                         "representative_index": best})
    return clusters


def multistart_minimize(df: DiscreteFunctional, opts: SolverOptions | None = None,
                        starts: int = 8, seed: int = 0) -> MultistartResult:
    if starts < 2:
        raise InputError("multistart needs at least 2 starts")
    opts = opts or SolverOptions()
    inits = perturbed_starts(df, starts, seed)

    def run(init):
        try:
            return minimize_action(df, opts, initial=init), None
        except Exception as exc:  # collected per start, never aborts the batch
            return None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=min(thread_count(), starts)) as pool:
        results = list(pool.map(run, inits))
    runs = [r for r, _ in results]
    errors = [e for _, e in results]
    trajs = [None if r is None else r[0] for r in runs]
    values = [np.inf if r is None else r[1].final_value for r in runs]
    scale = max((h1_norm(t) for t in trajs if t is not None), default=0.0)
    threshold = 1e-4 * (1.0 + scale)
    return MultistartResult(runs, errors, cluster_trajectories(trajs, values, threshold), threshold)
