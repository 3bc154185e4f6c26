"""Limit experiments: eps -> 0 recovery, m -> 0 collapse and causality probes.

All distances are discrete strong-norm surrogates (see ``metrics``): weak
convergence has no finite-dimensional test, so every sweep reports the strong
discrete H1 distance and says so in its descriptor.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .action import (LOG_WEIGHT_FLOOR, W_FAMILIES, ActionSpec, Trajectory, build_discrete,
                     check_hypotheses)
from .dynamics import DynamicsSpec, fit_decay_rate, integrate
from .errors import CogActionError, InputError
from .metrics import h1_distance, l2_distance, sup_distance
from .potential import CompositePotential, as_potential
from .signals import InputSignal
from .solver import SolverOptions, minimize_action, solve_stationary, thread_count

__all__ = ["SweepResult", "Perturbation", "CausalityResult", "h1_distance", "epsilon_sweep",
           "mass_sweep", "causality_probe", "fit_decay_rate", "MONOTONE_SLACK",
           "strictly_decreasing"]

SWEEP_COLUMNS = ("param", "h1_dist", "l2_dist", "sup_dist", "converged", "iterations")
METRIC_NOTE = "discrete strong H1 distance used as a surrogate for weak H1 convergence"

# absolute slack for monotonicity checks, absorbs rounding only
MONOTONE_SLACK = 1e-12


def strictly_decreasing(values, slack=MONOTONE_SLACK):
    v = [float(x) for x in values]
    return all(math.isfinite(b) and b < a + slack for a, b in zip(v, v[1:]))


def _check_params(values, name):
    vals = [float(v) for v in values]
    if not vals:
        raise InputError(f"{name} list is empty")
    if any(not (v > 0 and math.isfinite(v)) for v in vals):
        raise InputError(f"{name} values must be positive and finite")
    if any(b >= a for a, b in zip(vals, vals[1:])):
        raise InputError(f"{name} list must be strictly decreasing")
    return vals


def _map_rows(fn, items):
    # rows are independent; results come back in input order regardless of scheduling
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class SweepResult:
    kind: str
    params: list
    records: list
    reports: list
    reference: dict
    window: tuple | None = None
    errors: list = field(default_factory=list)

    def column(self, name):
        return [r[name] for r in self.records]

    @property
    def valid(self):
        return [bool(r["converged"]) for r in self.records]

    def rows(self):
        return [tuple(r[c] for c in SWEEP_COLUMNS) for r in self.records]

    def to_dict(self, wall_time=True):
        return {
            "kind": self.kind,
            "metric": METRIC_NOTE,
            "params": self.params,
            "window": None if self.window is None else list(self.window),
            "reference": self.reference,
            "records": self.records,
            "reports": [None if r is None else r.to_dict(wall_time) for r in self.reports],
            "errors": self.errors,
        }


def _record(param, a, b, window, converged, iterations, reference):
    return {
        "param": float(param),
        "h1_dist": h1_distance(a, b),
        "l2_dist": l2_distance(a, b),
        "sup_dist": sup_distance(a, b, window),
        "converged": bool(converged),
        "iterations": int(iterations),
        "reference": reference,
    }


def _invalid(param, reference):
    return {"param": float(param), "h1_dist": math.nan, "l2_dist": math.nan,
            "sup_dist": math.nan, "converged": False, "iterations": 0, "reference": reference}


# ---------------------------------------------------------------------------
# eps -> 0


def _check_eps(base, eps_list):
    if base.family not in W_FAMILIES:
        raise InputError(f"eps sweeps need a W-eps family, got {base.family!r}")
    if base.clamp != "cauchy":
        raise InputError("eps sweeps use the Cauchy clamp")
    eps = _check_params(eps_list, "eps")
    for e in eps:
        if base.T / e > -LOG_WEIGHT_FLOOR:
            raise InputError(f"T/eps = {base.T / e:.4g} underflows the weight floor")
    return eps


def reference_solution(base: ActionSpec, N: int, refine: int = 10):
    """Causal limit of ``base`` from the RK4 integrator at ``dt = h/refine``, on the action grid."""
    if refine < 10:
        raise InputError("reference step must satisfy dt <= h/10")
    kind = "newton" if base.family == "W-eps" or base.eta == 0 else "heavy-ball"
    dyn = DynamicsSpec(kind, base.potential, base.q0, base.T, base.T / (N * refine),
                       mass=base.mass, eta=base.eta if kind == "heavy-ball" else 0.0,
                       v0=base.v0, signal=base.signal)
    res = integrate(dyn)
    ident = dict(dyn.describe())
    ident["refine"] = refine
    return Trajectory(res.positions[::refine], base.T), ident


def epsilon_sweep(base: ActionSpec, eps_list, N: int, opts: SolverOptions | None = None,
                  window=None, refine: int = 10) -> SweepResult:
    eps = _check_eps(base, eps_list)
    opts = opts or SolverOptions()
    ref, ident = reference_solution(base, N, refine)
    specs = [base.replace(eps=e) for e in eps]
    if base.theorem_mode:
        for s in specs:
            check_hypotheses(s)

    def row(spec):
        try:
            traj, rep = minimize_action(build_discrete(spec, N), opts)
        except CogActionError as exc:
            return _invalid(spec.eps, ident), None, f"eps={spec.eps!r}: {exc}"
        return _record(spec.eps, traj, ref, window, rep.converged, rep.iterations, ident), rep, None

    out = _map_rows(row, specs)
    return SweepResult("sweep-eps", eps, [o[0] for o in out], [o[1] for o in out], ident,
                       window, [o[2] for o in out if o[2]])


# ---------------------------------------------------------------------------
# m -> 0


def mass_sweep(potential, eta, q0, T, m_list, dt, v0=None, cutoff=None, signal=None) -> SweepResult:
    """Heavy ball for each mass against one gradient-flow run, sup distance on ``[cutoff, T]``.

    ``v0=None`` starts every heavy ball with the gradient-flow velocity
    ``-grad U(q0) / eta``, so only the mass differs between the two problems.
    """
    masses = _check_params(m_list, "mass")
    if not eta > 0:
        raise InputError("mass sweeps need eta > 0")
    pot = as_potential(potential)
    cutoff = T / 10 if cutoff is None else float(cutoff)
    if not 0 < cutoff < T:
        raise InputError("boundary-layer cutoff must lie in (0, T)")
    q0 = np.asarray(q0, dtype=float).ravel()
    kind = "online-gradient-flow" if pot.time_varying else "gradient-flow"
    flow_spec = DynamicsSpec(kind, pot, q0, T, dt, mass=None, eta=eta, signal=signal)
    flow = Trajectory(integrate(flow_spec).positions, T)
    if v0 is None:
        u0 = signal.sample(0.0)[None] if pot.time_varying else None
        v0 = -pot.grads(q0[None], u0)[0] / eta
    reference = dict(flow_spec.describe())
    reference["cutoff"] = cutoff
    window = (cutoff, T)
    hb_kind = "online-heavy-ball" if pot.time_varying else "heavy-ball"

    def row(m):
        spec = DynamicsSpec(hb_kind, pot, q0, T, dt, mass=m, eta=eta, v0=v0, signal=signal)
        try:
            res = integrate(spec)
        except CogActionError as exc:
            return _invalid(m, reference), f"m={m!r}: {exc}"
        traj = Trajectory(res.positions, T)
        return _record(m, traj, flow, window, True, spec.steps, reference), None

    out = _map_rows(row, masses)
    return SweepResult("sweep-mass", masses, [o[0] for o in out], [None] * len(masses),
                       reference, window, [o[1] for o in out if o[1]])


# ---------------------------------------------------------------------------
# causality


@dataclass(frozen=True, eq=False)
class Perturbation:
    """Late change to the problem: an extra potential term and/or a replacement signal.

    Both must leave every grid node with ``t < t_star`` untouched. A
    piecewise-constant signal switching exactly at ``t_star`` takes its new
    value at that node, which the probe window never reaches.
    """

    term: object = None
    signal: InputSignal | None = None

    @property
    def is_null(self):
        return self.term is None and self.signal is None

    def apply(self, base: ActionSpec) -> ActionSpec:
        if self.is_null:
            return base
        terms = list(base.potential.terms)
        if self.term is not None:
            terms += list(as_potential(self.term).terms)
        pot = CompositePotential(tuple(terms))
        sig = self.signal if self.signal is not None else base.signal
        if pot.time_varying and sig is None:
            raise InputError("the perturbation term is time-varying but no signal is given")
        return base.replace(potential=pot, signal=sig if pot.time_varying else base.signal)


def _check_perturbation(base, pert, t_star, N, seed=0):
    """Reject perturbations that change the problem at nodes before ``t_star``."""
    if pert.is_null:
        return
    after = pert.apply(base)
    t = np.linspace(0.0, base.T, N + 1)
    early = t < t_star - 1e-12 * base.T
    rng = np.random.default_rng(seed)
    Q = rng.normal(scale=2.0, size=(int(early.sum()), base.potential.dim))
    ts = t[early]

    def vals(spec):
        u = spec.signal.sample_many(ts) if spec.potential.time_varying else None
        return spec.potential.values(Q, u), spec.potential.grads(Q, u)

    v0, g0 = vals(base)
    v1, g1 = vals(after)
    if not (np.allclose(v0, v1, rtol=0, atol=1e-14 * (1 + np.abs(v0).max()))
            and np.allclose(g0, g1, rtol=0, atol=1e-14 * (1 + np.abs(g0).max()))):
        raise InputError("perturbation changes the problem before t_star")


@dataclass
class CausalityResult:
    t_star: float
    delta: float
    params: list
    deviations: list
    converged: list
    reports: list
    baseline: dict | None = None
    errors: list = field(default_factory=list)

    def to_dict(self, wall_time=True):
        return {
            "t_star": self.t_star,
            "delta": self.delta,
            "params": self.params,
            "deviations": self.deviations,
            "converged": self.converged,
            "reports": [[None if r is None else r.to_dict(wall_time) for r in pair]
                        for pair in self.reports],
            "baseline": self.baseline,
            "errors": self.errors,
        }


def _classical_baseline(base, pert, N, window):
    """Same probe on the undamped classical action with a free end (stationary points)."""
    kw = dict(family="classical-S", eps=None, eta=0.0, weight=None)
    spec0 = base.replace(**kw)
    spec1 = pert.apply(base).replace(**kw)
    if not as_potential(spec1.potential).quadratic_in_q:
        return {"deviation": None, "note": "needs a potential quadratic in q"}
    a, ra = solve_stationary(build_discrete(spec0, N))
    b, rb = solve_stationary(build_discrete(spec1, N))
    return {"family": "classical-S", "clamp": "cauchy",
            "deviation": sup_distance(a, b, window),
            "converged": bool(ra.converged and rb.converged)}


def causality_probe(base: ActionSpec, t_star, perturbation: Perturbation, eps_list, N: int,
                    opts: SolverOptions | None = None, delta=None,
                    baseline: bool = False) -> CausalityResult:
    """Pre-``t_star`` sup deviation between base and perturbed minimizers, per eps.

    Deviations are measured on ``[0, t_star - delta]`` (``delta`` defaults to
    five grid steps). Only the trend across eps is reported.
    """
    eps = _check_eps(base, eps_list)
    if not 0 < t_star < base.T:
        raise InputError("t_star must lie in (0, T)")
    h = base.T / N
    delta = 5 * h if delta is None else float(delta)
    if not 0 <= delta < t_star:
        raise InputError("delta must lie in [0, t_star)")
    _check_perturbation(base, perturbation, t_star, N)
    window = (0.0, t_star - delta)
    opts = opts or SolverOptions()
    perturbed = perturbation.apply(base)
    if base.theorem_mode:
        for e in eps:
            check_hypotheses(base.replace(eps=e))
            check_hypotheses(perturbed.replace(eps=e))

    def row(e):
        try:
            a, ra = minimize_action(build_discrete(base.replace(eps=e), N), opts)
            if perturbation.is_null:
                b, rb = a, ra
            else:
                b, rb = minimize_action(build_discrete(perturbed.replace(eps=e), N), opts)
        except CogActionError as exc:
            return math.nan, False, (None, None), f"eps={e!r}: {exc}"
        return sup_distance(a, b, window), bool(ra.converged and rb.converged), (ra, rb), None

    out = _map_rows(row, eps)
    base_row = _classical_baseline(base, perturbation, N, window) if baseline else None
    return CausalityResult(float(t_star), delta, eps, [o[0] for o in out], [o[1] for o in out],
                           [o[2] for o in out], base_row, [o[3] for o in out if o[3]])
