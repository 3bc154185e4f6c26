"""Command line: ``cogaction run|validate|version``.

Exit statuses
  0  success
  2  configuration: syntax (with line/column), schema, values, missing data files
  3  theorem-mode hypothesis violation (names the hypothesis)
  4  numerical failure: solver non-convergence or integrator divergence;
     report.json and summary.txt are still written
  5  I/O failure while writing artifacts
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__, export
from .action import build_discrete, check_hypotheses, residual_report
from .config import ConfigError, load
from .dynamics import energy_drift, integrate
from .errors import CogActionError, ConfigurationError, HypothesisViolation, NumericDomainError
from .limits import (METRIC_NOTE, causality_probe, epsilon_sweep, mass_sweep,
                     strictly_decreasing)
from .potential import central_difference, check_gradient, random_points, relative_error
from .solver import hessian_spectrum, minimize_action, multistart_minimize, solve_stationary

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4, 5


class Outcome:
    """Artifacts of one experiment, written by a single writer at the end."""

    def __init__(self):
        self.csv = None
        self.report = {}
        self.summary = []
        self.failure = None
        self.plot = None


# ---------------------------------------------------------------------------
# experiments


def _minimize(exp, out):
    df = build_discrete(exp.action, exp.N)
    extra = exp.solver_extra
    if extra["method"] == "stationary":
        traj, rep = solve_stationary(df, exp.solver.initial)
    elif extra["starts"] > 1:
        ms = multistart_minimize(df, exp.solver, extra["starts"], exp.seed)
        best = min((r for r in ms.runs if r is not None), key=lambda r: r[1].final_value,
                   default=None)
        out.report["multistart"] = ms.summary(wall_time=False)
        if best is None:
            raise NumericDomainError("every multistart run failed")
        traj, rep = best
        if not all(r is not None and r[1].converged for r in ms.runs):
            out.failure = "not every multistart run converged"
        out.summary.append(f"clusters: {ms.cluster_count} (H1 threshold {ms.threshold:.3g})")
    else:
        traj, rep = minimize_action(df, exp.solver)
    out.report.update({"functional": df.describe(), "solver": rep.to_dict(wall_time=False),
                       "residuals": residual_report(df, traj, rep.stationarity_norm),
                       "message": rep.message})
    out.csv = export.trajectory_csv(traj)
    out.plot = (traj.t, traj.nodes, [f"q{i}" for i in range(traj.n)])
    out.summary += [f"family: {df.family}, N = {df.N}",
                    f"converged: {rep.converged} after {rep.iterations} iterations ({rep.message})",
                    f"final value: {rep.final_value!r}",
                    f"stationarity norm: {rep.stationarity_norm:.3e}"]
    if not rep.converged and out.failure is None:
        out.failure = f"solver did not converge: {rep.message}"


def _integrate(exp, out):
    res = integrate(exp.dynamics)
    out.csv = export.dynamics_csv(res)
    drift = energy_drift(res.energy)
    out.report.update({"dynamics": exp.dynamics.describe(), "steps": exp.dynamics.steps,
                       "final_position": res.positions[-1],
                       "final_velocity": None if res.velocities is None else res.velocities[-1],
                       "energy_initial": res.energy[0], "energy_final": res.energy[-1],
                       "energy_relative_drift": drift})
    out.plot = (res.t, res.positions, [f"q{i}" for i in range(res.positions.shape[1])])
    out.summary += [f"kind: {exp.dynamics.kind}, steps: {exp.dynamics.steps}",
                    f"final position: {np.array2string(res.positions[-1], precision=10)}",
                    f"relative energy drift: {drift:.3e}"]


def _sweep_summary(out, sweep, column):
    out.csv = export.sweep_csv(sweep)
    out.report.update(sweep.to_dict(wall_time=False))
    vals = sweep.column(column)
    out.summary.append(f"{column} by parameter:")
    out.summary += [f"  {p!r}: {v!r} (converged: {c})"
                    for p, v, c in zip(sweep.params, vals, sweep.valid)]
    out.summary.append(f"strictly decreasing: {strictly_decreasing(vals)}")
    if not all(sweep.valid):
        out.failure = "invalid sweep rows: " + "; ".join(sweep.errors or ["non-converged rows"])


def _sweep_eps(exp, out):
    sec = exp.section
    window = tuple(sec["window"]) if "window" in sec else None
    sweep = epsilon_sweep(exp.action, sec["eps"], exp.N, exp.solver, window, sec.get("refine", 10))
    out.summary.append(METRIC_NOTE)
    _sweep_summary(out, sweep, "h1_dist")


def _sweep_mass(exp, out):
    sec = exp.section
    sweep = mass_sweep(exp.potential, sec["eta"], sec["q0"], sec["T"], sec["masses"], sec["dt"],
                       v0=sec.get("v0"), cutoff=sec.get("cutoff"), signal=exp.signal)
    _sweep_summary(out, sweep, "sup_dist")


def _causality(exp, out):
    sec = exp.section
    res = causality_probe(exp.action, sec["t_star"], exp.perturbation, sec["eps"], exp.N,
                          exp.solver, sec.get("delta"), sec.get("baseline", False))
    out.csv = export.csv_text(("param", "deviation", "converged"),
                              list(zip(res.params, res.deviations, res.converged)))
    out.report.update(res.to_dict(wall_time=False))
    out.summary.append(f"pre-t* window: [0, {res.t_star - res.delta!r}]")
    out.summary += [f"  eps={p!r}: deviation {d!r}" for p, d in zip(res.params, res.deviations)]
    out.summary.append(f"strictly decreasing: {strictly_decreasing(res.deviations)}")
    if res.baseline is not None:
        out.summary.append(f"classical-S baseline deviation: {res.baseline.get('deviation')!r}")
    if not all(res.converged):
        out.failure = "invalid probe rows: " + "; ".join(res.errors or ["non-converged rows"])


def _gradcheck(exp, out):
    sec = exp.section
    count = sec.get("points", 10)
    step = sec.get("step", 1e-5)
    rows = []
    if sec["target"] == "potential":
        threshold = sec.get("threshold", 1e-6)
        pts = random_points(exp.potential, count, exp.seed)
        chk = check_gradient(exp.potential, pts, step, threshold)
        rows = [(i, e, e < threshold) for i, e in enumerate(chk.errors)]
    else:
        threshold = sec.get("threshold", 1e-5)
        df = build_discrete(exp.action, exp.N)
        rng = np.random.default_rng(exp.seed)
        base = df.initial_trajectory()
        for i in range(count):
            x = df.free_vector(base) + 0.3 * rng.normal(size=df.n_free)
            g = df.value_and_grad(x)[1]
            fd = central_difference(lambda z: df.value_and_grad(z)[0], x, step)
            e = relative_error(g, fd)
            rows.append((i, e, e < threshold))
    out.csv = export.csv_text(("index", "relative_error", "passed"), rows)
    worst = max(r[1] for r in rows)
    out.report.update({"target": sec["target"], "points": count, "step": step,
                       "threshold": threshold, "max_relative_error": worst,
                       "passed": all(r[2] for r in rows)})
    out.summary.append(f"{sec['target']} gradient check: max relative error {worst:.3e} "
                       f"(threshold {threshold:g})")
    if not all(r[2] for r in rows):
        out.failure = "gradient check failed"


def _spectrum(exp, out):
    df = build_discrete(exp.action, exp.N)
    if exp.solver_extra["method"] == "stationary":
        traj, rep = solve_stationary(df, exp.solver.initial)
    else:
        traj, rep = minimize_action(df, exp.solver)
    ev = hessian_spectrum(df, traj, exp.section["k"])
    out.csv = export.csv_text(("index", "eigenvalue"), list(enumerate(ev)))
    out.report.update({"functional": df.describe(), "solver": rep.to_dict(wall_time=False),
                       "eigenvalues": ev, "smallest": ev[0]})
    out.summary += [f"family: {df.family}, N = {df.N}",
                    f"smallest Hessian eigenvalue: {float(ev[0])!r}"]
    if not rep.converged:
        out.failure = f"solver did not converge: {rep.message}"


RUNNERS = {"minimize": _minimize, "integrate": _integrate, "sweep-eps": _sweep_eps,
           "sweep-mass": _sweep_mass, "causality": _causality, "gradcheck": _gradcheck,
           "spectrum": _spectrum}


# ---------------------------------------------------------------------------
# driver


def _err(msg):
    print(f"cogaction: {msg}", file=sys.stderr)


def _theorem_checks(exp):
    if exp.action is not None and exp.action.theorem_mode:
        check_hypotheses(exp.action)
        if exp.kind in ("sweep-eps", "causality"):
            for e in exp.section["eps"]:
                check_hypotheses(exp.action.replace(eps=e))


def _write(exp, out):
    d = export.ensure_dir(exp.output)
    report = {"experiment": exp.kind, "seed": exp.seed, "status": "failure" if out.failure else "ok"}
    report.update(out.report)
    if out.failure:
        report["failure"] = out.failure
    if out.csv is not None:
        export.write_text(d / "result.csv", out.csv)
    export.write_json(d / "report.json", report)
    lines = [f"experiment: {exp.kind}", f"seed: {exp.seed}"] + out.summary
    if out.failure:
        lines.append(f"FAILURE: {out.failure}")
        if out.csv is not None:
            lines.append("result.csv holds the partial or non-converged result")
    export.write_text(d / "summary.txt", "\n".join(lines) + "\n")
    if exp.plot and out.plot is not None:
        t, Y, labels = out.plot
        export.write_text(d / "plot.svg", export.svg_line_plot(t, Y, labels, exp.kind))


def run_config(path) -> int:
    try:
        exp = load(path)
        _theorem_checks(exp)
    except ConfigError as exc:
        _err(f"{path}: {exc}")
        return EXIT_CONFIG
    except HypothesisViolation as exc:
        _err(str(exc))
        return EXIT_HYPOTHESIS
    out = Outcome()
    status = EXIT_OK
    try:
        RUNNERS[exp.kind](exp, out)
    except HypothesisViolation as exc:
        _err(str(exc))
        return EXIT_HYPOTHESIS
    except ConfigurationError as exc:
        _err(f"{path}: {exc}")
        return EXIT_CONFIG
    except NumericDomainError as exc:
        out.csv = None  # never leave a partial CSV behind
        out.failure = f"{type(exc).__name__}: {exc}"
    except CogActionError as exc:
        _err(f"{path}: {exc}")
        return EXIT_CONFIG
    if out.failure:
        status = EXIT_NUMERIC
    try:
        _write(exp, out)
    except OSError as exc:
        _err(f"cannot write artifacts to {exc.filename or exp.output}: {exc.strerror}")
        return EXIT_IO
    if out.failure:
        _err(f"FAILURE: {out.failure} (see {exp.output / 'summary.txt'})")
    return status


def validate_config(path) -> int:
    try:
        exp = load(path)
        _theorem_checks(exp)
    except ConfigError as exc:
        _err(f"{path}: {exc}")
        return EXIT_CONFIG
    except HypothesisViolation as exc:
        _err(str(exc))
        return EXIT_HYPOTHESIS
    print(f"{path}: valid {exp.kind} experiment")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cogaction", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the experiment described by a JSON config")
    p_run.add_argument("config")
    p_val = sub.add_parser("validate", help="check a config without computing")
    p_val.add_argument("config")
    sub.add_parser("version", help="print the package version")
    args = parser.parse_args(argv)
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    if args.command == "validate":
        return validate_config(args.config)
    return run_config(args.config)


if __name__ == "__main__":
    sys.exit(main())
