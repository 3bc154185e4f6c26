"""Compare the numba kernels with the pure-numpy fallback on the hot paths.

    python benchmarks/bench_backends.py [--quick] [--repeat R] [--json PATH]

Each case is timed best-of-R after one warm-up call (which also triggers
numba compilation), and both backends must agree before a timing is kept.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from cogaction import _accel
from cogaction import potential as P
from cogaction import signals as S
from cogaction.action import ActionSpec, build_discrete
from cogaction.dynamics import DynamicsSpec, integrate


def _cases(quick):
    n_pts = 2_000 if quick else 200_000
    N = 400 if quick else 20_000
    T_dyn = 2.0 if quick else 20.0
    rng = np.random.default_rng(0)

    Q = rng.normal(size=(n_pts, 4))
    dw, rb = P.as_potential(P.double_well(4)), P.as_potential(P.rosenbrock(4))

    gamma = ActionSpec("Gamma", [P.double_well(1), P.coupled([[1.0]])], [0.5], [0.0], 2.0,
                       alpha=0.1, beta=1.0, kappa=0.1, signal=S.sinusoid([0.5], [0.5], horizon=2.0))
    df = build_discrete(gamma, N)
    x = df.free_vector(df.initial_trajectory()) + 0.1 * rng.normal(size=df.n_free)

    hb = DynamicsSpec("heavy-ball", P.double_well(2), [1.2, -0.4], T_dyn, 1e-3, mass=1.0,
                      eta=0.5, v0=[0.0, 0.3])
    gf = DynamicsSpec("gradient-flow", P.rosenbrock(2, 1.0, 10.0), [-1.0, 1.0], T_dyn, 1e-3,
                      eta=1.0)
    return {
        f"double-well gradients ({n_pts} x 4)": lambda: dw.grads(Q),
        f"rosenbrock gradients ({n_pts} x 4)": lambda: rb.grads(Q),
        f"Gamma value+gradient (N={N})": lambda: df.value_and_grad(x)[1],
        f"heavy-ball RK4 ({hb.steps} steps)": lambda: integrate(hb).positions,
        f"gradient-flow RK4 ({gf.steps} steps)": lambda: integrate(gf).positions,
    }


def _best_of(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(quick=False, repeat=5):
    backends = ["numpy"] + (["numba"] if _accel.NUMBA_AVAILABLE else [])
    rows = []
    previous = _accel.backend()
    try:
        for name, fn in _cases(quick).items():
            times, outs = {}, {}
            for b in backends:
                _accel.set_backend(b)
                times[b], outs[b] = _best_of(fn, repeat)
            if len(outs) == 2:
                # same arithmetic up to reassociation
                a, c = outs["numpy"], outs["numba"]
                scale = 1.0 + float(np.max(np.abs(a)))
                if not np.allclose(a, c, rtol=1e-9, atol=1e-9 * scale):
                    raise AssertionError(f"backends disagree on {name}")
            rows.append({"case": name, **{f"{b}_s": t for b, t in times.items()}})
    finally:
        _accel.set_backend(previous)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="small sizes, for smoke runs")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the rows as JSON")
    args = ap.parse_args(argv)
    rows = run(args.quick, args.repeat)
    have_numba = any("numba_s" in r for r in rows)
    print(f"{'case':<44} {'numpy [ms]':>11}" + (f" {'numba [ms]':>11} {'speedup':>8}"
                                                  if have_numba else ""))
    for r in rows:
        line = f"{r['case']:<44} {1e3 * r['numpy_s']:>11.2f}"
        if have_numba:
            line += f" {1e3 * r['numba_s']:>11.2f} {r['numpy_s'] / r['numba_s']:>7.1f}x"
        print(line)
    if not have_numba:
        print("numba unavailable or disabled (COGACTION_DISABLE_NUMBA); numpy timings only")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
