import numpy as np
import pytest

from cogaction import potential as P
from cogaction import signals as S
from cogaction.action import Trajectory
from cogaction.errors import InputError
from cogaction.limits import (Perturbation, causality_probe, epsilon_sweep, mass_sweep,
                              strictly_decreasing)
from cogaction.metrics import h1_distance

from conftest import damped_oscillator, weps_spec

EPS = [0.2, 0.1, 0.05, 0.025]


def test_eps_sweep_quadratic():
    r = epsilon_sweep(weps_spec(eps=0.2), EPS, 600)
    d = r.column("h1_dist")
    assert all(r.valid) and strictly_decreasing(d) and d[-1] <= 0.5 * d[0]
    assert r.reference["kind"] == "newton" and r.reference["refine"] >= 10
    assert all(rec["reference"] == r.reference for rec in r.records)


def test_eps_sweep_dissipative_against_closed_form():
    base = weps_spec(eps=0.2, family="W-eps-dissipative", eta=1.0)
    r = epsilon_sweep(base, EPS, 600)
    assert r.reference["kind"] == "heavy-ball"
    ref = Trajectory(damped_oscillator(np.linspace(0, 3, 601)), 3.0)
    from cogaction.action import build_discrete
    from cogaction.solver import minimize_action
    d = []
    for e in EPS:
        traj, rep = minimize_action(build_discrete(base.replace(eps=e), 600))
        d.append(h1_distance(traj, ref))
    assert strictly_decreasing(d)
    # the integrator reference agrees with the closed form far below the sweep distances
    np.testing.assert_allclose(r.column("h1_dist"), d, atol=1e-8)


def test_single_value_sweep():
    r = epsilon_sweep(weps_spec(eps=0.1), [0.1], 200)
    assert len(r.records) == 1 and r.valid == [True]


def test_sweep_input_validation():
    with pytest.raises(InputError):
        epsilon_sweep(weps_spec(), [0.1, 0.2], 100)
    with pytest.raises(InputError):
        epsilon_sweep(weps_spec(), [1e-3], 100)


def test_sweep_rows_independent_of_thread_count(monkeypatch):
    monkeypatch.setenv("COGACTION_THREADS", "1")
    a = epsilon_sweep(weps_spec(eps=0.2), [0.2, 0.1], 200).to_dict(wall_time=False)
    monkeypatch.setenv("COGACTION_THREADS", "4")
    b = epsilon_sweep(weps_spec(eps=0.2), [0.2, 0.1], 200).to_dict(wall_time=False)
    assert a == b


def test_mass_sweep_quadratic():
    r = mass_sweep(P.quadratic([[1.0]]), 1.0, [1.0], 3.0, [1.0, 0.3, 0.1, 0.03], 1e-3,
                   v0=[0.0], cutoff=0.3)
    assert strictly_decreasing(r.column("sup_dist"))
    assert r.window == (0.3, 3.0)


def test_mass_sweep_against_closed_forms():
    # heavy ball m q'' + q' + q = 0 from rest vs gradient flow e^{-t}
    r = mass_sweep(P.quadratic([[1.0]]), 1.0, [1.0], 3.0, [0.1], 1e-3, v0=[0.0], cutoff=0.3)
    t = np.linspace(0, 3, 3001)
    m = 0.1
    disc = np.sqrt(1 - 4 * m)
    r1, r2 = (-1 + disc) / (2 * m), (-1 - disc) / (2 * m)
    hb = (r2 * np.exp(r1 * t) - r1 * np.exp(r2 * t)) / (r2 - r1)
    mask = t >= 0.3 - 1e-12
    expected = np.max(np.abs(hb - np.exp(-t))[mask])
    assert abs(r.records[0]["sup_dist"] - expected) < 1e-8


def test_mass_sweep_equilibrium():
    r = mass_sweep(P.quadratic([[1.0]]), 1.0, [0.0], 2.0, [0.5], 1e-2)
    assert r.records[0]["sup_dist"] == 0.0 and r.records[0]["h1_dist"] == 0.0


def late_bump(T=3.0):
    return Perturbation(P.coupled([[1.0]]), S.replay([[0.0], [1.0]], T / 2, T))


def test_causality_probe_trend_and_baseline():
    res = causality_probe(weps_spec(eps=0.2), 1.5, late_bump(), EPS, 600, baseline=True)
    assert all(res.converged) and strictly_decreasing(res.deviations)
    assert res.baseline["deviation"] > 10 * res.deviations[0]


def test_null_perturbation_gives_zero():
    res = causality_probe(weps_spec(eps=0.2), 1.5, Perturbation(), EPS[:2], 300)
    assert res.deviations == [0.0, 0.0]


def test_early_perturbation_is_rejected():
    early = Perturbation(P.coupled([[1.0]]), S.constant([1.0], 3.0))
    with pytest.raises(InputError):
        causality_probe(weps_spec(eps=0.2), 1.5, early, [0.2], 100)
