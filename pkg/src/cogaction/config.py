"""Experiment configuration: strict JSON schema plus construction of run objects.

Everything that can fail without computing (syntax, schema, values, data
files) fails here, before an experiment starts.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from . import potential as P
from . import signals as S
from .action import ActionSpec, WeightFunction, tabulated
from .dynamics import DynamicsSpec
from .errors import ConfigurationError, InputError
from .limits import Perturbation
from .solver import SolverOptions

EXPERIMENTS = ("minimize", "integrate", "sweep-eps", "sweep-mass", "causality", "gradcheck",
               "spectrum")


class ConfigError(ConfigurationError):
    """Invalid configuration; ``line``/``column`` are set for syntax errors."""

    def __init__(self, message, line=None, column=None):
        loc = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(loc + message)
        self.line = line
        self.column = column


def _strict(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


NUM = {"type": "number"}
POS = {"type": "number", "exclusiveMinimum": 0}
NONNEG = {"type": "number", "minimum": 0}
INT = {"type": "integer"}
VEC = {"type": "array", "items": NUM, "minItems": 1}
MAT = {"type": "array", "items": VEC, "minItems": 1}
POSLIST = {"type": "array", "items": POS, "minItems": 1}

TERM = {"oneOf": [
    _strict({"kind": {"const": "quadratic"}, "K": MAT}, ["kind", "K"]),
    _strict({"kind": {"const": "double-well"}, "dim": {"type": "integer", "minimum": 1},
             "scale": POS}, ["kind"]),
    _strict({"kind": {"const": "rosenbrock"}, "dim": {"type": "integer", "minimum": 2},
             "a": NUM, "b": POS}, ["kind"]),
    _strict({"kind": {"const": "logistic-loss"}, "dataset": {"type": "string"}},
            ["kind", "dataset"]),
    _strict({"kind": {"const": "time-varying-coupled"}, "B": MAT, "gain": POS}, ["kind", "B"]),
]}
POTENTIAL = {"oneOf": [TERM, {"type": "array", "items": TERM, "minItems": 1}]}

SIGNAL = {"oneOf": [
    _strict({"kind": {"const": "zero"}, "dim": {"type": "integer", "minimum": 1}}, ["kind", "dim"]),
    _strict({"kind": {"const": "constant"}, "value": VEC}, ["kind", "value"]),
    _strict({"kind": {"const": "sinusoid"}, "amplitude": VEC, "frequency": VEC, "phase": VEC},
            ["kind", "amplitude", "frequency"]),
    _strict({"kind": {"const": "piecewise-constant-replay"}, "hold": POS,
             "table": {"oneOf": [{"type": "string"}, MAT]}}, ["kind", "hold", "table"]),
]}

ACTION = _strict({
    "family": {"enum": ["classical-S", "W-eps", "W-eps-dissipative", "Gamma"]},
    "q0": VEC, "v0": VEC, "T": POS, "N": {"type": "integer", "minimum": 4},
    "mass": POS, "eta": NONNEG, "eps": POS,
    "alpha": NONNEG, "beta": NONNEG, "gamma1": NUM, "gamma2": NUM, "kappa": NONNEG,
    "weight": {"oneOf": [
        _strict({"kind": {"enum": ["constant-one", "exp-decay", "exp-growth"]}}, ["kind"]),
        _strict({"kind": {"const": "tabulated"}, "values": POSLIST}, ["kind", "values"]),
    ]},
    "clamp": {"enum": ["cauchy", "dirichlet"]}, "qT": VEC,
    "theorem_mode": {"type": "boolean"},
}, ["family", "q0", "v0", "T", "N"])

DYNAMICS = _strict({
    "kind": {"enum": ["newton", "heavy-ball", "gradient-flow", "online-heavy-ball",
                      "online-gradient-flow"]},
    "q0": VEC, "v0": VEC, "T": POS, "dt": POS, "mass": POS, "eta": NONNEG,
}, ["kind", "q0", "T", "dt"])

SOLVER = _strict({
    "max_iterations": {"type": "integer", "minimum": 1},
    "gradient_tolerance": POS, "sufficient_decrease": POS,
    "backtrack": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "memory": {"type": "integer", "minimum": 1},
    "init": {"enum": ["straight-line", "custom"]},
    "initial_trajectory": {"type": "string"},
    "precondition": {"type": "boolean"},
    "starts": {"type": "integer", "minimum": 1},
    "method": {"enum": ["minimize", "stationary"]},
})

SWEEP_EPS = _strict({"eps": POSLIST, "window": {"type": "array", "items": NUM, "minItems": 2,
                                                "maxItems": 2},
                     "refine": {"type": "integer", "minimum": 10}}, ["eps"])
SWEEP_MASS = _strict({"masses": POSLIST, "eta": POS, "q0": VEC, "v0": VEC, "T": POS, "dt": POS,
                      "cutoff": POS}, ["masses", "eta", "q0", "T", "dt"])
CAUSALITY = _strict({"t_star": POS, "eps": POSLIST, "delta": NONNEG,
                     "perturbation": _strict({"term": POTENTIAL, "signal": SIGNAL}),
                     "baseline": {"type": "boolean"}}, ["t_star", "eps", "perturbation"])
GRADCHECK = _strict({"target": {"enum": ["potential", "action"]},
                     "points": {"type": "integer", "minimum": 1},
                     "step": POS, "threshold": POS}, ["target"])
SPECTRUM = _strict({"k": {"type": "integer", "minimum": 1}}, ["k"])

SCHEMA = _strict({
    "experiment": {"enum": list(EXPERIMENTS)},
    "seed": INT,
    "output": {"type": "string"},
    "plot": {"type": "boolean"},
    "potential": POTENTIAL,
    "signal": SIGNAL,
    "action": ACTION,
    "dynamics": DYNAMICS,
    "solver": SOLVER,
    "sweep_eps": SWEEP_EPS,
    "sweep_mass": SWEEP_MASS,
    "causality": CAUSALITY,
    "gradcheck": GRADCHECK,
    "spectrum": SPECTRUM,
}, ["experiment", "seed", "output", "potential"])

# sections each experiment needs; any other section is rejected
SECTIONS = {
    "minimize": {"action"},
    "integrate": {"dynamics"},
    "sweep-eps": {"action", "sweep_eps"},
    "sweep-mass": {"sweep_mass"},
    "causality": {"action", "causality"},
    "gradcheck": {"gradcheck"},
    "spectrum": {"action", "spectrum"},
}
OPTIONAL = {"minimize": {"solver"}, "sweep-eps": {"solver"}, "causality": {"solver"},
            "spectrum": {"solver"}, "gradcheck": {"action"}}
COMMON = {"experiment", "seed", "output", "plot", "potential", "signal"}


@dataclass
class Experiment:
    kind: str
    seed: int
    output: Path
    plot: bool
    raw: dict
    potential: object
    signal: object = None
    action: ActionSpec | None = None
    N: int | None = None
    dynamics: DynamicsSpec | None = None
    solver: SolverOptions | None = None
    solver_extra: dict | None = None
    section: dict | None = None
    perturbation: Perturbation | None = None


def _resolve(base, p):
    q = Path(p)
    return q if q.is_absolute() else base / q


def _load_json(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, exc.lineno, exc.colno) from None


def _validate(doc):
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = jsonschema.exceptions.best_match(errors)
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"at {where}: {e.message}")
    kind = doc["experiment"]
    allowed = COMMON | SECTIONS[kind] | OPTIONAL.get(kind, set())
    missing = SECTIONS[kind] - set(doc)
    extra = set(doc) - allowed
    if missing:
        raise ConfigError(f"experiment {kind!r} needs section(s) {sorted(missing)}")
    if extra:
        raise ConfigError(f"experiment {kind!r} does not use section(s) {sorted(extra)}")


def _term(d, base):
    k = d["kind"]
    if k == "quadratic":
        return P.quadratic(d["K"])
    if k == "double-well":
        return P.double_well(d.get("dim", 1), d.get("scale", 1.0))
    if k == "rosenbrock":
        return P.rosenbrock(d.get("dim", 2), d.get("a", 1.0), d.get("b", 100.0))
    if k == "logistic-loss":
        path = _resolve(base, d["dataset"])
        try:
            X, y = P.load_dataset_csv(path)
        except OSError as exc:
            raise ConfigError(f"dataset {path}: {exc.strerror}") from None
        except ValueError as exc:
            raise ConfigError(f"dataset {path}: {exc}") from None
        return P.logistic_loss(X, y)
    return P.coupled(d["B"], d.get("gain", 1.0))


def _potential(d, base):
    items = d if isinstance(d, list) else [d]
    return P.as_potential([_term(x, base) for x in items])


def _signal(d, horizon, base):
    k = d["kind"]
    if k == "zero":
        return S.zero(d["dim"], horizon)
    if k == "constant":
        return S.constant(d["value"], horizon)
    if k == "sinusoid":
        return S.sinusoid(d["amplitude"], d["frequency"], d.get("phase"), horizon)
    table = d["table"]
    if isinstance(table, str):
        path = _resolve(base, table)
        try:
            table = S.load_replay_csv(path)
        except OSError as exc:
            raise ConfigError(f"replay table {path}: {exc.strerror}") from None
        except ValueError as exc:
            raise ConfigError(f"replay table {path}: {exc}") from None
    return S.replay(table, d["hold"], horizon)


def _weight(d):
    if d is None:
        return None
    if d["kind"] == "tabulated":
        return tabulated(d["values"])
    return d["kind"]


def _action(d, pot, signal):
    fields = {k: v for k, v in d.items() if k not in ("N", "weight")}
    w = _weight(d.get("weight"))
    if isinstance(w, str):
        if w == "exp-decay":
            w = None if d["family"] in ("W-eps", "W-eps-dissipative") else \
                WeightFunction("exp-decay", eps=d.get("eps"))
        elif w == "exp-growth":
            w = WeightFunction("exp-growth", eta=d.get("eta", 0.0), mass=d.get("mass", 1.0))
        else:
            w = WeightFunction()
    return ActionSpec(potential=pot, weight=w, signal=signal, **fields)


def _solver(d, base, N):
    d = dict(d or {})
    extra = {"starts": d.pop("starts", 1), "method": d.pop("method", "minimize")}
    init_path = d.pop("initial_trajectory", None)
    if init_path is not None:
        from .export import import_trajectory_csv

        path = _resolve(base, init_path)
        try:
            d["initial"] = import_trajectory_csv(path, expected_N=N)
        except OSError as exc:
            raise ConfigError(f"initial trajectory {path}: {exc.strerror}") from None
        d.setdefault("init", "custom")
    return SolverOptions(**d), extra


def horizon_of(doc):
    for sec, key in (("action", "T"), ("dynamics", "T"), ("sweep_mass", "T")):
        if sec in doc:
            return float(doc[sec][key])
    raise ConfigError("no section defines the horizon T")


def load(path) -> Experiment:
    """Parse, validate and build; raises ConfigError (or HypothesisViolation)."""
    path = Path(path)
    doc = _load_json(path)
    _validate(doc)
    base = path.resolve().parent
    kind = doc["experiment"]
    try:
        pot = _potential(doc["potential"], base)
        T = horizon_of(doc) if "signal" in doc or kind == "causality" else None
        signal = _signal(doc["signal"], T, base) if "signal" in doc else None
        exp = Experiment(kind, doc["seed"], _resolve(base, doc["output"]), doc.get("plot", False),
                         doc, pot, signal)
        if "action" in doc:
            exp.action = _action(doc["action"], pot, signal)
            exp.N = doc["action"]["N"]
        if "dynamics" in doc:
            d = doc["dynamics"]
            exp.dynamics = DynamicsSpec(d["kind"], pot, d["q0"], d["T"], d["dt"],
                                        mass=d.get("mass", 1.0), eta=d.get("eta", 0.0),
                                        v0=d.get("v0"), signal=signal)
        if kind in ("minimize", "sweep-eps", "causality", "spectrum"):
            exp.solver, exp.solver_extra = _solver(doc.get("solver"), base, exp.N)
        for sec in ("sweep_eps", "sweep_mass", "causality", "gradcheck", "spectrum"):
            if sec in doc:
                exp.section = doc[sec]
        if kind == "causality":
            pd = doc["causality"]["perturbation"]
            term = _potential(pd["term"], base) if "term" in pd else None
            psig = _signal(pd["signal"], T, base) if "signal" in pd else None
            exp.perturbation = Perturbation(term, psig)
        if kind == "gradcheck" and doc["gradcheck"]["target"] == "action" and exp.action is None:
            raise ConfigError("gradcheck on the action needs an action section")
    except (InputError, ConfigurationError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return exp
