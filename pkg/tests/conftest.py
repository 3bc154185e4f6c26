import numpy as np
import pytest

from cogaction import _accel
from cogaction import potential as P
from cogaction.action import ActionSpec

BACKENDS = ["numpy"] + (["numba"] if _accel.NUMBA_AVAILABLE else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    previous = _accel.set_backend(request.param)
    yield request.param
    _accel.set_backend(previous)


@pytest.fixture
def oscillator():
    return P.quadratic([[1.0]])


def weps_spec(eps=0.1, T=3.0, family="W-eps", **kw):
    kw.setdefault("q0", [1.0])
    kw.setdefault("v0", [0.0])
    return ActionSpec(family, kw.pop("potential", P.quadratic([[1.0]])), T=T, eps=eps, **kw)


def damped_oscillator(t, m=1.0, eta=1.0, k=1.0, q0=1.0, v0=0.0):
    """Closed form of m q'' + eta q' + k q = 0 (underdamped)."""
    a = eta / (2 * m)
    w = np.sqrt(k / m - a * a)
    return np.exp(-a * t) * (q0 * np.cos(w * t) + (v0 + a * q0) / w * np.sin(w * t))


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number].line())
