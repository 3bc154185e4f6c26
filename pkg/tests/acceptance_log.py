"""Shared record of acceptance outcomes, printed by the conftest summary hook."""
import time
from contextlib import contextmanager

RESULTS = {}


class Criterion:
    def __init__(self, number, title, limit):
        self.number, self.title, self.limit = number, title, limit
        self.checks = []
        self.elapsed = None

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))

    @property
    def passed(self):
        return bool(self.checks) and all(ok for _, ok, _ in self.checks)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        failed = [f"{n} ({d})" if d else n for n, ok, d in self.checks if not ok]
        tail = f"; failed: {', '.join(failed)}" if failed else ""
        return (f"{status} criterion {self.number:>2} {self.title} "
                f"[{self.elapsed:.1f} s of {self.limit:g} s]{tail}")


@contextmanager
def criterion(number, title, limit):
    """Time the body, add the runtime check, record the outcome and assert it."""
    c = Criterion(number, title, limit)
    t0 = time.perf_counter()
    try:
        yield c
    except Exception as exc:
        c.check("completed", False, f"{type(exc).__name__}: {exc}")
    c.elapsed = time.perf_counter() - t0
    c.check("runtime", c.elapsed < limit, f"{c.elapsed:.1f} s")
    RESULTS[number] = c
    print(c.line())
    for name, ok, detail in c.checks:
        print(f"    {'ok  ' if ok else 'FAIL'} {name}: {detail}")
    assert c.passed, c.line()
