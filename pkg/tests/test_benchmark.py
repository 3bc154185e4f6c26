import importlib.util
from pathlib import Path

from cogaction import _accel

BENCH = Path(__file__).resolve().parent.parent / "benchmarks" / "bench_backends.py"


def test_benchmark_runs_and_backends_agree(capsys):
    spec = importlib.util.spec_from_file_location("bench_backends", BENCH)
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    before = _accel.backend()
    assert bench.main(["--quick", "--repeat", "1"]) == 0
    assert _accel.backend() == before
    out = capsys.readouterr().out
    assert "heavy-ball RK4" in out and "gradient-flow RK4" in out
