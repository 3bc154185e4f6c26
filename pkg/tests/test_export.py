import numpy as np
import pytest

from cogaction import export
from cogaction.action import Trajectory
from cogaction.errors import InputError
from cogaction.limits import SweepResult
from cogaction.metrics import h1_distance


def test_trajectory_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    traj = Trajectory(rng.normal(size=(600, 2)), 3.0)
    a = tmp_path / "a.csv"
    export.export_trajectory_csv(traj, a)
    back = export.import_trajectory_csv(a, expected_N=599)
    assert h1_distance(traj, back) == 0.0
    b = tmp_path / "b.csv"
    export.export_trajectory_csv(back, b)
    assert a.read_bytes() == b.read_bytes()


def test_format_details(tmp_path):
    text = export.trajectory_csv(Trajectory([0.1, 1 / 3, 2.0, 1e-300, -0.0], 1.0))
    lines = text.split("\n")
    assert lines[0] == "t,q0" and lines[-1] == "" and "\r" not in text
    assert lines[2] == "0.25,0.33333333333333331"
    assert not any(ln.endswith(",") for ln in lines)


def test_node_count_mismatch_fails_loudly(tmp_path):
    f = tmp_path / "t.csv"
    export.export_trajectory_csv(Trajectory(np.zeros(11), 1.0), f)
    with pytest.raises(InputError):
        export.import_trajectory_csv(f, expected_N=11)


def test_empty_sweep_is_header_only():
    sweep = SweepResult("sweep-eps", [], [], [], {})
    assert export.sweep_csv(sweep) == "param,h1_dist,l2_dist,sup_dist,converged,iterations\n"


def test_json_is_stable_and_strict():
    obj = {"b": np.float64(0.1), "a": [np.int64(3), float("nan")], "c": np.array([1.0, 2.0])}
    text = export.json_text(obj)
    assert text == export.json_text(dict(reversed(list(obj.items()))))
    assert "NaN" not in text and '"a": [\n    3,\n    null\n  ]' in text


def test_svg_plot_is_well_formed():
    import xml.etree.ElementTree as ET
    t = np.linspace(0, 1, 50)
    svg = export.svg_line_plot(t, np.column_stack([t, t ** 2]), ["a", "b<c"], "demo")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 2
