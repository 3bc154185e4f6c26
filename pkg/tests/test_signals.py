import numpy as np
import pytest

from cogaction import signals as S
from cogaction.errors import InputError


def test_examples():
    np.testing.assert_array_equal(S.sample_signal(S.zero(2, 1.0), 0.7), [0.0, 0.0])
    assert S.sample_signal(S.sinusoid([1.0], [1.0], [0.0], horizon=1.0), 0.25)[0] == \
        pytest.approx(1.0, abs=1e-15)
    sig = S.replay([[1.0], [2.0], [3.0]], hold=1.0, horizon=3.0)
    assert S.sample_signal(sig, 2.5)[0] == 3.0


def test_replay_hold_boundaries_and_left_limits():
    sig = S.replay([[1.0], [2.0], [3.0]], hold=0.1, horizon=0.3)
    ts = np.array([0.0, 0.1, 0.2, 0.3])
    np.testing.assert_array_equal(sig.sample_many(ts)[:, 0], [1, 2, 3, 3])
    np.testing.assert_array_equal(sig.sample_many(ts[1:], left=True)[:, 0], [1, 2, 3])


def test_out_of_horizon_is_rejected():
    with pytest.raises(InputError):
        S.sample_signal(S.zero(1, 1.0), 1.5)
    with pytest.raises(InputError):
        S.sample_signal(S.constant([1.0], 1.0), -0.1)


def test_stage_samples_shape():
    sig = S.sinusoid([1.0, 2.0], [0.5, 1.0], horizon=1.0)
    out = S.stage_samples(sig, np.linspace(0, 1, 11))
    assert out.shape == (10, 3, 2)
    np.testing.assert_allclose(out[:, 1], sig.sample_many(np.linspace(0.05, 0.95, 10)))


def test_load_replay(tmp_path):
    f = tmp_path / "u.csv"
    f.write_text("u0,u1\n0,1\n2,3\n")
    np.testing.assert_array_equal(S.load_replay_csv(f), [[0, 1], [2, 3]])
    (tmp_path / "v.csv").write_text("x,u1\n0,1\n")
    with pytest.raises(InputError):
        S.load_replay_csv(tmp_path / "v.csv")
