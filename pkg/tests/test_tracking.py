import numpy as np
import pytest

from uwbcorr.geometry import Anchor, euclidean_range
from uwbcorr.tracking import (
    BufferEntry,
    EkfConfig,
    SingularGeometry,
    SmoothingBuffer,
    compute_reward,
    ekf_init,
    ekf_predict,
    ekf_update,
    position_to_range,
)


def _state(x, y, vx, vy, cfg):
    st = ekf_init(cfg)
    st.x = np.array([x, y, vx, vy], dtype=float)
    return st


def test_predict_advances_position():
    cfg = EkfConfig()
    st = _state(0, 0, 100, 0, cfg)
    st2 = ekf_predict(st, 1.0, cfg)
    assert st2.x[0] == pytest.approx(100.0)
    st3 = ekf_predict(st, 0.02, cfg)
    assert st3.x[0] == pytest.approx(100.0 * 0.02)


def test_predict_zero_noise_keeps_position_cov():
    cfg = EkfConfig(process_noise_accel_sigma=0.0)
    st = _state(0, 0, 0, 0, cfg)
    st.P = np.diag([4.0, 4.0, 0.0, 0.0])
    st2 = ekf_predict(st, 1.0, cfg)
    assert np.allclose(st2.P[:2, :2], st.P[:2, :2])


def test_predict_rejects_nonpositive_dt():
    cfg = EkfConfig()
    with pytest.raises(ValueError):
        ekf_predict(ekf_init(cfg), 0.0, cfg)


def test_update_zero_innovation_keeps_mean():
    cfg = EkfConfig()
    anchor = Anchor(0, [0.0, 0.0, 300.0])
    st = _state(3000, 4000, 0, 0, cfg)
    pred = euclidean_range([3000, 4000, 300.0], anchor.position)
    st2, p = ekf_update(st, pred, anchor, 300.0, cfg)
    assert np.allclose(st2.x, st.x)
    assert np.allclose(p, [3000, 4000])


def test_update_singular_geometry():
    cfg = EkfConfig()
    anchor = Anchor(0, [1000.0, 1000.0, 300.0])
    st = _state(1000, 1000, 0, 0, cfg)
    with pytest.raises(SingularGeometry):
        ekf_update(st, 500.0, anchor, 300.0, cfg)


def test_update_rejects_nonpositive_range():
    cfg = EkfConfig()
    anchor = Anchor(0, [0.0, 0.0, 2500.0])
    with pytest.raises(ValueError):
        ekf_update(ekf_init(cfg), 0.0, anchor, 300.0, cfg)


def test_buffer_middle_binding_n3():
    buf = SmoothingBuffer(3)
    outs = []
    for i, p in enumerate([(0, 0), (1, 0), (2, 0)]):
        outs.append(
            buf.push(
                BufferEntry(
                    p_ekf=np.array(p, dtype=float),
                    corrected_range=float(i),
                    cir=np.zeros(150),
                    executed_correction=0.0,
                    anchor_id=0,
                    tag=i,
                )
            )
        )
    assert outs[0] is None and outs[1] is None
    out = outs[2]
    assert np.allclose(out.p_avg, (1, 0))
    assert out.tag == 1  # middle entry


def test_buffer_middle_binding_n31():
    buf = SmoothingBuffer(31)
    out = None
    for i in range(31):
        out = buf.push(
            BufferEntry(
                p_ekf=np.array([float(i), 0.0]),
                corrected_range=0.0,
                cir=np.zeros(150),
                executed_correction=0.0,
                anchor_id=0,
                tag=i,
            )
        )
    assert out is not None
    assert out.tag == 15


def test_buffer_rejects_even_capacity():
    with pytest.raises(ValueError):
        SmoothingBuffer(4)


@pytest.mark.parametrize("n", [3, 5, 31])
def test_buffer_matches_sliding_mean(n, rng):
    """Brute-force sliding-window oracle over random position sequences."""
    for _ in range(30):
        seq = rng.normal(0, 1000, size=(n + 40, 2))
        buf = SmoothingBuffer(n)
        emitted = []
        for i, p in enumerate(seq):
            out = buf.push(
                BufferEntry(
                    p_ekf=p,
                    corrected_range=0.0,
                    cir=np.zeros(1),
                    executed_correction=0.0,
                    anchor_id=0,
                    tag=i,
                )
            )
            if out is not None:
                emitted.append(out)
        for j, out in enumerate(emitted):
            oracle = seq[j : j + n].mean(axis=0)
            assert np.abs(out.p_avg - oracle).max() < 1e-9
            assert out.tag == j + (n - 1) // 2


def test_position_to_range_vertical():
    anchor = Anchor(0, [500.0, 500.0, 2300.0])
    assert position_to_range((500, 500), anchor, 300.0) == pytest.approx(2000.0)


def test_position_to_range_horizontal():
    anchor = Anchor(0, [0.0, 0.0, 300.0])
    assert position_to_range((3000, 4000), anchor, 300.0) == pytest.approx(5000.0)


def test_position_to_range_matches_euclidean(rng):
    for _ in range(100):
        p = rng.uniform(-1e4, 1e4, 2)
        a = Anchor(0, rng.uniform(-1e4, 1e4, 3))
        h = rng.uniform(0, 1000)
        assert position_to_range(p, a, h) == euclidean_range([p[0], p[1], h], a.position)


def test_reward_values():
    assert compute_reward(5010.0, 5000.0) == pytest.approx(0.1)
    assert compute_reward(5000.0, 5000.0) == 0.5
    assert compute_reward(5500.0, 5000.0) == pytest.approx(0.002)
    assert compute_reward(4999.0, 5000.0) == 0.5  # inside the 2 mm floor


def test_reward_wider_floor():
    # cap stays 0.5; the peak widens with the floor
    assert compute_reward(5000.0, 5000.0, floor_mm=50.0) == 0.5
    assert compute_reward(5040.0, 5000.0, floor_mm=50.0) == 0.5
    assert compute_reward(5100.0, 5000.0, floor_mm=50.0) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        compute_reward(5000.0, 5000.0, floor_mm=0.0)
