import numpy as np
import pytest

from uwbcorr import presets
from uwbcorr.cir import CirSimParams
from uwbcorr.geometry import Anchor
from uwbcorr.simulator import (
    DegeneratePlan,
    Environment,
    NlosErrorDistribution,
    TrajectoryPlan,
    classify_los,
    generate_episode,
    generate_trajectory,
    round_robin_policy,
    sample_measurement,
)


def _env(obstacles=(), anchors=None, **kw):
    anchors = anchors or [Anchor(0, [0.0, 0.0, 2500.0])]
    return Environment(
        bounds=(10000.0, 10000.0), anchors=list(anchors), obstacles=list(obstacles), **kw
    )


def test_straight_segment_pose_count():
    plan = TrajectoryPlan(waypoints=[(0, 0), (1000, 0)], speed=100.0, sample_rate=50.0)
    poses = generate_trajectory(plan)
    assert len(poses) == 501
    assert poses[0].timestamp == 0.0
    assert poses[-1].timestamp == pytest.approx(10.0)
    assert np.allclose(poses[-1].position[:2], (1000, 0))


def test_square_loop_pose_count():
    plan = TrajectoryPlan(
        waypoints=[(0, 0), (1000, 0), (1000, 1000), (0, 1000), (0, 0)],
        speed=100.0,
        sample_rate=50.0,
    )
    poses = generate_trajectory(plan)
    assert len(poses) == 2001
    assert np.allclose(poses[0].position, poses[-1].position)


def test_degenerate_plans():
    with pytest.raises(DegeneratePlan):
        generate_trajectory(TrajectoryPlan(waypoints=[(0, 0)]))
    with pytest.raises(DegeneratePlan):
        generate_trajectory(TrajectoryPlan(waypoints=[(5, 5), (5, 5)]))


def test_constant_speed():
    plan = TrajectoryPlan(waypoints=[(0, 0), (2000, 0)], speed=100.0, sample_rate=50.0)
    poses = generate_trajectory(plan)
    steps = np.diff([p.position[0] for p in poses])
    assert np.allclose(steps, 2.0)  # 100 mm/s / 50 Hz


def test_classify_los_no_obstacles():
    env = _env()
    assert classify_los(env, env.anchors[0], (5000, 5000))


def test_classify_los_blocked():
    env = _env(obstacles=[(2000, 2000, 3000, 3000)])
    assert not classify_los(env, env.anchors[0], (5000, 5000))


def test_classify_los_corner_graze():
    # segment touches only the (1000, 1000) corner: open-set => LOS
    env = _env(
        obstacles=[(1000, 1000, 2000, 2000)],
        anchors=[Anchor(0, [0.0, 2000.0, 2500.0])],
    )
    assert classify_los(env, env.anchors[0], (2000, 0))


def test_classify_los_diagonal_through_interior():
    env = _env(obstacles=[(1000, 900, 2000, 2100)])
    assert not classify_los(env, env.anchors[0], (4000, 4000))


def test_sample_measurement_los_zero_noise(rng):
    env = _env(
        los_noise_sigma=0.0,
        cir_params=CirSimParams(noise_sigma=0.0, n_extra_paths=0),
    )
    pose_mm = (3000.0, 4000.0)
    from uwbcorr.geometry import TagPose

    pose = TagPose(np.array([*pose_mm, 0.0]), np.zeros(3), 0.0)
    m = sample_measurement(env, pose, env.anchors[0], rng)
    assert m.measured_range == pytest.approx(m.eval_meta.true_range)
    assert m.eval_meta.los


def test_sample_measurement_nlos_two_taps(rng):
    dist = NlosErrorDistribution(kind="exponential", mean=600.0)
    env = _env(
        obstacles=[(1000, 1000, 2000, 3000)],
        los_noise_sigma=0.0,
        nlos_error_distribution=dist,
        cir_params=CirSimParams(noise_sigma=0.0, n_extra_paths=0),
    )
    from uwbcorr.geometry import TagPose

    pose = TagPose(np.array([3000.0, 4000.0, 0.0]), np.zeros(3), 0.0)
    found = set()
    for _ in range(50):
        m = sample_measurement(env, pose, env.anchors[0], rng)
        err = m.measured_range - m.eval_meta.true_range
        assert err >= 0.0
        assert err % 300.0 == pytest.approx(0.0, abs=1e-9)
        found.add(int(round(err / 300.0)))
    assert 2 in found  # the 2-tap (600 mm) bias shows up


def test_nlos_distribution_mean(rng):
    dist = NlosErrorDistribution(kind="exponential", mean=300.0, cap=1e9)
    draws = np.array([dist.sample(rng) for _ in range(10_000)])
    assert draws.mean() == pytest.approx(300.0, rel=0.05)
    logn = NlosErrorDistribution(kind="lognormal", mean=300.0, cap=1e9)
    draws = np.array([logn.sample(rng) for _ in range(10_000)])
    assert draws.mean() == pytest.approx(300.0, rel=0.05)


def test_nlos_errors_capped(rng):
    dist = NlosErrorDistribution(mean=5000.0)
    assert max(dist.sample(rng) for _ in range(100)) <= 1000.0


def test_single_anchor_policy(rng):
    env = _env()
    plan = TrajectoryPlan(waypoints=[(3000, 3000), (3500, 3000)], speed=100.0)
    ep = generate_episode(env, plan, rng)
    assert all(m.anchor_id == 0 for m in ep.measurements)


def test_round_robin_cycles(rng):
    anchors = [Anchor(i, [i * 400.0, 0.0, 2500.0]) for i in range(23)]
    env = _env(anchors=anchors)
    pick = round_robin_policy(env)
    from uwbcorr.geometry import TagPose

    pose = TagPose(np.zeros(3), np.zeros(3), 0.0)
    seq = [pick(pose).id for _ in range(46)]
    for start in range(0, 46 - 23):
        window = seq[start : start + 23]
        assert len(set(window)) == 23


def test_reference_environment_episode(rng):
    env = presets.environment("env1")
    plan = presets.reference_plan(1.0)
    ep = generate_episode(env, plan, rng)
    assert abs(len(ep.measurements) - 3000) <= 5
    nlos = np.mean([not m.eval_meta.los for m in ep.measurements])
    assert 0.2 <= nlos <= 0.5
    errors = np.array(
        [m.measured_range - m.eval_meta.true_range for m in ep.measurements]
    )
    assert np.all(np.abs(errors) <= 1000.0)


def test_env2_harder_than_env1(rng):
    env1 = presets.environment("env1")
    env2 = presets.environment("env2")
    assert len(env2.obstacles) > len(env1.obstacles)
