"""Synthetic warehouse environments, trajectories, and measurement streams.

Generates episodes of single-anchor range measurements with CIRs whose
LOS/NLOS error statistics mirror an industrial UWB deployment: racks
block line of sight, NLOS ranges pick up a positive tap-quantized bias,
and every injected error stays within +/-1000 mm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import cir as cirlib
from .cir import CirSimParams, NoPathDetected
from .geometry import Anchor, EvalMeta, RangeMeasurement, TagPose, euclidean_range

TAP_MM = 300.0  # one CIR tap (1 ns) at c = 3e8 m/s
ERROR_CAP_MM = 1000.0  # action-space bound; injected errors never exceed it
MAX_ERROR_TAPS = 3


class DegeneratePlan(Exception):
    """Trajectory plan with zero total path length."""


class MeasurementRetryExhausted(Exception):
    """CIR generation kept failing leading-edge detection."""


@dataclass
class NlosErrorDistribution:
    kind: str = "exponential"  # exponential | lognormal
    mean: float = 300.0  # mm
    cap: float = ERROR_CAP_MM  # mm

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "exponential":
            e = rng.exponential(self.mean)
        elif self.kind == "lognormal":
            # Pick mu for the requested mean at a fixed shape sigma.
            sigma = 0.75
            mu = np.log(self.mean) - sigma**2 / 2
            e = rng.lognormal(mu, sigma)
        else:
            raise ValueError(f"unknown NLOS error distribution: {self.kind}")
        return min(e, self.cap)


@dataclass
class Environment:
    bounds: tuple  # (width_mm, height_mm), origin at (0, 0)
    anchors: list  # of Anchor
    obstacles: list  # of (xmin, ymin, xmax, ymax) mm rectangles
    tag_height: float = 300.0  # mm
    nlos_error_distribution: NlosErrorDistribution = field(
        default_factory=NlosErrorDistribution
    )
    los_noise_sigma: float = 50.0  # mm
    cir_params: CirSimParams = field(default_factory=CirSimParams)
    radio_range: float | None = None  # mm; None = all anchors always in range


@dataclass
class TrajectoryPlan:
    waypoints: list  # of (x, y) mm
    speed: float = 100.0  # mm/s
    sample_rate: float = 50.0  # Hz


@dataclass
class Episode:
    measurements: list  # of RangeMeasurement
    ground_truth_poses: list  # of TagPose, parallel to measurements


def generate_trajectory(plan: TrajectoryPlan) -> list:
    """Constant-speed sampling along the waypoint polyline.

    Includes both endpoints; poses are spaced 1/sample_rate in time.
    """
    if len(plan.waypoints) < 2:
        raise DegeneratePlan("need at least two waypoints")
    pts = np.asarray(plan.waypoints, dtype=float)
    seg = np.diff(pts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    total = seg_len.sum()
    if total == 0:
        raise DegeneratePlan("zero total path length")
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    duration = total / plan.speed
    n = int(round(duration * plan.sample_rate)) + 1
    poses = []
    for i in range(n):
        t = i / plan.sample_rate
        s = min(t * plan.speed, total)
        k = int(np.searchsorted(cum, s, side="right") - 1)
        k = min(k, len(seg_len) - 1)
        frac = (s - cum[k]) / seg_len[k] if seg_len[k] > 0 else 0.0
        xy = pts[k] + frac * seg[k]
        direction = seg[k] / seg_len[k] if seg_len[k] > 0 else np.zeros(2)
        vel = direction * plan.speed
        poses.append(
            TagPose(
                position=np.array([xy[0], xy[1], 0.0]),
                velocity=np.array([vel[0], vel[1], 0.0]),
                timestamp=t,
            )
        )
    return poses


def _segment_hits_open_rect(p0, p1, rect) -> bool:
    """True iff segment p0-p1 passes through the open interior of rect."""
    xmin, ymin, xmax, ymax = rect
    d = (p1[0] - p0[0], p1[1] - p0[1])
    tlow, thigh = 0.0, 1.0
    for axis, (lo, hi) in enumerate(((xmin, xmax), (ymin, ymax))):
        p, delta = p0[axis], d[axis]
        if delta == 0.0:
            if not (lo < p < hi):
                return False
        else:
            t0 = (lo - p) / delta
            t1 = (hi - p) / delta
            if t0 > t1:
                t0, t1 = t1, t0
            tlow = max(tlow, t0)
            thigh = min(thigh, t1)
            if tlow >= thigh:
                return False
    return tlow < thigh


def classify_los(env: Environment, anchor: Anchor, pos) -> bool:
    """True iff the 2D segment anchor->pos crosses no obstacle interior.

    Corner-grazing segments count as LOS (open-set convention).
    """
    a = (float(anchor.position[0]), float(anchor.position[1]))
    p = (float(pos[0]), float(pos[1]))
    return not any(_segment_hits_open_rect(a, p, r) for r in env.obstacles)


def sample_measurement(
    env: Environment,
    pose: TagPose,
    anchor: Anchor,
    rng: np.random.Generator,
    max_retries: int = 8,
) -> RangeMeasurement:
    """One biased range measurement with its preprocessed CIR.

    The realized ranging error is whatever leading-edge detection reads
    off the generated CIR (a whole number of taps) plus sub-tap Gaussian
    noise, clipped to +/-1000 mm.
    """
    tag_pos = np.array([pose.position[0], pose.position[1], env.tag_height])
    true_range = euclidean_range(anchor.position, tag_pos)
    los = classify_los(env, anchor, pose.position)

    if los:
        error_taps = 0
    else:
        e = env.nlos_error_distribution.sample(rng)
        error_taps = int(np.clip(round(e / TAP_MM), 0, MAX_ERROR_TAPS))

    fp_tap = int(rng.integers(cirlib.FP_MIN, cirlib.FP_MAX - MAX_ERROR_TAPS))
    raw = None
    for _ in range(max_retries):
        try:
            raw = cirlib.simulate_cir(env.cir_params, fp_tap, error_taps, los, rng)
            break
        except NoPathDetected:
            continue
    if raw is None:
        raise MeasurementRetryExhausted("no detectable CIR after retries")

    detected_taps = raw.detected_fp_index - fp_tap
    sub_tap = rng.normal(0.0, env.los_noise_sigma) if env.los_noise_sigma > 0 else 0.0
    e_detected = float(np.clip(detected_taps * TAP_MM + sub_tap, -ERROR_CAP_MM, ERROR_CAP_MM))
    return RangeMeasurement(
        timestamp=pose.timestamp,
        anchor_id=anchor.id,
        measured_range=true_range + e_detected,
        cir=cirlib.preprocess(raw),
        _eval_meta=EvalMeta(true_range=true_range, los=los),
    )


def round_robin_policy(env: Environment):
    """Default anchor schedule: cycle through anchors currently in range."""
    counter = {"i": 0}

    def pick(pose: TagPose) -> Anchor:
        anchors = env.anchors
        if env.radio_range is not None:
            tag = np.array([pose.position[0], pose.position[1], env.tag_height])
            in_range = [
                a for a in anchors if euclidean_range(a.position, tag) <= env.radio_range
            ]
            anchors = in_range or anchors
        a = anchors[counter["i"] % len(anchors)]
        counter["i"] += 1
        return a

    return pick


def generate_episode(
    env: Environment,
    plan: TrajectoryPlan,
    rng: np.random.Generator,
    anchor_policy=None,
) -> Episode:
    """One pass over the trajectory, one measurement per time step."""
    poses = generate_trajectory(plan)
    policy = anchor_policy if anchor_policy is not None else round_robin_policy(env)
    measurements = [sample_measurement(env, pose, policy(pose), rng) for pose in poses]
    return Episode(measurements=measurements, ground_truth_poses=poses)
