"""Range-only tracking and the self-supervised target pipeline.

A constant-velocity EKF turns sequential single-anchor ranges into 2D
positions; an odd-length circular buffer averages those positions and
binds the mean to the buffer's middle entry, whose corrected range is
then scored against the range implied by the averaged position.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import Anchor, euclidean_range

REWARD_FLOOR_MM = 2.0  # caps the reward at 0.5 so critic targets stay in [-1, 1]


class SingularGeometry(Exception):
    """Predicted tag-anchor distance too small for a range Jacobian."""


@dataclass
class EkfConfig:
    process_noise_accel_sigma: float = 100.0  # mm/s^2
    measurement_noise_sigma: float = 300.0  # mm
    initial_position: tuple = (0.0, 0.0)  # mm
    initial_covariance_scale: float = 1.0e6  # mm^2 on position
    reset_between_episodes: bool = True


@dataclass
class EkfState:
    x: np.ndarray  # (4,) [x, y, vx, vy] in mm, mm/s
    P: np.ndarray  # (4, 4)
    last_timestamp: float = 0.0


def ekf_init(cfg: EkfConfig, timestamp: float = 0.0) -> EkfState:
    x = np.array([cfg.initial_position[0], cfg.initial_position[1], 0.0, 0.0])
    P = np.diag(
        [
            cfg.initial_covariance_scale,
            cfg.initial_covariance_scale,
            cfg.initial_covariance_scale / 100.0,
            cfg.initial_covariance_scale / 100.0,
        ]
    )
    return EkfState(x=x, P=P, last_timestamp=timestamp)


def ekf_predict(state: EkfState, dt: float, cfg: EkfConfig) -> EkfState:
    """Constant-velocity prediction with acceleration-driven process noise."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    F = np.array(
        [
            [1.0, 0.0, dt, 0.0],
            [0.0, 1.0, 0.0, dt],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    qa = cfg.process_noise_accel_sigma**2
    q11 = dt**4 / 4.0 * qa
    q12 = dt**3 / 2.0 * qa
    q22 = dt**2 * qa
    Q = np.array(
        [
            [q11, 0.0, q12, 0.0],
            [0.0, q11, 0.0, q12],
            [q12, 0.0, q22, 0.0],
            [0.0, q12, 0.0, q22],
        ]
    )
    x = F @ state.x
    P = F @ state.P @ F.T + Q
    P = 0.5 * (P + P.T)
    return EkfState(x=x, P=P, last_timestamp=state.last_timestamp + dt)


def ekf_update(
    state: EkfState, range_mm: float, anchor: Anchor, tag_height: float, cfg: EkfConfig
) -> tuple:
    """Range update against the 3D anchor; returns (new state, 2D position).

    Raises SingularGeometry when the predicted distance collapses below
    1 mm; callers should skip the update and keep the prediction.
    """
    if range_mm <= 0:
        raise ValueError("range must be positive")
    ax, ay, az = anchor.position
    dx = state.x[0] - ax
    dy = state.x[1] - ay
    dz = tag_height - az
    pred = np.sqrt(dx * dx + dy * dy + dz * dz)
    if pred < 1.0:
        raise SingularGeometry("predicted distance below 1 mm")
    H = np.array([dx / pred, dy / pred, 0.0, 0.0])
    innov = range_mm - pred
    S = H @ state.P @ H + cfg.measurement_noise_sigma**2
    K = state.P @ H / S
    x = state.x + K * innov
    P = (np.eye(4) - np.outer(K, H)) @ state.P
    P = 0.5 * (P + P.T)
    new = EkfState(x=x, P=P, last_timestamp=state.last_timestamp)
    return new, x[:2].copy()


@dataclass
class BufferEntry:
    p_ekf: np.ndarray  # (2,) mm
    corrected_range: float  # mm, range after the executed correction
    cir: np.ndarray
    executed_correction: float  # mm
    anchor_id: int
    tag: object = None  # caller-owned identity payload


@dataclass
class SmoothedSample:
    p_avg: np.ndarray  # (2,) mm
    corrected_range: float  # middle entry's corrected range
    cir: np.ndarray
    executed_correction: float
    anchor_id: int
    tag: object = None


@dataclass
class SmoothingBuffer:
    capacity: int = 31

    def __post_init__(self):
        if self.capacity % 2 == 0 or self.capacity < 1:
            raise ValueError("buffer capacity must be odd and positive")
        self._entries = deque(maxlen=self.capacity)

    def __len__(self):
        return len(self._entries)

    def push(self, entry: BufferEntry) -> SmoothedSample | None:
        """Append an entry; once full, emit the middle-bound averaged sample."""
        self._entries.append(entry)
        if len(self._entries) < self.capacity:
            return None
        positions = np.stack([e.p_ekf for e in self._entries])
        mid = self._entries[(self.capacity - 1) // 2]
        return SmoothedSample(
            p_avg=positions.mean(axis=0),
            corrected_range=mid.corrected_range,
            cir=mid.cir,
            executed_correction=mid.executed_correction,
            anchor_id=mid.anchor_id,
            tag=mid.tag,
        )


def position_to_range(p_avg, anchor: Anchor, tag_height: float) -> float:
    """Range implied by a 2D position at tag height to the 3D anchor."""
    return euclidean_range(
        np.array([p_avg[0], p_avg[1], tag_height]), anchor.position
    )


def compute_reward(
    corrected_range: float, smoothed_range: float, floor_mm: float = REWARD_FLOOR_MM
) -> float:
    """Inverse-distance reward, floored so R is capped at 0.5.

    At the default 2 mm floor this is exactly 1 / max(|diff|, 2). Larger
    floors keep the 0.5 cap but widen the peak, trading correction
    resolution for a reward landscape small critics can actually fit.
    """
    if floor_mm <= 0:
        raise ValueError("reward floor must be positive")
    return 0.5 * floor_mm / max(abs(corrected_range - smoothed_range), floor_mm)
