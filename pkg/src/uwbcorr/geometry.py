"""Ranging geometry and the UWB error model.

All distances are millimeters (double precision), all times seconds.
The speed of light is pinned to exactly 3.0e8 m/s so tap<->range
conversions stay bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Speed of light, mm/s (3.0e8 m/s exactly).
SPEED_OF_LIGHT_MM_S = 3.0e8 * 1000.0


@dataclass(frozen=True)
class Anchor:
    """Fixed reference node with a known 3D position in mm."""

    id: int
    position: np.ndarray  # shape (3,), mm

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        if pos.shape != (3,):
            raise ValueError("anchor position must be a 3-vector")
        if not np.all(np.isfinite(pos)):
            raise ValueError("anchor position must be finite")
        object.__setattr__(self, "position", pos)


@dataclass
class TagPose:
    """Ground-truth tag state at one instant."""

    position: np.ndarray  # (3,) mm
    velocity: np.ndarray  # (3,) mm/s
    timestamp: float  # s


class EvalMetaAccess(Exception):
    """Raised by the ground-truth tripwire when armed (test builds only)."""


class _EvalMetaGuard:
    """Process-wide tripwire guarding evaluation-only ground truth.

    Training code must never read `RangeMeasurement.eval_meta`; tests arm
    this guard around training calls to prove it.
    """

    def __init__(self):
        self.armed = False
        self.trips = 0

    def check(self):
        if self.armed:
            self.trips += 1
            raise EvalMetaAccess("eval_meta read while ground-truth guard armed")


eval_meta_guard = _EvalMetaGuard()


@dataclass(frozen=True)
class EvalMeta:
    """Evaluation-only metadata attached by the simulator."""

    true_range: float  # mm
    los: bool


@dataclass
class RangeMeasurement:
    """One timestamped anchor-tag range with its preprocessed CIR.

    `eval_meta` is produced by the simulator for evaluation only; the
    accessor trips the ground-truth guard when armed so tests can prove
    training never reads it.
    """

    timestamp: float  # s
    anchor_id: int
    measured_range: float  # mm
    cir: np.ndarray  # (150,) preprocessed, values in [0, 1]
    _eval_meta: EvalMeta | None = field(default=None, repr=False)

    @property
    def eval_meta(self) -> EvalMeta:
        eval_meta_guard.check()
        if self._eval_meta is None:
            raise ValueError("measurement carries no evaluation metadata")
        return self._eval_meta


def euclidean_range(a, b) -> float:
    """3D Euclidean distance in mm between two points."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.sqrt(np.sum((a - b) ** 2)))


def tof_to_range(tof: float) -> float:
    """Convert a time of flight in seconds to a range in mm."""
    if tof < 0:
        raise ValueError("time of flight must be non-negative")
    return tof * SPEED_OF_LIGHT_MM_S


def ranging_error(measured: float, true_range: float) -> float:
    """Signed ranging error e = measured - true, in mm (NLOS bias > 0)."""
    return measured - true_range
