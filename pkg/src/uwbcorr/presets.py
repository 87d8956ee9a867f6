"""Reference environments and trajectory plans.

env1 is a 24 m x 10 m warehouse floor with 23 anchors and 4 racks; env2
is the same floor six months of clutter later: 7 racks and anchor
positions disturbed by up to 100 mm. Only the relative difficulty
ordering (env2 harder) is contractual.
"""

from __future__ import annotations

import numpy as np

from .geometry import Anchor
from .simulator import Environment, TrajectoryPlan

FLOOR_W = 24000.0  # mm
FLOOR_H = 10000.0  # mm
ANCHOR_Z = 2500.0  # mm

_RACKS_ENV1 = [
    (10000.0, 2200.0, 16000.0, 3000.0),
    (10000.0, 4600.0, 16000.0, 5400.0),
    (10000.0, 7000.0, 16000.0, 7800.0),
    (1000.0, 6500.0, 1800.0, 9000.0),
]

# Extra clutter for env2: vertical racks cutting side sight lines from
# the drive area plus a block along the left wall.
_RACKS_ENV2 = _RACKS_ENV1 + [
    (6400.0, 2600.0, 7200.0, 5200.0),
    (1000.0, 2200.0, 1800.0, 5800.0),
    (2600.0, 900.0, 6000.0, 1700.0),
]


def _anchor_grid() -> list:
    positions = []
    for x in np.linspace(500.0, 23500.0, 8):
        positions.append((x, 200.0))
    for x in np.linspace(500.0, 23500.0, 8):
        positions.append((x, 9800.0))
    for y in np.linspace(2500.0, 7500.0, 3):
        positions.append((200.0, y))
    for y in np.linspace(2500.0, 7500.0, 3):
        positions.append((23800.0, y))
    positions.append((12000.0, 3800.0))
    return [
        Anchor(id=i, position=np.array([x, y, ANCHOR_Z]))
        for i, (x, y) in enumerate(positions)
    ]


def _perturbed_anchors(max_shift: float = 100.0, seed: int = 20240601) -> list:
    rng = np.random.default_rng(seed)
    anchors = []
    for a in _anchor_grid():
        shift = rng.uniform(-max_shift, max_shift, 3)
        anchors.append(Anchor(id=a.id, position=a.position + shift))
    return anchors


def environment(name: str) -> Environment:
    if name == "env1":
        return Environment(
            bounds=(FLOOR_W, FLOOR_H), anchors=_anchor_grid(), obstacles=list(_RACKS_ENV1)
        )
    if name == "env2":
        return Environment(
            bounds=(FLOOR_W, FLOOR_H),
            anchors=_perturbed_anchors(),
            obstacles=list(_RACKS_ENV2),
        )
    raise KeyError(f"unknown environment preset: {name}")


def reference_plan(scale: float = 1.0) -> TrajectoryPlan:
    """Rectangular loop in the aisle between the first two racks.

    At scale 1.0 the 6 m perimeter at 0.1 m/s and 50 Hz gives ~3000
    samples per pass; `scale` shrinks the loop (and so the episode
    length) proportionally.
    """
    cx, cy = 4000.0, 3800.0
    half_w, half_h = 900.0 * scale, 600.0 * scale
    wp = [
        (cx - half_w, cy - half_h),
        (cx + half_w, cy - half_h),
        (cx + half_w, cy + half_h),
        (cx - half_w, cy + half_h),
        (cx - half_w, cy - half_h),
    ]
    return TrajectoryPlan(waypoints=wp, speed=100.0, sample_rate=50.0)


def random_plan(rng: np.random.Generator, n_waypoints: int = 12, scale: float = 1.0) -> TrajectoryPlan:
    """Unpredictable zigzag within the aisle's free space."""
    x_lo, x_hi = 4000.0 - 1500.0 * scale, 4000.0 + 1500.0 * scale
    y_lo, y_hi = 3100.0, 4500.0
    wp = [(rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi)) for _ in range(n_waypoints)]
    return TrajectoryPlan(waypoints=wp, speed=100.0, sample_rate=50.0)
