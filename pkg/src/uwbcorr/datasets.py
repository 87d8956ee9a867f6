"""Delimited-text dataset files and run manifests.

One CSV row per measurement: timestamp, anchor id and position, the
measured and true ranges, the LOS flag, and the 150 preprocessed CIR
values. Numbers are rendered with 9 significant digits so identical
seeds produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .cir import WINDOW_LEN
from .geometry import Anchor, EvalMeta, RangeMeasurement
from .simulator import Episode

SCHEMA_VERSION = 1

HEADER = (
    ["timestamp_s", "anchor_id", "anchor_x_mm", "anchor_y_mm", "anchor_z_mm",
     "measured_range_mm", "true_range_mm", "los_flag"]
    + [f"cir_{i}" for i in range(WINDOW_LEN)]
)


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_episode_csv(path, episode: Episode, anchors: dict):
    """Write one episode's measurements to a delimited text file."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for m in episode.measurements:
            a = anchors[m.anchor_id]
            meta = m._eval_meta
            row = [
                _fmt(m.timestamp),
                str(m.anchor_id),
                _fmt(a.position[0]),
                _fmt(a.position[1]),
                _fmt(a.position[2]),
                _fmt(m.measured_range),
                _fmt(meta.true_range),
                "1" if meta.los else "0",
            ] + [_fmt(v) for v in m.cir]
            w.writerow(row)


def read_episode_csv(path) -> tuple:
    """Read a dataset file back to (measurements, anchors dict)."""
    path = Path(path)
    measurements, anchors = [], {}
    with path.open() as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != HEADER:
            raise ValueError(f"unexpected dataset header in {path}")
        for row in r:
            aid = int(row[1])
            if aid not in anchors:
                anchors[aid] = Anchor(
                    id=aid, position=np.array([float(row[2]), float(row[3]), float(row[4])])
                )
            cir = np.array([float(v) for v in row[8:]], dtype=np.float32)
            measurements.append(
                RangeMeasurement(
                    timestamp=float(row[0]),
                    anchor_id=aid,
                    measured_range=float(row[5]),
                    cir=cir,
                    _eval_meta=EvalMeta(true_range=float(row[6]), los=row[7] == "1"),
                )
            )
    return measurements, anchors


def write_poses_csv(path, episode: Episode):
    """Companion ground-truth poses file (evaluation plotting only)."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp_s", "x_mm", "y_mm", "vx_mm_s", "vy_mm_s"])
        for p in episode.ground_truth_poses:
            w.writerow(
                [_fmt(p.timestamp), _fmt(p.position[0]), _fmt(p.position[1]),
                 _fmt(p.velocity[0]), _fmt(p.velocity[1])]
            )


def write_manifest(path, *, seed, preset, episodes, files, sample_counts, nlos_fractions):
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "preset": preset,
        "episodes": episodes,
        "files": files,
        "sample_counts": sample_counts,
        "nlos_fractions": nlos_fractions,
        "total_samples": int(sum(sample_counts)),
    }
    with Path(path).open("w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def nlos_fraction(measurements) -> float:
    flags = [not m._eval_meta.los for m in measurements]
    return float(np.mean(flags))
