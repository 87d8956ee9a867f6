"""Report rendering: delimited outputs plus matplotlib figures.

Every report artifact is data-first (CSV / JSON); figures are rendered
next to them as SVG so results can be inspected offline.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .baselines import EvalReport
from .tracking import (
    BufferEntry,
    EkfConfig,
    SingularGeometry,
    ekf_init,
    ekf_predict,
    ekf_update,
)

METRICS_HEADER = [
    "episode", "train_reward_mean", "val_mae_mm", "val_mae_nlos_mm",
    "epsilon", "lr_actor", "lr_critic", "target_actor_released",
]


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def write_metrics_csv(path, rows):
    """Per-episode training metrics stream."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRICS_HEADER)
        for r in rows:
            d = asdict(r)
            w.writerow([_fmt(d[k]) for k in METRICS_HEADER])


def append_metrics_row(path, row, write_header: bool = False):
    with Path(path).open("a", newline="") as fh:
        w = csv.writer(fh)
        if write_header:
            w.writerow(METRICS_HEADER)
        d = asdict(row)
        w.writerow([_fmt(d[k]) for k in METRICS_HEADER])


def write_residuals_csv(path, measurements, report: EvalReport):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp_s", "anchor_id", "los_flag",
                    "residual_before_mm", "residual_after_mm"])
        for m, rb, ra, nl in zip(
            measurements, report.residuals_before, report.residuals_after,
            report.nlos_mask,
        ):
            w.writerow([_fmt(m.timestamp), m.anchor_id, "0" if nl else "1",
                        _fmt(float(rb)), _fmt(float(ra))])


def write_summary_json(path, summary: dict):
    with Path(path).open("w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def ekf_trajectory(measurements, anchors, tag_height, ekf_cfg: EkfConfig,
                   corrections=None) -> np.ndarray:
    """Run the EKF over a measurement stream; returns (n, 2) positions."""
    if corrections is None:
        corrections = np.zeros(len(measurements))
    st = ekf_init(ekf_cfg, measurements[0].timestamp)
    out = []
    for t, (m, a) in enumerate(zip(measurements, corrections)):
        if t > 0:
            dt = m.timestamp - measurements[t - 1].timestamp
            if dt > 0:
                st = ekf_predict(st, dt, ekf_cfg)
        try:
            st, p = ekf_update(st, m.measured_range - a, anchors[m.anchor_id],
                               tag_height, ekf_cfg)
        except SingularGeometry:
            p = st.x[:2].copy()
        out.append(p)
    return np.stack(out)


def write_trajectory_csv(path, timestamps, truth, uncorrected, corrected):
    """truth may be None when no ground-truth poses file is available."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp_s", "truth_x_mm", "truth_y_mm",
                    "ekf_uncorrected_x_mm", "ekf_uncorrected_y_mm",
                    "ekf_corrected_x_mm", "ekf_corrected_y_mm"])
        for i, ts in enumerate(timestamps):
            tx, ty = ("", "") if truth is None else (
                _fmt(float(truth[i][0])), _fmt(float(truth[i][1])))
            w.writerow([_fmt(ts), tx, ty,
                        _fmt(float(uncorrected[i][0])), _fmt(float(uncorrected[i][1])),
                        _fmt(float(corrected[i][0])), _fmt(float(corrected[i][1]))])


def plot_residual_boxes(path, report: EvalReport, title: str):
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=True)
    axes[0].boxplot([report.residuals_before, report.residuals_after],
                    tick_labels=["uncorrected", "corrected"])
    axes[0].set_title("all samples")
    axes[0].set_ylabel("ranging error [mm]")
    if report.box_nlos_before is not None:
        nl = report.nlos_mask
        axes[1].boxplot(
            [report.residuals_before[nl], report.residuals_after[nl]],
            tick_labels=["uncorrected", "corrected"])
        axes[1].set_title("NLOS only")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_learning_curve(path, rows, baseline_mae=None):
    ep = [r.episode for r in rows]
    mae = [r.val_mae_mm for r in rows]
    mae_nl = [r.val_mae_nlos_mm for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(ep, mae, label="val MAE (all)")
    ax.plot(ep, mae_nl, label="val MAE (NLOS)", alpha=0.7)
    if baseline_mae is not None:
        ax.axhline(baseline_mae, color="k", ls="--", lw=1, label="uncorrected")
    rel = [i for i, r in enumerate(rows) if r.target_actor_released]
    if rel:
        ax.axvline(ep[rel[0]], color="r", ls=":", lw=1, label="target actor released")
    ax.set_xlabel("episode")
    ax.set_ylabel("MAE [mm]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_trajectory(path, truth, uncorrected, corrected):
    fig, ax = plt.subplots(figsize=(6, 5))
    if truth is not None:
        ax.plot(truth[:, 0], truth[:, 1], "k-", lw=1, label="ground truth")
    ax.plot(uncorrected[:, 0], uncorrected[:, 1], "b-", lw=0.8, alpha=0.7,
            label="EKF uncorrected")
    ax.plot(corrected[:, 0], corrected[:, 1], "g-", lw=0.8, alpha=0.8,
            label="EKF corrected")
    ax.set_xlabel("x [mm]")
    ax.set_ylabel("y [mm]")
    ax.set_aspect("equal")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
