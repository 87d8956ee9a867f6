"""Baselines and evaluation statistics.

The supervised baseline trains the actor architecture directly on true
ranging errors (labels are allowed here, unlike the RL path) with either
the prior linear head or the bounded tanh-scaled head. Evaluation
reports MAE over all samples and NLOS-only, plus boxplot statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .nets import SupervisedNet


class EmptyInput(Exception):
    pass


class MissingGroundTruth(Exception):
    pass


def mae(residuals) -> float:
    """Mean absolute error in mm."""
    r = np.asarray(residuals, dtype=float)
    if r.size == 0:
        raise EmptyInput("no residuals")
    return float(np.mean(np.abs(r)))


@dataclass
class BoxplotStats:
    median: float
    q1: float
    q3: float
    iqr: float
    whisker_low: float
    whisker_high: float
    outliers: np.ndarray


def boxplot_stats(residuals) -> BoxplotStats:
    """Quartiles by linear interpolation; whiskers at 1.5*IQR clipped to data."""
    r = np.asarray(residuals, dtype=float)
    if r.size == 0:
        raise EmptyInput("no residuals")
    q1, med, q3 = np.percentile(r, [25, 50, 75])
    iqr = q3 - q1
    lo_bound, hi_bound = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = r[(r >= lo_bound) & (r <= hi_bound)]
    return BoxplotStats(
        median=float(med),
        q1=float(q1),
        q3=float(q3),
        iqr=float(iqr),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=np.sort(r[(r < lo_bound) | (r > hi_bound)]),
    )


@dataclass
class EvalReport:
    n_samples: int
    n_nlos: int
    residuals_before: np.ndarray
    residuals_after: np.ndarray
    nlos_mask: np.ndarray
    mae_before: float
    mae_after: float
    mae_nlos_before: float
    mae_nlos_after: float
    box_before: BoxplotStats
    box_after: BoxplotStats
    box_nlos_before: BoxplotStats | None
    box_nlos_after: BoxplotStats | None

    def summary_dict(self) -> dict:
        def box(b):
            if b is None:
                return None
            return {
                "median": b.median, "q1": b.q1, "q3": b.q3, "iqr": b.iqr,
                "whisker_low": b.whisker_low, "whisker_high": b.whisker_high,
                "n_outliers": int(b.outliers.size),
            }

        return {
            "n_samples": self.n_samples,
            "n_nlos": self.n_nlos,
            "mae_before_mm": self.mae_before,
            "mae_after_mm": self.mae_after,
            "mae_nlos_before_mm": self.mae_nlos_before,
            "mae_nlos_after_mm": self.mae_nlos_after,
            "box_before": box(self.box_before),
            "box_after": box(self.box_after),
            "box_nlos_before": box(self.box_nlos_before),
            "box_nlos_after": box(self.box_nlos_after),
        }


class ZeroCorrector:
    """Identity baseline: predicts no correction."""

    def correct(self, cirs) -> np.ndarray:
        return np.zeros(len(cirs))


class SupervisedModel:
    """Frozen supervised regressor exposing the common correct() surface."""

    def __init__(self, net: SupervisedNet):
        self.net = net

    def correct(self, cirs) -> np.ndarray:
        self.net.eval()
        with torch.no_grad():
            x = torch.as_tensor(np.asarray(cirs, dtype=np.float32))
            if x.ndim == 1:
                x = x.unsqueeze(0)
            return self.net(x).squeeze(1).numpy().astype(float)


def evaluate(model, measurements, split: str = "all") -> EvalReport:
    """Corrected-vs-true residual report for a frozen model or agent.

    split="nlos_only" restricts the primary sample set to NLOS rows;
    NLOS sub-statistics are always reported.
    """
    if split not in ("all", "nlos_only"):
        raise ValueError(f"unknown split: {split}")
    if not measurements:
        raise EmptyInput("no measurements")
    for m in measurements:
        if m._eval_meta is None:
            raise MissingGroundTruth("dataset rows lack evaluation metadata")

    nlos = np.array([not m.eval_meta.los for m in measurements])
    if split == "nlos_only":
        measurements = [m for m, f in zip(measurements, nlos) if f]
        if not measurements:
            raise EmptyInput("no NLOS samples in dataset")
        nlos = np.ones(len(measurements), dtype=bool)

    cirs = np.stack([m.cir for m in measurements]).astype(np.float32)
    corr = model.correct(cirs)
    before = np.array([m.measured_range - m.eval_meta.true_range for m in measurements])
    after = before - corr

    have_nlos = bool(nlos.any())
    return EvalReport(
        n_samples=len(measurements),
        n_nlos=int(nlos.sum()),
        residuals_before=before,
        residuals_after=after,
        nlos_mask=nlos,
        mae_before=mae(before),
        mae_after=mae(after),
        mae_nlos_before=mae(before[nlos]) if have_nlos else float("nan"),
        mae_nlos_after=mae(after[nlos]) if have_nlos else float("nan"),
        box_before=boxplot_stats(before),
        box_after=boxplot_stats(after),
        box_nlos_before=boxplot_stats(before[nlos]) if have_nlos else None,
        box_nlos_after=boxplot_stats(after[nlos]) if have_nlos else None,
    )


@dataclass
class SupervisedConfig:
    head: str = "tanh_scaled"  # or "linear"
    lr: float = 1e-4
    batch_size: int = 50
    max_epochs: int = 200
    patience: int = 20
    width_scale: float = 1.0
    train_fraction: float = 0.8
    seed: int = 0


def train_supervised(measurements, cfg: SupervisedConfig) -> tuple:
    """MSE-fit the CNN to true errors with early stopping on val MAE.

    Returns (SupervisedModel, history) where history is a list of
    per-epoch (train_loss, val_mae) pairs.
    """
    if not measurements:
        raise EmptyInput("no measurements")
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    net = SupervisedNet(head=cfg.head, width_scale=cfg.width_scale)
    optim = torch.optim.Adam(net.parameters(), lr=cfg.lr)

    cirs = np.stack([m.cir for m in measurements]).astype(np.float32)
    labels = np.array(
        [m.measured_range - m.eval_meta.true_range for m in measurements],
        dtype=np.float32,
    )
    n_train = int(round(len(measurements) * cfg.train_fraction))
    x_train, y_train = cirs[:n_train], labels[:n_train]
    x_val, y_val = cirs[n_train:], labels[n_train:]

    best_state = None
    best_val = np.inf
    bad = 0
    history = []
    for _ in range(cfg.max_epochs):
        order = rng.permutation(len(x_train))
        net.train()
        losses = []
        for i in range(0, len(order), cfg.batch_size):
            idx = order[i : i + cfg.batch_size]
            if len(idx) < 2:  # batch norm needs more than one sample
                continue
            xb = torch.as_tensor(x_train[idx])
            yb = torch.as_tensor(y_train[idx]).reshape(-1, 1)
            pred = net(xb)
            loss = torch.mean((pred - yb) ** 2)
            optim.zero_grad()
            loss.backward()
            optim.step()
            losses.append(float(loss.item()))

        net.eval()
        with torch.no_grad():
            if len(x_val):
                pred = net(torch.as_tensor(x_val)).squeeze(1).numpy()
                val_mae = mae(y_val - pred)
            else:
                val_mae = float(np.mean(losses)) ** 0.5
        history.append((float(np.mean(losses)), val_mae))
        if val_mae < best_val - 1e-6:
            best_val = val_mae
            best_state = {k: v.clone() for k, v in net.state_dict().items()}
            bad = 0
        else:
            bad += 1
            if bad >= cfg.patience:
                break

    if best_state is not None:
        net.load_state_dict(best_state)
    return SupervisedModel(net), history
