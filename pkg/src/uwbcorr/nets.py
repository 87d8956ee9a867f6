"""Actor, critic, and supervised-baseline networks.

Both networks share a 1D-CNN trunk over the 150-sample CIR window:
three same-length convolutions (128/64/32 channels, kernels 16/8/2)
with a max-pool after the first, then dense layers 150-100-50 down to a
25-unit sigmoid bottleneck. The actor maps the bottleneck to a single
Tanh output scaled by 1000 (the mm action bound); the critic compresses
the CIR to 4 latent features, concatenates the 1/1000-scaled action,
and regresses a Q-value through a Tanh head.

`width_scale` shrinks the trunk for desk-scale runs; output semantics
are unchanged.
"""

from __future__ import annotations

import torch
import torch.nn as nn

ACTION_SCALE_MM = 1000.0
CIR_LEN = 150


def _widths(scale: float):
    conv = (max(4, int(128 * scale)), max(4, int(64 * scale)), max(2, int(32 * scale)))
    dense = (max(8, int(150 * scale)), max(8, int(100 * scale)), max(4, int(50 * scale)))
    return conv, dense


class CirTrunk(nn.Module):
    """Shared convolutional/dense feature extractor, 150 -> 25 sigmoid."""

    def __init__(self, width_scale: float = 1.0):
        super().__init__()
        (c1, c2, c3), (d1, d2, d3) = _widths(width_scale)
        self.conv = nn.Sequential(
            nn.Conv1d(1, c1, kernel_size=16, padding="same"),
            nn.ReLU(),
            nn.MaxPool1d(2),
            nn.Conv1d(c1, c2, kernel_size=8, padding="same"),
            nn.ReLU(),
            nn.Conv1d(c2, c3, kernel_size=2, padding="same"),
            nn.ReLU(),
            nn.BatchNorm1d(c3),
            nn.Dropout(0.25),
            nn.Flatten(),
        )
        flat = c3 * (CIR_LEN // 2)
        self.dense = nn.Sequential(
            nn.Linear(flat, d1),
            nn.ReLU(),
            nn.BatchNorm1d(d1),
            nn.Dropout(0.20),
            nn.Linear(d1, d2),
            nn.ReLU(),
            nn.Dropout(0.20),
            nn.Linear(d2, d3),
            nn.ReLU(),
            nn.Dropout(0.10),
            nn.Linear(d3, 25),
            nn.Sigmoid(),
        )

    def forward(self, cir: torch.Tensor) -> torch.Tensor:
        # cir: (B, 150) -> (B, 25)
        return self.dense(self.conv(cir.unsqueeze(1)))


class ActorNet(nn.Module):
    """CIR -> range correction in mm, bounded to [-1000, 1000] by Tanh."""

    def __init__(self, width_scale: float = 1.0):
        super().__init__()
        self.trunk = CirTrunk(width_scale)
        self.head = nn.Linear(25, 1)

    def forward(self, cir: torch.Tensor) -> torch.Tensor:
        return torch.tanh(self.head(self.trunk(cir))) * ACTION_SCALE_MM


class CriticNet(nn.Module):
    """(CIR, correction mm) -> Q-value in [-1, 1]."""

    def __init__(self, width_scale: float = 1.0):
        super().__init__()
        self.trunk = CirTrunk(width_scale)
        self.latent = nn.Linear(25, 4)
        self.tail = nn.Sequential(
            nn.Linear(5, 8),
            nn.ReLU(),
            nn.Linear(8, 16),
            nn.ReLU(),
            nn.Linear(16, 8),
            nn.ReLU(),
            nn.Linear(8, 1),
        )

    def forward(self, cir: torch.Tensor, action_mm: torch.Tensor) -> torch.Tensor:
        z = torch.relu(self.latent(self.trunk(cir)))
        a = (action_mm / ACTION_SCALE_MM).reshape(-1, 1)
        return torch.tanh(self.tail(torch.cat([z, a], dim=1)))


class SupervisedNet(nn.Module):
    """Supervised error regressor: the actor trunk with a selectable head.

    head="linear" reproduces the prior CNN (unbounded output);
    head="tanh_scaled" bounds the prediction to the +/-1000 mm range.
    """

    def __init__(self, head: str = "tanh_scaled", width_scale: float = 1.0):
        super().__init__()
        if head not in ("linear", "tanh_scaled"):
            raise ValueError(f"unknown head: {head}")
        self.head_kind = head
        self.trunk = CirTrunk(width_scale)
        self.head = nn.Linear(25, 1)

    def forward(self, cir: torch.Tensor) -> torch.Tensor:
        out = self.head(self.trunk(cir))
        if self.head_kind == "tanh_scaled":
            out = torch.tanh(out) * ACTION_SCALE_MM
        return out


def zero_parameters(net: nn.Module):
    """Zero every learnable parameter (target-actor initialization)."""
    with torch.no_grad():
        for p in net.parameters():
            p.zero_()


@torch.no_grad()
def soft_update(target: nn.Module, source: nn.Module, tau: float):
    """target <- tau * source + (1 - tau) * target, parameters and stats."""
    for tp, sp in zip(target.parameters(), source.parameters()):
        if tp.shape != sp.shape:
            raise ValueError("parameter shape mismatch in soft update")
        tp.mul_(1.0 - tau).add_(sp, alpha=tau)
    for tb, sb in zip(target.buffers(), source.buffers()):
        if tb.dtype.is_floating_point:
            tb.mul_(1.0 - tau).add_(sb, alpha=tau)
        else:
            tb.copy_(sb)


def soft_update_tensors(target, source, tau: float):
    """Pure-tensor soft update used by tests and non-module state."""
    out = []
    for t, s in zip(target, source):
        if getattr(t, "shape", None) != getattr(s, "shape", None):
            raise ValueError("shape mismatch in soft update")
        out.append(tau * s + (1.0 - tau) * t)
    return out
