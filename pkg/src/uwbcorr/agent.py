"""Self-supervised DDPG-style correction agent and its training loop.

The agent never sees ground truth: rewards come from the agreement
between corrected ranges and ranges implied by EKF-filtered, smoothed
positions. The target actor starts at exactly zero and is released for
soft updates only once the online actor's loss plateaus.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import torch

from . import nets
from .nets import ActorNet, CriticNet, soft_update, zero_parameters
from .tracking import (
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

CHECKPOINT_VERSION = 3
ACTION_BOUND_MM = 1000.0


class ConfigError(Exception):
    pass


class NonFiniteLoss(Exception):
    pass


class VersionMismatch(Exception):
    pass


class CorruptFile(Exception):
    pass


@dataclass
class AgentConfig:
    gamma: float = 0.5
    tau_actor: float = 0.01
    tau_critic: float = 0.01
    lr_actor: float = 5e-5
    lr_critic: float = 5e-4
    batch_size: int = 50
    scheduler_patience: int = 150  # episodes
    lr_reduction_factor: float = 0.5
    plateau_rel_threshold: float = 1e-3
    epsilon_min: float = 0.05
    epsilon_max: float = 1.0
    epsilon_decay: float = 1e-5  # per training step
    replay_capacity: int = 50_000
    train_every_steps: int = 50  # K
    updates_per_train_step: int = 1  # gradient updates per training event
    actor_warmup_updates: int = 0  # critic-only updates before the actor trains
    lr_critic_after_warmup: float | None = None  # critic lr once the actor trains
    target_update_every_steps: int = 100  # T
    smoothing_buffer_len: int = 31  # N, odd
    reward_floor_mm: float = 2.0
    width_scale: float = 1.0
    train_fraction: float = 0.8
    compute_val_metrics: bool = True

    def validate(self):
        if not (0 < self.tau_actor <= 1 and 0 < self.tau_critic <= 1):
            raise ConfigError("tau must be in (0, 1]")
        if not (0 <= self.epsilon_min <= self.epsilon_max <= 1):
            raise ConfigError("need 0 <= epsilon_min <= epsilon_max <= 1")
        if self.smoothing_buffer_len % 2 == 0:
            raise ConfigError("smoothing buffer length must be odd")
        if self.batch_size < 1 or self.replay_capacity < self.batch_size:
            raise ConfigError("bad batch size / replay capacity")
        if not (0 < self.train_fraction <= 1):
            raise ConfigError("train fraction must be in (0, 1]")
        if self.reward_floor_mm <= 0:
            raise ConfigError("reward floor must be positive")
        if self.updates_per_train_step < 1:
            raise ConfigError("updates per training step must be >= 1")
        if self.actor_warmup_updates < 0:
            raise ConfigError("actor warmup updates must be >= 0")
        if self.lr_critic_after_warmup is not None and self.lr_critic_after_warmup <= 0:
            raise ConfigError("post-warmup critic lr must be positive")


def epsilon_decay_for(target_step: int, eps_min: float = 0.05, eps_max: float = 1.0) -> float:
    """Decay rate such that epsilon reaches ~2*eps_min at target_step."""
    return float(np.log((eps_max - eps_min) / eps_min) / target_step)


def epsilon(step: int, cfg: AgentConfig) -> float:
    """Exponentially decaying exploration rate."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return cfg.epsilon_min + (cfg.epsilon_max - cfg.epsilon_min) * np.exp(
        -cfg.epsilon_decay * step
    )


class ReplayMemory:
    """Bounded FIFO of (cir, action, reward); uniform batches w/o replacement."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.cirs = np.zeros((capacity, nets.CIR_LEN), dtype=np.float32)
        self.actions = np.zeros(capacity, dtype=np.float32)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.size = 0
        self.head = 0

    def __len__(self):
        return self.size

    def push(self, cir, action: float, reward: float):
        i = self.head
        self.cirs[i] = cir
        self.actions[i] = action
        self.rewards[i] = reward
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return self.cirs[idx], self.actions[idx], self.rewards[idx]

    def state_dict(self):
        return {
            "cirs": self.cirs[: self.size].copy(),
            "actions": self.actions[: self.size].copy(),
            "rewards": self.rewards[: self.size].copy(),
            "head": self.head,
            "capacity": self.capacity,
        }

    def load_state_dict(self, state):
        self.capacity = state["capacity"]
        n = len(state["actions"])
        self.cirs = np.zeros((self.capacity, nets.CIR_LEN), dtype=np.float32)
        self.actions = np.zeros(self.capacity, dtype=np.float32)
        self.rewards = np.zeros(self.capacity, dtype=np.float32)
        self.cirs[:n] = state["cirs"]
        self.actions[:n] = state["actions"]
        self.rewards[:n] = state["rewards"]
        self.size = n
        self.head = state["head"]


class PlateauScheduler:
    """Plateau detector driving both LR reduction and target-actor release.

    Minimizes the monitored value. Improvement means dropping more than
    rel_threshold (scaled by max(|best|, 1)) below the best seen value;
    `patience` consecutive non-improving episodes trigger an LR cut and
    latch the release flag.
    """

    def __init__(self, optimizer, patience: int, factor: float, rel_threshold: float):
        self.optimizer = optimizer
        self.patience = patience
        self.factor = factor
        self.rel_threshold = rel_threshold
        self.best = None
        self.bad_count = 0
        self.released = False

    def step(self, value: float) -> dict:
        reduced = False
        if self.best is None or self.best - value > self.rel_threshold * max(
            abs(self.best), 1.0
        ):
            self.best = value
            self.bad_count = 0
        else:
            self.bad_count += 1
            if self.bad_count > self.patience:
                for g in self.optimizer.param_groups:
                    g["lr"] *= self.factor
                self.bad_count = 0
                self.released = True
                reduced = True
        return {"lr_reduced": reduced, "release_target_actor": self.released}

    @property
    def lr(self) -> float:
        return self.optimizer.param_groups[0]["lr"]

    def reset_lr(self, lr: float):
        for g in self.optimizer.param_groups:
            g["lr"] = lr
        self.best = None
        self.bad_count = 0

    def state_dict(self):
        return {
            "best": self.best,
            "bad_count": self.bad_count,
            "released": self.released,
        }

    def load_state_dict(self, state):
        self.best = state["best"]
        self.bad_count = state["bad_count"]
        self.released = state["released"]


def select_action(
    target_actor: ActorNet,
    cir: np.ndarray,
    eps: float,
    rng: np.random.Generator,
    target_is_zero: bool = False,
) -> float:
    """Epsilon-greedy: uniform random in the action space, else target actor."""
    if rng.random() < eps:
        return float(rng.uniform(-ACTION_BOUND_MM, ACTION_BOUND_MM))
    if target_is_zero:
        return 0.0
    target_actor.eval()
    with torch.no_grad():
        x = torch.as_tensor(cir, dtype=torch.float32).unsqueeze(0)
        return float(target_actor(x).item())


def critic_target(
    reward: torch.Tensor, q_target_free: torch.Tensor, gamma: float
) -> torch.Tensor:
    """y = R + gamma * Qdot(S, mu(S)); same-state form (actions do not
    influence the successor state)."""
    return reward + gamma * q_target_free


@dataclass
class TrainingData:
    """A fixed measurement pass plus the deployment geometry."""

    measurements: list  # of RangeMeasurement, time ordered
    anchors: dict  # id -> Anchor
    tag_height: float


@dataclass
class EpisodeMetrics:
    episode: int
    train_reward_mean: float
    val_mae_mm: float
    val_mae_nlos_mm: float
    epsilon: float
    lr_actor: float
    lr_critic: float
    target_actor_released: bool


class CorrectionAgent:
    """Holds the four networks, optimizers, schedulers, and RNG streams."""

    def __init__(self, cfg: AgentConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.seed = seed
        torch.manual_seed(seed)
        self.rng = np.random.default_rng(seed)
        self.actor = ActorNet(cfg.width_scale)
        self.critic = CriticNet(cfg.width_scale)
        self.target_actor = ActorNet(cfg.width_scale)
        zero_parameters(self.target_actor)
        self.target_critic = CriticNet(cfg.width_scale)
        self.target_critic.load_state_dict(self.critic.state_dict())
        self.actor_optim = torch.optim.Adam(self.actor.parameters(), lr=cfg.lr_actor)
        self.critic_optim = torch.optim.Adam(self.critic.parameters(), lr=cfg.lr_critic)
        self.actor_sched = PlateauScheduler(
            self.actor_optim,
            cfg.scheduler_patience,
            cfg.lr_reduction_factor,
            cfg.plateau_rel_threshold,
        )
        self.critic_sched = PlateauScheduler(
            self.critic_optim,
            cfg.scheduler_patience,
            cfg.lr_reduction_factor,
            cfg.plateau_rel_threshold,
        )
        self.replay = ReplayMemory(cfg.replay_capacity)
        self.update_count = 0  # network updates applied (warmup clock)
        self.global_step = 0  # training steps seen (epsilon / K / T clocks)
        self.episode = 0
        self.released = False
        self.target_actor_is_zero = True

    # -- updates ---------------------------------------------------------

    def update_networks(self) -> tuple:
        """One critic + one actor update on a uniform replay batch."""
        cfg = self.cfg
        self.update_count += 1
        in_warmup = self.update_count <= cfg.actor_warmup_updates
        if (cfg.lr_critic_after_warmup is not None
                and self.update_count == cfg.actor_warmup_updates + 1):
            self.critic_sched.reset_lr(cfg.lr_critic_after_warmup)
        cirs, actions, rewards = self.replay.sample(cfg.batch_size, self.rng)
        cir_t = torch.as_tensor(cirs)
        act_t = torch.as_tensor(actions)
        rew_t = torch.as_tensor(rewards).reshape(-1, 1)

        self.actor.eval()
        self.target_critic.eval()
        with torch.no_grad():
            if in_warmup:
                # Pure reward regression while the actor is untrained:
                # bootstrapping through a random policy adds a moving,
                # high-variance offset that flattens the critic's action
                # response before the actor ever gets to climb it.
                y = rew_t
            else:
                q_free = self.target_critic(cir_t, self.actor(cir_t).squeeze(1))
                y = critic_target(rew_t, q_free, cfg.gamma)

        self.critic.train()
        q = self.critic(cir_t, act_t)
        critic_loss = torch.mean((y - q) ** 2)
        self.critic_optim.zero_grad()
        critic_loss.backward()
        self.critic_optim.step()

        # Actor ascends Q(s, mu(s)); critic is frozen (eval, no step) here.
        # During warmup only the critic trains and the actor loss is just
        # observed, so the policy never chases an unconverged value surface.
        self.critic.eval()
        if in_warmup:
            self.actor.eval()
            with torch.no_grad():
                actor_loss = -torch.mean(
                    self.critic(cir_t, self.actor(cir_t).squeeze(1))
                )
        else:
            self.actor.train()
            actor_loss = -torch.mean(
                self.critic(cir_t, self.actor(cir_t).squeeze(1))
            )
            self.actor_optim.zero_grad()
            actor_loss.backward()
            self.actor_optim.step()
        self.critic_optim.zero_grad()

        cl, al = float(critic_loss.item()), float(actor_loss.item())
        if not (np.isfinite(cl) and np.isfinite(al)):
            raise NonFiniteLoss(f"critic={cl} actor={al}")
        return cl, al

    def soft_update_targets(self):
        soft_update(self.target_critic, self.critic, self.cfg.tau_critic)
        if self.released:
            soft_update(self.target_actor, self.actor, self.cfg.tau_actor)
            self.target_actor_is_zero = False

    # -- inference -------------------------------------------------------

    def correct(self, cirs: np.ndarray) -> np.ndarray:
        """Eval-mode corrections (mm) for a batch of preprocessed CIRs."""
        self.actor.eval()
        with torch.no_grad():
            x = torch.as_tensor(np.asarray(cirs, dtype=np.float32))
            if x.ndim == 1:
                x = x.unsqueeze(0)
            return self.actor(x).squeeze(1).numpy().astype(float)

    def target_corrections(self, cirs: np.ndarray) -> np.ndarray:
        if self.target_actor_is_zero:
            return np.zeros(len(cirs))
        self.target_actor.eval()
        with torch.no_grad():
            x = torch.as_tensor(np.asarray(cirs, dtype=np.float32))
            return self.target_actor(x).squeeze(1).numpy().astype(float)


def _validation_stats(agent: CorrectionAgent, val: list) -> tuple:
    """Val-set MAE (all, NLOS-only) using evaluation metadata."""
    cirs = np.stack([m.cir for m in val]).astype(np.float32)
    corr = agent.correct(cirs)
    resid = np.array(
        [(m.measured_range - a) - m.eval_meta.true_range for m, a in zip(val, corr)]
    )
    nlos = np.array([not m.eval_meta.los for m in val])
    mae = float(np.mean(np.abs(resid)))
    mae_nlos = float(np.mean(np.abs(resid[nlos]))) if nlos.any() else float("nan")
    return mae, mae_nlos


def run_training_episode(
    agent: CorrectionAgent, data: TrainingData, ekf_cfg: EkfConfig, ekf_state=None
) -> tuple:
    """One pass of Algorithm-style training over the measurement stream.

    Training steps cover the first train_fraction of the pass; the tail
    flows through the EKF and smoothing buffer for continuity but never
    reaches the replay memory. Returns (reward_mean, actor_loss_mean,
    critic_loss_mean, ekf_state). No ground truth is read here.
    """
    cfg = agent.cfg
    ms = data.measurements
    n_train = int(round(len(ms) * cfg.train_fraction))
    buffer = SmoothingBuffer(cfg.smoothing_buffer_len)
    if ekf_state is None:
        ekf_state = ekf_init(ekf_cfg, timestamp=ms[0].timestamp)

    # Non-explored actions come from the frozen target actor; recompute the
    # remaining pass in one batch whenever its weights change (every T steps
    # after release). Identical to per-step forwards, just faster.
    target_actions = agent.target_corrections(np.stack([m.cir for m in ms]))
    rewards, actor_losses, critic_losses = [], [], []

    for t, m in enumerate(ms):
        is_train = t < n_train
        if is_train:
            eps = epsilon(agent.global_step, cfg)
            if agent.rng.random() < eps:
                action = float(agent.rng.uniform(-ACTION_BOUND_MM, ACTION_BOUND_MM))
            else:
                action = float(target_actions[t])
        else:
            action = float(target_actions[t])
        corrected = m.measured_range - action

        # The filter pipeline always consumes the target actor's correction;
        # explored actions are scored against it but never pollute the EKF.
        if t > 0:
            dt = m.timestamp - ms[t - 1].timestamp
            if dt > 0:
                ekf_state = ekf_predict(ekf_state, dt, ekf_cfg)
        anchor = data.anchors[m.anchor_id]
        try:
            ekf_state, p_ekf = ekf_update(
                ekf_state,
                m.measured_range - float(target_actions[t]),
                anchor,
                data.tag_height,
                ekf_cfg,
            )
        except SingularGeometry:
            p_ekf = ekf_state.x[:2].copy()

        smoothed = buffer.push(
            BufferEntry(
                p_ekf=p_ekf,
                corrected_range=corrected,
                cir=m.cir,
                executed_correction=action,
                anchor_id=m.anchor_id,
                tag=("train" if is_train else "val"),
            )
        )
        if smoothed is not None and smoothed.tag == "train":
            smoothed_range = position_to_range(
                smoothed.p_avg, data.anchors[smoothed.anchor_id], data.tag_height
            )
            reward = compute_reward(
                smoothed.corrected_range, smoothed_range, cfg.reward_floor_mm
            )
            rewards.append(reward)
            agent.replay.push(smoothed.cir, smoothed.executed_correction, reward)

        if is_train:
            agent.global_step += 1
            if (
                agent.global_step % cfg.train_every_steps == 0
                and len(agent.replay) >= cfg.batch_size
            ):
                for _ in range(cfg.updates_per_train_step):
                    cl, al = agent.update_networks()
                    critic_losses.append(cl)
                    actor_losses.append(al)
            if agent.global_step % cfg.target_update_every_steps == 0:
                agent.soft_update_targets()
                if agent.released and t + 1 < len(ms):
                    rest = np.stack([mm.cir for mm in ms[t + 1 :]])
                    target_actions[t + 1 :] = agent.target_corrections(rest)

    reward_mean = float(np.mean(rewards)) if rewards else 0.0
    actor_loss_mean = float(np.mean(actor_losses)) if actor_losses else float("nan")
    critic_loss_mean = float(np.mean(critic_losses)) if critic_losses else float("nan")
    return reward_mean, actor_loss_mean, critic_loss_mean, ekf_state


def train(
    agent: CorrectionAgent,
    data: TrainingData,
    ekf_cfg: EkfConfig,
    n_episodes: int,
    on_episode_end=None,
) -> list:
    """Run n_episodes of self-supervised training; returns per-episode metrics.

    Validation MAE is measured with evaluation metadata after each
    episode (reporting only; nothing flows back into training). The
    scheduler watches the actor's mean loss and, at the first plateau,
    cuts the learning rate and releases the target actor for soft
    updates (latched).
    """
    cfg = agent.cfg
    metrics = []
    n_train = int(round(len(data.measurements) * cfg.train_fraction))
    val = data.measurements[n_train:]
    ekf_state = None
    for _ in range(n_episodes):
        if ekf_cfg.reset_between_episodes:
            ekf_state = None
        reward_mean, actor_loss, _critic_loss, ekf_state = run_training_episode(
            agent, data, ekf_cfg, ekf_state
        )
        if np.isfinite(actor_loss):
            out = agent.actor_sched.step(actor_loss)
            agent.critic_sched.step(actor_loss)
            if out["release_target_actor"]:
                agent.released = True
        if cfg.compute_val_metrics and val:
            val_mae, val_mae_nlos = _validation_stats(agent, val)
        else:
            val_mae, val_mae_nlos = float("nan"), float("nan")
        row = EpisodeMetrics(
            episode=agent.episode,
            train_reward_mean=reward_mean,
            val_mae_mm=val_mae,
            val_mae_nlos_mm=val_mae_nlos,
            epsilon=float(epsilon(agent.global_step, cfg)),
            lr_actor=agent.actor_sched.lr,
            lr_critic=agent.critic_sched.lr,
            target_actor_released=agent.released,
        )
        metrics.append(row)
        agent.episode += 1
        if on_episode_end is not None:
            on_episode_end(agent, row)
    return metrics


def reset_for_new_environment(agent: CorrectionAgent, epsilon_max: float | None = None):
    """Adaptation reset: restore initial learning rates and re-raise
    exploration; learned weights and the release latch are kept."""
    agent.actor_sched.reset_lr(agent.cfg.lr_actor)
    lr_critic = agent.cfg.lr_critic
    if (agent.cfg.lr_critic_after_warmup is not None
            and agent.update_count > agent.cfg.actor_warmup_updates):
        lr_critic = agent.cfg.lr_critic_after_warmup
    agent.critic_sched.reset_lr(lr_critic)
    if epsilon_max is not None:
        agent.cfg.epsilon_max = epsilon_max
    agent.global_step = 0


# -- checkpointing -------------------------------------------------------


def save_checkpoint(agent: CorrectionAgent, path):
    state = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(agent.cfg),
        "seed": agent.seed,
        "actor": agent.actor.state_dict(),
        "critic": agent.critic.state_dict(),
        "target_actor": agent.target_actor.state_dict(),
        "target_critic": agent.target_critic.state_dict(),
        "actor_optim": agent.actor_optim.state_dict(),
        "critic_optim": agent.critic_optim.state_dict(),
        "actor_sched": agent.actor_sched.state_dict(),
        "critic_sched": agent.critic_sched.state_dict(),
        "lr_actor_now": agent.actor_sched.lr,
        "lr_critic_now": agent.critic_sched.lr,
        "replay": agent.replay.state_dict(),
        "update_count": agent.update_count,
        "global_step": agent.global_step,
        "episode": agent.episode,
        "released": agent.released,
        "target_actor_is_zero": agent.target_actor_is_zero,
        "np_rng": agent.rng.bit_generator.state,
        "torch_rng": torch.get_rng_state(),
    }
    torch.save(state, path)


def load_checkpoint(path) -> CorrectionAgent:
    try:
        state = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CorruptFile(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(state, dict) or "version" not in state:
        raise CorruptFile(f"not a checkpoint file: {path}")
    if state["version"] != CHECKPOINT_VERSION:
        raise VersionMismatch(
            f"checkpoint version {state['version']} != {CHECKPOINT_VERSION}"
        )
    cfg = AgentConfig(**state["config"])
    agent = CorrectionAgent(cfg, seed=state["seed"])
    agent.actor.load_state_dict(state["actor"])
    agent.critic.load_state_dict(state["critic"])
    agent.target_actor.load_state_dict(state["target_actor"])
    agent.target_critic.load_state_dict(state["target_critic"])
    agent.actor_optim.load_state_dict(state["actor_optim"])
    agent.critic_optim.load_state_dict(state["critic_optim"])
    agent.actor_sched.load_state_dict(state["actor_sched"])
    agent.critic_sched.load_state_dict(state["critic_sched"])
    agent.actor_sched.reset_lr(state["lr_actor_now"])
    agent.critic_sched.reset_lr(state["lr_critic_now"])
    agent.actor_sched.load_state_dict(state["actor_sched"])
    agent.critic_sched.load_state_dict(state["critic_sched"])
    agent.replay.load_state_dict(state["replay"])
    agent.update_count = state.get("update_count", 0)
    agent.global_step = state["global_step"]
    agent.episode = state["episode"]
    agent.released = state["released"]
    agent.target_actor_is_zero = state["target_actor_is_zero"]
    agent.rng.bit_generator.state = state["np_rng"]
    torch.set_rng_state(state["torch_rng"])
    return agent
