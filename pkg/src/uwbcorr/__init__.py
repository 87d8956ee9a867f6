"""Self-supervised deep-RL correction of UWB ranging errors.

Library layout:

- geometry:  anchors, poses, ranges, evaluation-metadata firewall
- cir:       channel impulse responses, first-path detection, preprocessing
- simulator: warehouse ranging simulator (LOS/NLOS, trajectories, episodes)
- presets:   ready-made environments and trajectory plans
- datasets:  episode CSV serialization and manifests
- tracking:  range-only EKF, smoothing buffer, self-supervised reward
- nets:      actor / critic / supervised CNNs
- agent:     DDPG-style agent, training loop, checkpoints
- baselines: zero / supervised baselines and evaluation reports
- reports:   CSV, JSON and figure rendering
- config:    versioned experiment configuration
- cli:       command-line entry point
"""

from .agent import (
    AgentConfig,
    CorrectionAgent,
    ReplayMemory,
    TrainingData,
    load_checkpoint,
    run_training_episode,
    save_checkpoint,
    train,
)
from .baselines import EvalReport, SupervisedConfig, evaluate, train_supervised
from .cir import RawCir, detect_first_path, preprocess, simulate_cir
from .config import ExperimentConfig, load_config, save_config
from .geometry import Anchor, RangeMeasurement, TagPose
from .simulator import Environment, TrajectoryPlan, generate_episode
from .tracking import EkfConfig, SmoothingBuffer, compute_reward

__all__ = [
    "AgentConfig",
    "Anchor",
    "CorrectionAgent",
    "EkfConfig",
    "Environment",
    "EvalReport",
    "ExperimentConfig",
    "RangeMeasurement",
    "RawCir",
    "ReplayMemory",
    "SmoothingBuffer",
    "SupervisedConfig",
    "TagPose",
    "TrainingData",
    "TrajectoryPlan",
    "compute_reward",
    "detect_first_path",
    "evaluate",
    "generate_episode",
    "load_checkpoint",
    "load_config",
    "preprocess",
    "run_training_episode",
    "save_checkpoint",
    "save_config",
    "simulate_cir",
    "train",
    "train_supervised",
]

__version__ = "0.1.0"
