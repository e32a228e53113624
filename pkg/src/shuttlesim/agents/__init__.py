"""Policies and trainers: behavioral cloning plus A2C, PPO and discrete SAC
with hand-rolled backpropagation."""

from .a2c import train_a2c
from .common import TrainConfig, TrainingReport, evaluate_policy
from .nets import LOSSES, DivergenceError, Net, mlp_backward
from .policies import (
    BCPolicy,
    MLPParams,
    MLPPolicy,
    PolicyCheckpointError,
    PolicyHandle,
    UniformRandomPolicy,
    bc_policy,
    load_policy,
    mlp_forward,
    save_policy,
)
from .ppo import train_ppo
from .sac import train_sac

__all__ = [
    "BCPolicy",
    "DivergenceError",
    "LOSSES",
    "MLPParams",
    "MLPPolicy",
    "Net",
    "PolicyCheckpointError",
    "PolicyHandle",
    "TrainConfig",
    "TrainingReport",
    "UniformRandomPolicy",
    "bc_policy",
    "evaluate_policy",
    "load_policy",
    "mlp_backward",
    "mlp_forward",
    "save_policy",
    "train_a2c",
    "train_ppo",
    "train_sac",
]
