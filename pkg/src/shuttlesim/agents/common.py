"""Shared trainer machinery: config, rollout collection, GAE, reports."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from ..core import PlayerId, decode_action
from ..env import EnvConfig, Policy, RallyEnv, ScoreRule
from ..evaluate import run_matches
from .nets import Net, log_softmax
from .policies import MLPParams, MLPPolicy, _sample_from


@dataclass
class TrainConfig:
    algorithm: str = "ppo"
    total_steps: int = 60_000
    lr: float = 3e-3
    gamma: float = 0.99
    gae_lambda: float = 0.95
    rollout_length: int = 512
    minibatch_size: int = 256
    epochs: int = 4
    clip_eps: float = 0.2
    entropy_coef: float = 0.01
    value_clip: Optional[float] = None
    hidden: tuple = (128, 128)
    optimizer: str = "adam"
    momentum: float = 0.9
    # sac
    buffer_size: int = 50_000
    batch_size: int = 64
    update_every: int = 4
    warmup_steps: int = 1_000
    tau: float = 0.01
    target_entropy: Optional[float] = None
    lr_temp: float = 3e-3
    # evaluation
    eval_every: int = 10_000
    eval_games: int = 200
    eval_rule: ScoreRule = field(default_factory=ScoreRule)
    eval_greedy: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be > 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["eval_rule"] = self.eval_rule.to_dict()
        return d


@dataclass
class TrainingReport:
    algorithm: str
    seed: int
    config: dict
    curve: list = field(default_factory=list)  # (env_step, eval win rate)
    losses: list = field(default_factory=list)
    final_win_rate: float = 0.0
    env_steps: int = 0

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "config": self.config,
            "curve": self.curve,
            "losses": self.losses,
            "final_win_rate": self.final_win_rate,
            "env_steps": self.env_steps,
        }

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")
        with open(path.with_suffix(".csv"), "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "eval_win_rate"])
            writer.writerows(self.curve)


EnvFactory = Callable[[int], RallyEnv]


def derive_seeds(seed: int, n: int) -> list[int]:
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(n)]


def init_params(
    obs_dim: int,
    n_actions: int,
    algorithm: str,
    hidden: tuple,
    rng: np.random.Generator,
    with_critic: bool = True,
    with_q: bool = False,
    config_hash: str = "",
) -> MLPParams:
    actor = Net.init((obs_dim, *hidden, n_actions), rng)
    critic = Net.init((obs_dim, *hidden, 1), rng) if with_critic else None
    q1 = q2 = q1_t = q2_t = None
    if with_q:
        q1 = Net.init((obs_dim, *hidden, n_actions), rng)
        q2 = Net.init((obs_dim, *hidden, n_actions), rng)
        q1_t, q2_t = q1.copy(), q2.copy()
    return MLPParams(
        obs_dim=obs_dim,
        n_actions=n_actions,
        algorithm=algorithm,
        actor=actor,
        critic=critic,
        q1=q1,
        q2=q2,
        q1_target=q1_t,
        q2_target=q2_t,
        config_hash=config_hash,
    )


@dataclass
class Rollout:
    obs: np.ndarray
    actions: np.ndarray
    logp: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    values: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray


class RolloutCollector:
    """Steps a single-agent env with the current actor, segment by segment."""

    def __init__(self, env: RallyEnv, params: MLPParams, rng: np.random.Generator):
        self.env = env
        self.params = params
        self.rng = rng
        self.obs_vec = env.reset().feature_vec
        self.total_steps = 0

    def _policy_step(self) -> tuple[int, float, float]:
        x = self.obs_vec[None, :]
        logits, _ = self.params.actor.forward(x)
        logp = log_softmax(logits, self.params.action_mask[None, :])[0]
        action = _sample_from(np.exp(logp), self.rng)
        value = 0.0
        if self.params.critic is not None:
            value = float(self.params.critic.forward(x)[0][0, 0])
        return action, float(logp[action]), value

    def collect(self, n_steps: int, gamma: float, lam: float) -> Rollout:
        obs_dim = self.params.obs_dim
        obs = np.empty((n_steps, obs_dim))
        actions = np.empty(n_steps, dtype=np.int64)
        logps = np.empty(n_steps)
        rewards = np.empty(n_steps)
        dones = np.empty(n_steps)
        values = np.empty(n_steps)

        for t in range(n_steps):
            obs[t] = self.obs_vec
            action, logp, value = self._policy_step()
            result = self.env.step(decode_action(action))
            actions[t], logps[t], values[t] = action, logp, value
            rewards[t] = result.reward
            dones[t] = float(result.game_done)
            if result.game_done:
                self.obs_vec = self.env.reset().feature_vec
            else:
                self.obs_vec = result.observation.feature_vec
            self.total_steps += 1

        last_value = 0.0
        if self.params.critic is not None and dones[-1] == 0.0:
            last_value = float(self.params.critic.forward(self.obs_vec[None, :])[0][0, 0])

        advantages = np.zeros(n_steps)
        gae = 0.0
        next_value = last_value
        for t in range(n_steps - 1, -1, -1):
            nonterminal = 1.0 - dones[t]
            delta = rewards[t] + gamma * next_value * nonterminal - values[t]
            gae = delta + gamma * lam * nonterminal * gae
            advantages[t] = gae
            next_value = values[t]
        returns = advantages + values
        return Rollout(obs, actions, logps, rewards, dones, values, advantages, returns)


def evaluate_policy(
    params_or_policy,
    train_config: EnvConfig,
    opponent: Policy,
    n_games: int,
    seed: int,
    rule: Optional[ScoreRule] = None,
    greedy: bool = True,
) -> float:
    """Win rate of the agent against the opponent under the given score rule."""
    policy = (
        params_or_policy
        if not isinstance(params_or_policy, MLPParams)
        else MLPPolicy(params_or_policy, greedy=greedy)
    )
    cfg = replace(
        train_config,
        opponent_policy=None,
        score_rule=rule if rule is not None else ScoreRule.first_to(1),
        initial_server=PlayerId.P0,
    )
    if train_config.agent is PlayerId.P0:
        report = run_matches(policy, opponent, cfg, n=n_games, seed=seed)
        return report.win_rate
    report = run_matches(opponent, policy, cfg, n=n_games, seed=seed)
    return 1.0 - report.win_rate
