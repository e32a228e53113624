"""Discrete soft actor-critic: twin Q heads, closed-form soft state value,
polyak-averaged targets, and automatic temperature tuning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import N_ACTIONS, decode_action
from .common import (
    EnvFactory,
    TrainConfig,
    TrainingReport,
    derive_seeds,
    evaluate_policy,
    init_params,
)
from .nets import (
    check_divergence,
    log_softmax,
    make_optimizer,
    polyak_update,
    q_loss,
    sac_actor_loss,
    temperature_loss,
)
from .policies import MLPPolicy, _sample_from, config_hash


@dataclass
class ReplayBuffer:
    capacity: int
    obs_dim: int

    def __post_init__(self) -> None:
        self.obs = np.empty((self.capacity, self.obs_dim))
        self.actions = np.empty(self.capacity, dtype=np.int64)
        self.rewards = np.empty(self.capacity)
        self.next_obs = np.empty((self.capacity, self.obs_dim))
        self.dones = np.empty(self.capacity)
        self.size = 0
        self._cursor = 0

    def push(self, obs, action, reward, next_obs, done) -> None:
        i = self._cursor
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = done
        self._cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch_size)
        return (
            self.obs[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_obs[idx],
            self.dones[idx],
        )


def soft_state_value(params, obs: np.ndarray, temperature: float) -> np.ndarray:
    """V(s) = sum_a pi(a|s) (min_target_Q(s,a) - T log pi(a|s))."""
    logp = log_softmax(params.actor.forward(obs)[0], params.action_mask[None, :])
    p = np.exp(logp)
    q1 = params.q1_target.forward(obs)[0]
    q2 = params.q2_target.forward(obs)[0]
    min_q = np.minimum(q1, q2)
    ent_term = (p * np.where(np.isfinite(logp), logp, 0.0)).sum(axis=1)
    return (p * min_q).sum(axis=1) - temperature * ent_term


def train_sac(env_factory: EnvFactory, config: TrainConfig) -> tuple[MLPPolicy, TrainingReport]:
    env_seed, net_seed, sample_seed, eval_seed = derive_seeds(config.seed, 4)
    env = env_factory(env_seed)
    rng = np.random.default_rng(sample_seed)
    obs_dim = env.observation(env.config.agent).feature_vec.shape[0]
    params = init_params(
        obs_dim=obs_dim,
        n_actions=N_ACTIONS,
        algorithm="sac",
        hidden=config.hidden,
        rng=np.random.default_rng(net_seed),
        with_critic=False,
        with_q=True,
        config_hash=config_hash(config.to_dict()),
    )
    target_entropy = (
        config.target_entropy if config.target_entropy is not None else 0.4 * np.log(N_ACTIONS)
    )
    actor_opt = make_optimizer(config.optimizer, config.lr, config.momentum)
    q1_opt = make_optimizer(config.optimizer, config.lr, config.momentum)
    q2_opt = make_optimizer(config.optimizer, config.lr, config.momentum)
    buffer = ReplayBuffer(config.buffer_size, obs_dim)
    report = TrainingReport(algorithm="sac", seed=config.seed, config=config.to_dict())
    opponent = env.config.opponent_policy
    next_eval = 0

    obs_vec = env.reset().feature_vec
    for step in range(1, config.total_steps + 1):
        if step <= config.warmup_steps:
            action = int(rng.integers(N_ACTIONS))
        else:
            logp = log_softmax(
                params.actor.forward(obs_vec[None, :])[0], params.action_mask[None, :]
            )[0]
            action = _sample_from(np.exp(logp), rng)
        result = env.step(decode_action(action))
        next_vec = result.observation.feature_vec
        buffer.push(obs_vec, action, result.reward, next_vec, float(result.game_done))
        obs_vec = env.reset().feature_vec if result.game_done else next_vec

        if step > config.warmup_steps and step % config.update_every == 0:
            temperature = float(np.exp(params.log_temp))
            batch = buffer.sample(config.batch_size, rng)
            b_obs, b_act, b_rew, b_next, b_done = batch

            v_next = soft_state_value(params, b_next, temperature)
            targets = b_rew + config.gamma * (1.0 - b_done) * v_next

            l1, g1, _ = q_loss(params.q1, b_obs, b_act, targets)
            q1_opt.step(params.q1, g1, "q1")
            l2, g2, _ = q_loss(params.q2, b_obs, b_act, targets)
            q2_opt.step(params.q2, g2, "q2")

            min_q = np.minimum(params.q1.forward(b_obs)[0], params.q2.forward(b_obs)[0])
            pl, pg, diag = sac_actor_loss(
                params.actor, b_obs, min_q, temperature, mask=params.action_mask[None, :]
            )
            check_divergence(diag["logits"])
            actor_opt.step(params.actor, pg, "actor")

            logp = log_softmax(params.actor.forward(b_obs)[0], params.action_mask[None, :])
            p = np.exp(logp)
            entropy = -np.where(p > 0.0, p * logp, 0.0).sum(axis=1)
            _, dlog_temp = temperature_loss(params.log_temp, entropy, target_entropy)
            params.log_temp -= config.lr_temp * dlog_temp

            polyak_update(params.q1_target, params.q1, config.tau)
            polyak_update(params.q2_target, params.q2, config.tau)

            if step % (config.update_every * 50) == 0:
                report.losses.append(
                    {
                        "step": step,
                        "q1_loss": float(l1),
                        "q2_loss": float(l2),
                        "policy_loss": float(pl),
                        "entropy": float(entropy.mean()),
                        "temperature": temperature,
                    }
                )

        if step >= next_eval:
            win = evaluate_policy(
                params, env.config, opponent, config.eval_games, eval_seed,
                rule=config.eval_rule, greedy=config.eval_greedy,
            )
            report.curve.append((step, win))
            next_eval += config.eval_every

    report.final_win_rate = evaluate_policy(
        params, env.config, opponent, config.eval_games, eval_seed,
        rule=config.eval_rule, greedy=config.eval_greedy,
    )
    report.curve.append((config.total_steps, report.final_win_rate))
    report.env_steps = config.total_steps
    return MLPPolicy(params, greedy=config.eval_greedy), report
