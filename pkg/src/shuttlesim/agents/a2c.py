"""Advantage actor-critic over rollout segments."""

from __future__ import annotations

import numpy as np

from .common import (
    EnvFactory,
    RolloutCollector,
    TrainConfig,
    TrainingReport,
    derive_seeds,
    evaluate_policy,
    init_params,
)
from .nets import actor_loss_a2c, check_divergence, make_optimizer, value_loss
from .policies import MLPPolicy, config_hash


def train_a2c(env_factory: EnvFactory, config: TrainConfig) -> tuple[MLPPolicy, TrainingReport]:
    env_seed, net_seed, sample_seed, eval_seed = derive_seeds(config.seed, 4)
    env = env_factory(env_seed)
    rng = np.random.default_rng(sample_seed)
    params = init_params(
        obs_dim=env.observation(env.config.agent).feature_vec.shape[0],
        n_actions=486,
        algorithm="a2c",
        hidden=config.hidden,
        rng=np.random.default_rng(net_seed),
        config_hash=config_hash(config.to_dict()),
    )
    actor_opt = make_optimizer(config.optimizer, config.lr, config.momentum)
    critic_opt = make_optimizer(config.optimizer, config.lr, config.momentum)
    collector = RolloutCollector(env, params, rng)
    report = TrainingReport(algorithm="a2c", seed=config.seed, config=config.to_dict())
    opponent = env.config.opponent_policy
    next_eval = 0

    while collector.total_steps < config.total_steps:
        rollout = collector.collect(config.rollout_length, config.gamma, config.gae_lambda)
        adv = rollout.advantages
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

        pg, actor_grads, diag = actor_loss_a2c(
            params.actor, rollout.obs, rollout.actions, adv,
            entropy_coef=config.entropy_coef, mask=params.action_mask[None, :],
        )
        check_divergence(diag["logits"])
        actor_opt.step(params.actor, actor_grads, "actor")

        vloss, critic_grads, _ = value_loss(params.critic, rollout.obs, rollout.returns)
        critic_opt.step(params.critic, critic_grads, "critic")

        report.losses.append(
            {
                "step": collector.total_steps,
                "policy_loss": float(pg),
                "value_loss": float(vloss),
                "entropy": float(diag["entropy"]),
            }
        )
        if collector.total_steps >= next_eval:
            win = evaluate_policy(
                params, env.config, opponent, config.eval_games, eval_seed,
                rule=config.eval_rule, greedy=config.eval_greedy,
            )
            report.curve.append((collector.total_steps, win))
            next_eval += config.eval_every

    report.final_win_rate = evaluate_policy(
        params, env.config, opponent, config.eval_games, eval_seed,
        rule=config.eval_rule, greedy=config.eval_greedy,
    )
    report.curve.append((collector.total_steps, report.final_win_rate))
    report.env_steps = collector.total_steps
    return MLPPolicy(params, greedy=config.eval_greedy), report
