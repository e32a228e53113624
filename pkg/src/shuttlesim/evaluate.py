"""Evaluation harness: match-batch win rates with uncertainty, the closed-form
rally-outcome oracle, top-k prediction reports, and shot-distribution analytics."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .core import N_ACTIONS, PlayerId, enum_to_json
from .data import RallyRecord
from .env import EnvConfig, Policy, RallyEnv, ScoreRule, play_game
from .models import ActionDistribution, PROJECTIONS, projection_size, topk_accuracy


def config_fingerprint(*parts) -> str:
    """Stable short hash over JSON-serializable provenance pieces."""
    blob = json.dumps(parts, sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class WinRateReport:
    n_games: int
    wins: int
    win_rate: float
    ci_halfwidth: float
    game_seeds: list[int]
    fingerprint: str
    score_rule: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_games": self.n_games,
            "wins": self.wins,
            "win_rate": self.win_rate,
            "ci_halfwidth": self.ci_halfwidth,
            "game_seeds": self.game_seeds,
            "fingerprint": self.fingerprint,
            "score_rule": self.score_rule,
        }

    def __str__(self) -> str:
        return (
            f"{self.wins}/{self.n_games} games won: "
            f"{100 * self.win_rate:.1f}% +/- {100 * self.ci_halfwidth:.1f}%"
        )


def normal_ci_halfwidth(p: float, n: int) -> float:
    """Half-width of the normal-approximation 95% interval for a proportion."""
    return 1.96 * math.sqrt(p * (1.0 - p) / n)


def derive_game_seeds(seed: int, n: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(child.generate_state(1)[0]) for child in ss.spawn(n)]


def run_matches(
    policy_a: Policy,
    policy_b: Policy,
    config: EnvConfig,
    n: int,
    seed: int = 0,
    fingerprint_parts: Optional[Sequence] = None,
) -> WinRateReport:
    """Play n independent games; report the win rate from policy_a's side."""
    if n < 1:
        raise ValueError("need at least one game")
    seeds = derive_game_seeds(seed, n)
    wins = 0
    for game_seed in seeds:
        record = play_game(policy_a, policy_b, config, seed=game_seed)
        wins += record.winner is PlayerId.P0
    p = wins / n
    return WinRateReport(
        n_games=n,
        wins=wins,
        win_rate=p,
        ci_halfwidth=normal_ci_halfwidth(p, n),
        game_seeds=seeds,
        fingerprint=config_fingerprint(
            list(fingerprint_parts) if fingerprint_parts else [],
            config.score_rule.to_dict(),
            seed,
            n,
        ),
        score_rule=config.score_rule.to_dict(),
    )


def analytic_rally_win_prob(
    p_s_a: float, p_r_a: float, p_s_b: float, p_r_b: float
) -> float:
    """Probability that A wins a rally A serves, under constant per-player
    success and return probabilities.

    Two-state absorbing chain (A to hit / B to hit): from A's hit, A loses with
    1-p_s_a, wins with p_s_a*(1-p_r_b), hands off with p_s_a*p_r_b; symmetric
    from B's hit.  Solved exactly from the 2x2 linear system.
    """
    for name, v in (("p_s_a", p_s_a), ("p_r_a", p_r_a), ("p_s_b", p_s_b), ("p_r_b", p_r_b)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {v}")
    hand_a = p_s_a * p_r_b  # A's shot comes back
    hand_b = p_s_b * p_r_a  # B's shot comes back
    denom = 1.0 - hand_a * hand_b
    if denom == 0.0:
        raise ValueError("non-absorbing chain: both handoff probabilities are 1")
    win_from_a = p_s_a * (1.0 - p_r_b)
    win_from_b = 1.0 - p_s_b  # B faults
    return (win_from_a + hand_a * win_from_b) / denom


def shot_distribution(
    policy: Policy,
    config: EnvConfig,
    n_rallies: int,
    seed: int = 0,
    opponent: Optional[Policy] = None,
) -> np.ndarray:
    """Empirical (shot type, target zone) frequencies of the policy's own
    choices over simulated rallies; entries sum to 1."""
    if n_rallies < 1:
        raise ValueError("need at least one rally")
    opponent = opponent if opponent is not None else config.opponent_policy or policy
    cfg = replace(config, opponent_policy=None, score_rule=ScoreRule.first_to(n_rallies + 1))
    env = RallyEnv(cfg)
    env.reset(seed=seed)
    hist = np.zeros((6, 9), dtype=np.float64)
    policies = {PlayerId.P0: policy, PlayerId.P1: opponent}
    while len(env.completed_rallies) < n_rallies:
        player = env.turn
        action = policies[player].act(env.observation(player), env.rng)
        if player is PlayerId.P0:
            hist[action.shot, action.target.zone_index] += 1
        env.step_two_agent(action)
    return hist / hist.sum()


@dataclass
class TopKReport:
    ks: list[int]
    projections: list[str]
    rows: dict  # player name -> {projection -> [accuracy per k]}

    def to_dict(self) -> dict:
        return {"ks": self.ks, "projections": self.projections, "rows": self.rows}

    def __str__(self) -> str:
        header = ["player"] + [
            f"{proj}@{k}" for proj in self.projections for k in self.ks
        ]
        lines = ["  ".join(f"{h:>16}" for h in header)]
        for player, by_proj in self.rows.items():
            cells = [player] + [
                f"{acc:.3f}" for proj in self.projections for acc in by_proj[proj]
            ]
            lines.append("  ".join(f"{c:>16}" for c in cells))
        return "\n".join(lines)


def topk_report(
    model: ActionDistribution,
    test: Sequence[RallyRecord],
    ks: Sequence[int] = (1, 2, 3, 4),
    projections: Sequence[str] = ("stroke_type", "landing_zone"),
) -> TopKReport:
    """Grid of top-k accuracies, one row per player."""
    if not ks:
        raise ValueError("ks must be nonempty")
    for proj in projections:
        if proj not in PROJECTIONS:
            raise ValueError(f"unknown projection: {proj!r}")
    rows = {}
    for player in PlayerId:
        rows[enum_to_json(player)] = {
            proj: [topk_accuracy(model, test, k, proj, player=player) for k in ks]
            for proj in projections
        }
    return TopKReport(ks=list(ks), projections=list(projections), rows=rows)
