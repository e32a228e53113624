"""Synthetic match generator with known parametric ground-truth dynamics.

Stands in for private shot-level match annotations: logs are produced by the
same two-stage rally process the environment uses, driven by per-player
logistic models for shot success, defensive return, and action preference.
Because the generating probabilities are known exactly, fitted models can be
checked against them.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .core import (
    Action,
    N_ACTIONS,
    Observation,
    PlayerId,
    decode_action,
    encode_action,
    enum_from_json,
    enum_to_json,
)
from .data import RallyRecord
from .env import EnvConfig, PlayerModels, RallyEnv, ScoreRule
from .models import ContextKey, context_of

PROB_FLOOR = 0.01
PROB_CEIL = 0.99


def _squash(z: np.ndarray) -> np.ndarray:
    """Logistic response clamped away from 0 and 1 so rallies always terminate."""
    return PROB_FLOOR + (PROB_CEIL - PROB_FLOOR) / (1.0 + np.exp(-z))


@dataclass
class SuccessWeights:
    """Logistic weights for a player's own shot execution."""

    shot_bias: np.ndarray  # (6,)
    backhand_penalty: float
    around_head_penalty: float
    zone_difficulty: np.ndarray  # (9,), subtracted per target zone

    def logits(self) -> np.ndarray:
        z = np.zeros(N_ACTIONS)
        for idx in range(N_ACTIONS):
            a = decode_action(idx)
            z[idx] = (
                self.shot_bias[a.shot]
                - self.zone_difficulty[a.target.zone_index]
                - (self.backhand_penalty if a.exec.backhand else 0.0)
                - (self.around_head_penalty if a.exec.around_head else 0.0)
            )
        return z


@dataclass
class ReturnWeights:
    """Logistic weights for a player's ability to retrieve an incoming shot."""

    shot_bias: np.ndarray  # (6,), per incoming shot type
    height_mod: np.ndarray  # (3,)
    zone_mod: np.ndarray  # (9,)

    def logits(self) -> np.ndarray:
        z = np.zeros(N_ACTIONS)
        for idx in range(N_ACTIONS):
            a = decode_action(idx)
            z[idx] = (
                self.shot_bias[a.shot]
                + self.height_mod[a.height]
                + self.zone_mod[a.target.zone_index]
            )
        return z


@dataclass
class PreferenceWeights:
    """Softmax preference scores for what a player likes to play next."""

    serve_shot_bias: np.ndarray  # (6,)
    answer_matrix: np.ndarray  # (6, 6): incoming shot -> preferred reply shot
    zone_affinity: np.ndarray  # (9,)
    height_affinity: np.ndarray  # (3,)
    exec_affinity: np.ndarray  # (3,)

    def scores(self, ctx: ContextKey) -> np.ndarray:
        shot_term = (
            self.serve_shot_bias if ctx.serving else self.answer_matrix[ctx.prev_shot]
        )
        z = np.zeros(N_ACTIONS)
        for idx in range(N_ACTIONS):
            a = decode_action(idx)
            z[idx] = (
                shot_term[a.shot]
                + self.zone_affinity[a.target.zone_index]
                + self.height_affinity[a.height]
                + self.exec_affinity[a.exec.code]
            )
        return z


@dataclass
class PlayerGroundTruth:
    success: SuccessWeights
    ret: ReturnWeights
    preference: PreferenceWeights


def _weights_to_dict(player: PlayerGroundTruth) -> dict:
    return {
        "success": {
            "shot_bias": player.success.shot_bias.tolist(),
            "backhand_penalty": player.success.backhand_penalty,
            "around_head_penalty": player.success.around_head_penalty,
            "zone_difficulty": player.success.zone_difficulty.tolist(),
        },
        "return": {
            "shot_bias": player.ret.shot_bias.tolist(),
            "height_mod": player.ret.height_mod.tolist(),
            "zone_mod": player.ret.zone_mod.tolist(),
        },
        "preference": {
            "serve_shot_bias": player.preference.serve_shot_bias.tolist(),
            "answer_matrix": player.preference.answer_matrix.tolist(),
            "zone_affinity": player.preference.zone_affinity.tolist(),
            "height_affinity": player.preference.height_affinity.tolist(),
            "exec_affinity": player.preference.exec_affinity.tolist(),
        },
    }


def _weights_from_dict(d: dict) -> PlayerGroundTruth:
    arr = lambda x: np.asarray(x, dtype=np.float64)
    return PlayerGroundTruth(
        success=SuccessWeights(
            shot_bias=arr(d["success"]["shot_bias"]),
            backhand_penalty=d["success"]["backhand_penalty"],
            around_head_penalty=d["success"]["around_head_penalty"],
            zone_difficulty=arr(d["success"]["zone_difficulty"]),
        ),
        ret=ReturnWeights(
            shot_bias=arr(d["return"]["shot_bias"]),
            height_mod=arr(d["return"]["height_mod"]),
            zone_mod=arr(d["return"]["zone_mod"]),
        ),
        preference=PreferenceWeights(
            serve_shot_bias=arr(d["preference"]["serve_shot_bias"]),
            answer_matrix=arr(d["preference"]["answer_matrix"]),
            zone_affinity=arr(d["preference"]["zone_affinity"]),
            height_affinity=arr(d["preference"]["height_affinity"]),
            exec_affinity=arr(d["preference"]["exec_affinity"]),
        ),
    )


@dataclass
class GroundTruthConfig:
    """Everything the generator needs, exactly reproducible from (config, seed).

    Optional constant overrides replace the logistic probabilities wholesale;
    they exist so degenerate dynamics (certain fault, unreturnable shots) can
    be constructed for tests.
    """

    players: dict
    seed: int = 0
    success_override: Optional[float] = None
    return_override: Optional[float] = None
    _cache: dict = field(default_factory=dict, repr=False)

    # -- exact probabilities ----------------------------------------------------

    def success_probs(self, player: PlayerId) -> np.ndarray:
        key = ("succ", int(player))
        if key not in self._cache:
            if self.success_override is not None:
                probs = np.full(N_ACTIONS, float(self.success_override))
            else:
                probs = _squash(self.players[player].success.logits())
            self._cache[key] = probs
        return self._cache[key]

    def return_probs(self, player: PlayerId) -> np.ndarray:
        key = ("ret", int(player))
        if key not in self._cache:
            if self.return_override is not None:
                probs = np.full(N_ACTIONS, float(self.return_override))
            else:
                probs = _squash(self.players[player].ret.logits())
            self._cache[key] = probs
        return self._cache[key]

    def success_prob(self, player: PlayerId, action: Action) -> float:
        return float(self.success_probs(player)[encode_action(action)])

    def return_prob(self, player: PlayerId, action: Action) -> float:
        return float(self.return_probs(player)[encode_action(action)])

    def action_dist(self, player: PlayerId, ctx: ContextKey) -> np.ndarray:
        return self._dist_and_cum(player, ctx)[0]

    def _dist_and_cum(self, player: PlayerId, ctx: ContextKey) -> tuple[np.ndarray, np.ndarray]:
        key = ("dist", int(player), ctx.index)
        if key not in self._cache:
            scores = self.players[player].preference.scores(ctx)
            scores -= scores.max()
            dist = np.exp(scores)
            dist /= dist.sum()
            self._cache[key] = (dist, np.cumsum(dist))
        return self._cache[key]

    def sample_action(
        self, player: PlayerId, ctx: ContextKey, rng: np.random.Generator
    ) -> Action:
        cum = self._dist_and_cum(player, ctx)[1]
        idx = int(np.searchsorted(cum, rng.random(), side="right"))
        return decode_action(min(idx, N_ACTIONS - 1))

    # -- adapters into the environment --------------------------------------------

    def transition_models(self) -> dict:
        return {
            p: PlayerModels(
                success=_GroundTruthSuccess(self, p), ret=_GroundTruthReturn(self, p)
            )
            for p in PlayerId
        }

    def policy(self, player: PlayerId) -> "GroundTruthPolicy":
        return GroundTruthPolicy(self, player)

    # -- serialization ---------------------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "seed": self.seed,
            "players": {
                enum_to_json(p): _weights_to_dict(w) for p, w in sorted(self.players.items())
            },
        }
        if self.success_override is not None:
            d["success_override"] = self.success_override
        if self.return_override is not None:
            d["return_override"] = self.return_override
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruthConfig":
        return cls(
            players={
                enum_from_json(PlayerId, name): _weights_from_dict(w)
                for name, w in d["players"].items()
            },
            seed=d.get("seed", 0),
            success_override=d.get("success_override"),
            return_override=d.get("return_override"),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "GroundTruthConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


@dataclass
class _GroundTruthSuccess:
    cfg: GroundTruthConfig
    player: PlayerId

    def prob(self, ctx: ContextKey, action: Action) -> float:
        return self.cfg.success_prob(self.player, action)


@dataclass
class _GroundTruthReturn:
    cfg: GroundTruthConfig
    player: PlayerId

    def prob(self, ctx: ContextKey, action: Action) -> float:
        return self.cfg.return_prob(self.player, action)


@dataclass
class GroundTruthPolicy:
    """Plays according to the generator's own preference distribution."""

    cfg: GroundTruthConfig
    player: PlayerId

    def act(self, obs: Observation, rng: np.random.Generator) -> Action:
        return self.cfg.sample_action(self.player, context_of(obs.history), rng)


PRESET_NAMES = ("balanced", "attacker-favored")


def load_preset(name: str) -> GroundTruthConfig:
    """Load one of the named illustrative presets shipped with the package."""
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    resource = importlib.resources.files("shuttlesim.presets") / f"{name.replace('-', '_')}.json"
    return GroundTruthConfig.from_dict(json.loads(resource.read_text(encoding="utf-8")))


def synth_generate(
    cfg: GroundTruthConfig, n_rallies: int, seed: Optional[int] = None
) -> list[RallyRecord]:
    """Generate rallies by running the two-stage environment under the
    ground-truth dynamics; byte-identical for identical (cfg, n_rallies, seed)."""
    if n_rallies < 1:
        raise ValueError("n_rallies must be >= 1")
    seed = cfg.seed if seed is None else seed
    env = RallyEnv(
        EnvConfig(
            models=cfg.transition_models(),
            score_rule=ScoreRule.first_to(n_rallies + 1),
            seed=seed,
        )
    )
    policies = {p: cfg.policy(p) for p in PlayerId}
    while len(env.completed_rallies) < n_rallies:
        player = env.turn
        action = policies[player].act(env.observation(player), env.rng)
        env.step_two_agent(action)
    return env.rally_records(f"synth-{seed}")
