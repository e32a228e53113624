"""Policy handles: uniform random, behavioral cloning, and MLP actors,
with schema-versioned JSON checkpointing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..core import Action, N_ACTIONS, Observation, PlayerId, decode_action, enum_from_json, enum_to_json
from ..models import ContextKey, NextActionModel, context_of
from .nets import Net, log_softmax

POLICY_SCHEMA_VERSION = 1


class PolicyCheckpointError(ValueError):
    """Unreadable, schema-incompatible, or non-finite policy checkpoint."""


def full_action_mask() -> np.ndarray:
    """Legality mask over flat action indices.

    The flat encoding's 3-way exec code already excludes the contradictory
    backhand+around-head combination, so every index is legal; the mask stays
    in the sampling path so restricted action sets stay expressible.
    """
    return np.ones(N_ACTIONS, dtype=bool)


def _sample_from(dist: np.ndarray, rng: np.random.Generator) -> int:
    cum = np.cumsum(dist)
    idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return min(idx, len(dist) - 1)


@dataclass
class UniformRandomPolicy:
    kind: str = "uniform_random"

    def act(self, obs: Observation, rng: np.random.Generator) -> Action:
        return decode_action(int(rng.integers(N_ACTIONS)))

    def action_dist(self, obs: Observation) -> np.ndarray:
        return np.full(N_ACTIONS, 1.0 / N_ACTIONS)


@dataclass
class BCPolicy:
    """Mimics one player's logged tendencies via the next-action model."""

    model: NextActionModel
    player: PlayerId
    greedy: bool = False
    kind: str = "bc"

    def act(self, obs: Observation, rng: np.random.Generator) -> Action:
        ctx = context_of(obs.history)
        if self.greedy:
            dist = self.model.action_dist(self.player, ctx)
            return decode_action(int(np.argmax(dist)))  # argmax ties -> lowest index
        return self.model.sample(self.player, ctx, rng)

    def action_dist(self, obs: Observation) -> np.ndarray:
        return self.model.action_dist(self.player, context_of(obs.history))


def bc_policy(model: NextActionModel, player: PlayerId, greedy: bool = False) -> BCPolicy:
    return BCPolicy(model=model, player=player, greedy=greedy)


@dataclass
class MLPParams:
    """All networks of a trained agent; heads beyond the actor are optional."""

    obs_dim: int
    n_actions: int
    algorithm: str
    actor: Net
    critic: Optional[Net] = None
    q1: Optional[Net] = None
    q2: Optional[Net] = None
    q1_target: Optional[Net] = None
    q2_target: Optional[Net] = None
    log_temp: float = 0.0
    action_mask: np.ndarray = field(default_factory=full_action_mask)
    config_hash: str = ""

    def nets(self) -> dict:
        out = {"actor": self.actor}
        for name in ("critic", "q1", "q2", "q1_target", "q2_target"):
            net = getattr(self, name)
            if net is not None:
                out[name] = net
        return out

    def finite(self) -> bool:
        return all(net.finite() for net in self.nets().values()) and np.isfinite(self.log_temp)


def mlp_forward(params: MLPParams, x: np.ndarray):
    """Forward every head: (action log-probs, value, (q1, q2) if present)."""
    logits, _ = params.actor.forward(x)
    logp = log_softmax(logits, params.action_mask[None, :])
    value = None
    if params.critic is not None:
        value = params.critic.forward(x)[0][:, 0]
    qs = None
    if params.q1 is not None and params.q2 is not None:
        qs = (params.q1.forward(x)[0], params.q2.forward(x)[0])
    return logp, value, qs


@dataclass
class MLPPolicy:
    params: MLPParams
    greedy: bool = False
    kind: str = "mlp_actor"

    def act(self, obs: Observation, rng: np.random.Generator) -> Action:
        logp = mlp_forward(self.params, obs.feature_vec[None, :])[0][0]
        if self.greedy:
            return decode_action(int(np.argmax(logp)))
        return decode_action(_sample_from(np.exp(logp), rng))

    def action_dist(self, obs: Observation) -> np.ndarray:
        return np.exp(mlp_forward(self.params, obs.feature_vec[None, :])[0][0])


PolicyHandle = Union[UniformRandomPolicy, BCPolicy, MLPPolicy]


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=repr).encode()).hexdigest()[:16]


def _net_to_dict(net: Net) -> dict:
    return {
        "sizes": list(net.sizes),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def _net_from_dict(d: dict) -> Net:
    return Net(
        sizes=tuple(d["sizes"]),
        weights=[np.asarray(w, dtype=np.float64) for w in d["weights"]],
        biases=[np.asarray(b, dtype=np.float64) for b in d["biases"]],
    )


def save_policy(policy: PolicyHandle, path: Union[str, Path]) -> None:
    doc: dict = {"schema_version": POLICY_SCHEMA_VERSION, "kind": policy.kind}
    if isinstance(policy, UniformRandomPolicy):
        pass
    elif isinstance(policy, BCPolicy):
        doc["player"] = enum_to_json(policy.player)
        doc["greedy"] = policy.greedy
        doc["alpha"] = policy.model.alpha
        doc["counts"] = [
            [player, ctx_index, np.flatnonzero(vec).tolist(), vec[np.flatnonzero(vec)].tolist()]
            for (player, ctx_index), vec in sorted(policy.model.counts.items())
        ]
    elif isinstance(policy, MLPPolicy):
        params = policy.params
        if not params.finite():
            raise PolicyCheckpointError("refusing to save non-finite parameters")
        doc.update(
            {
                "obs_dim": params.obs_dim,
                "n_actions": params.n_actions,
                "algorithm": params.algorithm,
                "greedy": policy.greedy,
                "log_temp": params.log_temp,
                "config_hash": params.config_hash,
                "action_mask": params.action_mask.astype(int).tolist(),
                "nets": {name: _net_to_dict(net) for name, net in params.nets().items()},
            }
        )
    else:
        raise PolicyCheckpointError(f"cannot checkpoint policy of type {type(policy).__name__}")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def load_policy(path: Union[str, Path], obs_dim: Optional[int] = None) -> PolicyHandle:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != POLICY_SCHEMA_VERSION:
        raise PolicyCheckpointError(f"unsupported policy schema_version: {version!r}")
    kind = doc.get("kind")
    if kind == "uniform_random":
        return UniformRandomPolicy()
    if kind == "bc":
        model = NextActionModel(alpha=doc["alpha"])
        for player, ctx_index, indices, values in doc["counts"]:
            vec = np.zeros(N_ACTIONS, dtype=np.int64)
            vec[np.asarray(indices, dtype=np.int64)] = np.asarray(values, dtype=np.int64)
            model.counts[(player, ctx_index)] = vec
        return BCPolicy(
            model=model, player=enum_from_json(PlayerId, doc["player"]), greedy=doc["greedy"]
        )
    if kind == "mlp_actor":
        if obs_dim is not None and doc["obs_dim"] != obs_dim:
            raise PolicyCheckpointError(
                f"checkpoint obs_dim {doc['obs_dim']} != expected {obs_dim}"
            )
        nets = {name: _net_from_dict(d) for name, d in doc["nets"].items()}
        params = MLPParams(
            obs_dim=doc["obs_dim"],
            n_actions=doc["n_actions"],
            algorithm=doc["algorithm"],
            actor=nets["actor"],
            critic=nets.get("critic"),
            q1=nets.get("q1"),
            q2=nets.get("q2"),
            q1_target=nets.get("q1_target"),
            q2_target=nets.get("q2_target"),
            log_temp=doc["log_temp"],
            action_mask=np.asarray(doc["action_mask"], dtype=bool),
            config_hash=doc["config_hash"],
        )
        if not params.finite():
            raise PolicyCheckpointError(f"{path}: non-finite parameters in checkpoint")
        return MLPPolicy(params=params, greedy=doc["greedy"])
    raise PolicyCheckpointError(f"unknown policy kind: {kind!r}")
