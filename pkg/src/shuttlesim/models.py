"""Transition and next-action models fitted from rally logs.

All three are Laplace-smoothed conditional count tables keyed by a
discretized context: the most recent incoming shot (type, height, target
row) or a dedicated serve context.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence, Union

import numpy as np

from .core import (
    Action,
    DefenseResult,
    ExecResult,
    HeightBand,
    N_ACTIONS,
    PlayerId,
    RallyEvent,
    ShotType,
    decode_action,
    encode_action,
    enum_from_json,
    enum_to_json,
)
from .data import RallyRecord

CHECKPOINT_SCHEMA_VERSION = 1

#: serve context plus 6 shots x 3 heights x 3 rows
N_CONTEXTS = 1 + 6 * 3 * 3

REDUCTIONS = ("drop_col", "full")
N_REDUCED_KEYS = {"drop_col": 6 * 3 * 3 * 3, "full": N_ACTIONS}


class ModelCheckpointError(ValueError):
    """Unreadable or schema-incompatible model checkpoint."""


@dataclass(frozen=True)
class ContextKey:
    """Discretized tactical context: the incoming shot being answered, or serve."""

    serving: bool
    prev_shot: Optional[ShotType] = None
    prev_height: Optional[HeightBand] = None
    prev_zone_row: Optional[int] = None

    def __post_init__(self) -> None:
        absent = self.prev_shot is None and self.prev_height is None and self.prev_zone_row is None
        if self.serving != absent:
            raise ValueError("serve context must have no incoming-shot fields, and vice versa")

    @classmethod
    def serve(cls) -> "ContextKey":
        return cls(serving=True)

    @classmethod
    def from_incoming(cls, action: Action) -> "ContextKey":
        return cls(
            serving=False,
            prev_shot=action.shot,
            prev_height=action.height,
            prev_zone_row=action.target.row,
        )

    @property
    def index(self) -> int:
        if self.serving:
            return 0
        return 1 + (self.prev_shot * 3 + self.prev_height) * 3 + self.prev_zone_row

    def to_dict(self) -> dict:
        if self.serving:
            return {"serving": True}
        return {
            "serving": False,
            "prev_shot": enum_to_json(self.prev_shot),
            "prev_height": enum_to_json(self.prev_height),
            "prev_zone_row": self.prev_zone_row,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ContextKey":
        if d["serving"]:
            return cls.serve()
        return cls(
            serving=False,
            prev_shot=enum_from_json(ShotType, d["prev_shot"]),
            prev_height=enum_from_json(HeightBand, d["prev_height"]),
            prev_zone_row=d["prev_zone_row"],
        )

    @classmethod
    def from_index(cls, index: int) -> "ContextKey":
        if index == 0:
            return cls.serve()
        index -= 1
        row = index % 3
        index //= 3
        height = HeightBand(index % 3)
        shot = ShotType(index // 3)
        return cls(serving=False, prev_shot=shot, prev_height=height, prev_zone_row=row)


def context_of(events: Sequence[RallyEvent]) -> ContextKey:
    """Context of the player about to act after the given rally prefix."""
    if not events:
        return ContextKey.serve()
    return ContextKey.from_incoming(events[-1].action)


def reduced_action_key(a: Action, reduction: str = "drop_col") -> int:
    """Key an action for the success/return tables.

    ``drop_col`` keeps (shot, target row, height, exec) and ignores the
    target column, shrinking the key space from 486 to 162.
    """
    if reduction == "drop_col":
        return ((a.shot * 3 + a.target.row) * 3 + a.height) * 3 + a.exec.code
    if reduction == "full":
        return encode_action(a)
    raise ValueError(f"unknown action reduction: {reduction!r}")


class TransitionModel(Protocol):
    """Anything that maps (context, action) to a probability."""

    def prob(self, ctx: ContextKey, action: Action) -> float: ...


@dataclass
class ConstantModel:
    """Fixed probability regardless of context and action (test/ablation helper)."""

    p: float

    def prob(self, ctx: ContextKey, action: Action) -> float:
        return self.p


@dataclass
class _CountTable:
    """Laplace-smoothed Bernoulli table over (context index, action key) cells."""

    alpha: float
    reduction: str = "drop_col"
    cells: dict = field(default_factory=dict)  # (ctx_index, key) -> [hits, total]

    def observe(self, ctx: ContextKey, action: Action, hit: bool) -> None:
        cell = self.cells.setdefault((ctx.index, reduced_action_key(action, self.reduction)), [0, 0])
        cell[0] += int(hit)
        cell[1] += 1

    def prob(self, ctx: ContextKey, action: Action) -> float:
        hits, total = self.cells.get(
            (ctx.index, reduced_action_key(action, self.reduction)), (0, 0)
        )
        return (hits + self.alpha) / (total + 2.0 * self.alpha)

    def cell_counts(self, ctx: ContextKey, action: Action) -> tuple[int, int]:
        hits, total = self.cells.get(
            (ctx.index, reduced_action_key(action, self.reduction)), (0, 0)
        )
        return hits, total

    def to_rows(self) -> list:
        rows = []
        for (ctx_index, key), (hits, total) in sorted(self.cells.items()):
            rows.append([ContextKey.from_index(ctx_index).to_dict(), key, hits, total])
        return rows

    @classmethod
    def from_rows(cls, rows: Iterable, alpha: float, reduction: str) -> "_CountTable":
        table = cls(alpha=alpha, reduction=reduction)
        for ctx_dict, key, hits, total in rows:
            table.cells[(ContextKey.from_dict(ctx_dict).index, key)] = [hits, total]
        return table


@dataclass
class SuccessModel:
    """P(shot is executed without fault | hitter's context, action)."""

    table: _CountTable

    @property
    def alpha(self) -> float:
        return self.table.alpha

    def prob(self, ctx: ContextKey, action: Action) -> float:
        return self.table.prob(ctx, action)


@dataclass
class ReturnModel:
    """P(defender returns a valid shot | the shot they face)."""

    table: _CountTable

    @property
    def alpha(self) -> float:
        return self.table.alpha

    def prob(self, ctx: ContextKey, action: Action) -> float:
        return self.table.prob(ctx, action)


def fit_success(
    records: Sequence[RallyRecord],
    alpha: float = 1.0,
    player: Optional[PlayerId] = None,
    reduction: str = "drop_col",
) -> SuccessModel:
    """Count valid vs fault outcomes per (hitter context, action) cell.

    ``player`` restricts counting to that player's own shots (for per-player
    model pairs); the default pools both players.
    """
    if alpha <= 0:
        raise ValueError("smoothing alpha must be > 0")
    table = _CountTable(alpha=alpha, reduction=reduction)
    for rally in records:
        events: list[RallyEvent] = []
        for shot in rally.shots:
            if player is None or shot.actor == player:
                table.observe(context_of(events), shot.action, shot.exec_result is ExecResult.VALID)
            events.append(shot.to_event())
    return SuccessModel(table=table)


def fit_return(
    records: Sequence[RallyRecord],
    alpha: float = 1.0,
    player: Optional[PlayerId] = None,
    reduction: str = "drop_col",
) -> ReturnModel:
    """Count returned vs missed outcomes among valid shots.

    The context is the defender's: the shot they face.  ``player`` restricts
    counting to shots defended by that player.
    """
    if alpha <= 0:
        raise ValueError("smoothing alpha must be > 0")
    table = _CountTable(alpha=alpha, reduction=reduction)
    for rally in records:
        for shot in rally.shots:
            if shot.exec_result is not ExecResult.VALID:
                continue
            if player is not None and shot.actor.opponent != player:
                continue
            table.observe(
                ContextKey.from_incoming(shot.action),
                shot.action,
                shot.defense_result is DefenseResult.RETURNED,
            )
    return ReturnModel(table=table)


def p_succ(model: SuccessModel, ctx: ContextKey, action: Action) -> float:
    return model.prob(ctx, action)


def p_ret(model: ReturnModel, ctx: ContextKey, action: Action) -> float:
    return model.prob(ctx, action)


class ActionDistribution(Protocol):
    """Anything that yields a per-player action distribution given a context."""

    def action_dist(self, player: PlayerId, ctx: ContextKey) -> np.ndarray: ...


@dataclass
class NextActionModel:
    """Per-player smoothed categorical over all 486 actions, keyed by context."""

    alpha: float = 1.0
    counts: dict = field(default_factory=dict)  # (player, ctx_index) -> np.ndarray[486]
    _dist_cache: dict = field(default_factory=dict, repr=False)

    def observe(self, player: PlayerId, ctx: ContextKey, action: Action) -> None:
        key = (int(player), ctx.index)
        vec = self.counts.get(key)
        if vec is None:
            vec = np.zeros(N_ACTIONS, dtype=np.int64)
            self.counts[key] = vec
        vec[encode_action(action)] += 1
        self._dist_cache.pop(key, None)

    def action_dist(self, player: PlayerId, ctx: ContextKey) -> np.ndarray:
        key = (int(player), ctx.index)
        cached = self._dist_cache.get(key)
        if cached is not None:
            return cached[0]
        vec = self.counts.get(key)
        if vec is None:
            dist = np.full(N_ACTIONS, 1.0 / N_ACTIONS)
        else:
            dist = (vec + self.alpha) / (vec.sum() + N_ACTIONS * self.alpha)
        cum = np.cumsum(dist)
        self._dist_cache[key] = (dist, cum)
        return dist

    def sample(self, player: PlayerId, ctx: ContextKey, rng: np.random.Generator) -> Action:
        key = (int(player), ctx.index)
        if key not in self._dist_cache:
            self.action_dist(player, ctx)
        cum = self._dist_cache[key][1]
        idx = int(np.searchsorted(cum, rng.random(), side="right"))
        return decode_action(min(idx, N_ACTIONS - 1))


def fit_next_action(records: Sequence[RallyRecord], alpha: float = 1.0) -> NextActionModel:
    """Count, per player and context, which action was actually taken."""
    if alpha <= 0:
        raise ValueError("smoothing alpha must be > 0")
    model = NextActionModel(alpha=alpha)
    for rally in records:
        events: list[RallyEvent] = []
        for shot in rally.shots:
            model.observe(shot.actor, context_of(events), shot.action)
            events.append(shot.to_event())
    return model


def sample_next_action(
    model: NextActionModel, ctx: ContextKey, player: PlayerId, rng: np.random.Generator
) -> Action:
    return model.sample(player, ctx, rng)


PROJECTIONS = ("stroke_type", "landing_zone", "full_action")


def _project_dist(dist: np.ndarray, projection: str) -> np.ndarray:
    # flat index layout: ((shot*9 + zone)*3 + height)*3 + exec
    if projection == "full_action":
        return dist
    grid = dist.reshape(6, 9, 3, 3)
    if projection == "stroke_type":
        return grid.sum(axis=(1, 2, 3))
    if projection == "landing_zone":
        return grid.sum(axis=(0, 2, 3))
    raise ValueError(f"unknown projection: {projection!r}")


def _project_label(action: Action, projection: str) -> int:
    if projection == "full_action":
        return encode_action(action)
    if projection == "stroke_type":
        return int(action.shot)
    if projection == "landing_zone":
        return action.target.zone_index
    raise ValueError(f"unknown projection: {projection!r}")


def projection_size(projection: str) -> int:
    return {"stroke_type": 6, "landing_zone": 9, "full_action": N_ACTIONS}[projection]


def topk_accuracy(
    model: ActionDistribution,
    test: Sequence[RallyRecord],
    k: int,
    projection: str = "stroke_type",
    player: Optional[PlayerId] = None,
) -> float:
    """Fraction of test shots whose true projected label lands in the model's
    k most probable labels (ties broken by ascending label index)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not test:
        raise ValueError("empty test set")
    topk_cache: dict = {}
    hits = 0
    total = 0
    for rally in test:
        events: list[RallyEvent] = []
        for shot in rally.shots:
            ctx = context_of(events)
            events.append(shot.to_event())
            if player is not None and shot.actor != player:
                continue
            cache_key = (int(shot.actor), ctx.index)
            top = topk_cache.get(cache_key)
            if top is None:
                proj = _project_dist(model.action_dist(shot.actor, ctx), projection)
                # stable sort on -p keeps ascending label order among ties
                top = set(np.argsort(-proj, kind="stable")[:k].tolist())
                topk_cache[cache_key] = top
            hits += int(_project_label(shot.action, projection) in top)
            total += 1
    if total == 0:
        raise ValueError("no test shots for the requested player")
    return hits / total


def save_models(
    path: Union[str, Path],
    success: SuccessModel,
    returns: ReturnModel,
    next_action: NextActionModel,
) -> None:
    """Write all three tables into one schema-versioned JSON checkpoint."""
    doc = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "action_reduction": success.table.reduction,
        "success": {"alpha": success.alpha, "table": success.table.to_rows()},
        "return": {"alpha": returns.alpha, "table": returns.table.to_rows()},
        "next_action": {
            "alpha": next_action.alpha,
            "table": [
                [enum_to_json(PlayerId(player)), ContextKey.from_index(ctx_index).to_dict()]
                + [np.flatnonzero(vec).tolist(), vec[np.flatnonzero(vec)].tolist()]
                for (player, ctx_index), vec in sorted(next_action.counts.items())
            ],
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def load_models(path: Union[str, Path]) -> tuple[SuccessModel, ReturnModel, NextActionModel]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != CHECKPOINT_SCHEMA_VERSION:
        raise ModelCheckpointError(
            f"unsupported model checkpoint schema_version {version!r} "
            f"(expected {CHECKPOINT_SCHEMA_VERSION})"
        )
    reduction = doc["action_reduction"]
    success = SuccessModel(
        table=_CountTable.from_rows(doc["success"]["table"], doc["success"]["alpha"], reduction)
    )
    returns = ReturnModel(
        table=_CountTable.from_rows(doc["return"]["table"], doc["return"]["alpha"], reduction)
    )
    next_action = NextActionModel(alpha=doc["next_action"]["alpha"])
    for player_name, ctx_dict, indices, values in doc["next_action"]["table"]:
        vec = np.zeros(N_ACTIONS, dtype=np.int64)
        vec[np.asarray(indices, dtype=np.int64)] = np.asarray(values, dtype=np.int64)
        key = (int(enum_from_json(PlayerId, player_name)), ContextKey.from_dict(ctx_dict).index)
        next_action.counts[key] = vec
    return success, returns, next_action
