"""Core tactical domain types shared by every other module.

Shots, court zones, factored actions with a flat 486-way integer encoding,
rally events, badminton score state, and the observation built from a
fixed-length window over the rally history.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import Any, Optional, Sequence

import numpy as np


class ShotType(IntEnum):
    SMASH = 0
    DROP = 1
    CLEAR = 2
    DRIVE = 3
    NET_SHOT = 4
    LIFT = 5


class Half(IntEnum):
    NEAR = 0
    FAR = 1


class HeightBand(IntEnum):
    LOW = 0
    MID = 1
    HIGH = 2


class PlayerId(IntEnum):
    P0 = 0
    P1 = 1

    @property
    def opponent(self) -> "PlayerId":
        return PlayerId(1 - self.value)


class ExecResult(IntEnum):
    VALID = 0
    FAULT = 1


class DefenseResult(IntEnum):
    RETURNED = 0
    MISSED = 1


N_SHOTS = len(ShotType)
N_ZONES = 9
N_HEIGHTS = len(HeightBand)
N_EXEC = 3
N_ACTIONS = N_SHOTS * N_ZONES * N_HEIGHTS * N_EXEC  # 486

# per history slot: shot + zone + height + exec + actor one-hots
SLOT_FEATURES = N_SHOTS + N_ZONES + N_HEIGHTS + N_EXEC + 2
# trailing block: normalized own/opponent score and serving flag
TAIL_FEATURES = 3
SCORE_NORM = 30.0  # rally scoring caps at 30 points


class DomainError(ValueError):
    """Violated invariant of a core domain type."""


def enum_to_json(e: IntEnum) -> str:
    return e.name.lower()


def enum_from_json(cls: type, name: str) -> Any:
    try:
        return cls[name.upper()]
    except KeyError:
        raise DomainError(f"unknown {cls.__name__} value: {name!r}") from None


@dataclass(frozen=True)
class CourtZone:
    """One cell of the 3x3 grid covering a court half.

    Rows run net-side (0) to baseline (2); columns run left (0) to right (2)
    from the hitter's perspective.
    """

    half: Half
    row: int
    col: int

    def __post_init__(self) -> None:
        if not (0 <= self.row <= 2 and 0 <= self.col <= 2):
            raise DomainError(f"zone row/col out of range: ({self.row}, {self.col})")

    @property
    def zone_index(self) -> int:
        return self.row * 3 + self.col

    @classmethod
    def from_index(cls, index: int, half: Half = Half.FAR) -> "CourtZone":
        if not 0 <= index < N_ZONES:
            raise DomainError(f"zone index out of range: {index}")
        return cls(half=half, row=index // 3, col=index % 3)

    def mirror(self) -> "CourtZone":
        """Left-right court symmetry: swaps columns 0 and 2, keeps the row."""
        return CourtZone(half=self.half, row=self.row, col=2 - self.col)

    def to_dict(self) -> dict:
        return {"half": enum_to_json(self.half), "row": self.row, "col": self.col}

    @classmethod
    def from_dict(cls, d: dict) -> "CourtZone":
        return cls(half=enum_from_json(Half, d["half"]), row=d["row"], col=d["col"])


@dataclass(frozen=True)
class ExecAttrs:
    """Optional stroke execution attributes; the two grips exclude each other."""

    backhand: bool = False
    around_head: bool = False

    def __post_init__(self) -> None:
        if self.backhand and self.around_head:
            raise DomainError("backhand and around_head are mutually exclusive")

    @property
    def code(self) -> int:
        if self.backhand:
            return 1
        if self.around_head:
            return 2
        return 0

    @classmethod
    def from_code(cls, code: int) -> "ExecAttrs":
        if code == 0:
            return cls()
        if code == 1:
            return cls(backhand=True)
        if code == 2:
            return cls(around_head=True)
        raise DomainError(f"exec code out of range: {code}")

    def to_json(self) -> str:
        return ("none", "backhand", "around_head")[self.code]

    @classmethod
    def from_json(cls, name: str) -> "ExecAttrs":
        codes = {"none": 0, "backhand": 1, "around_head": 2}
        if name not in codes:
            raise DomainError(f"unknown exec attribute: {name!r}")
        return cls.from_code(codes[name])


@dataclass(frozen=True)
class Action:
    """A factored tactical choice: what to hit, where, how high, which grip.

    The target zone always lies in the opponent's half, indexed from the
    hitter's perspective.
    """

    shot: ShotType
    target: CourtZone
    height: HeightBand
    exec: ExecAttrs = field(default_factory=ExecAttrs)

    def __post_init__(self) -> None:
        if self.target.half is not Half.FAR:
            raise DomainError("action target must lie in the opponent's half")

    @classmethod
    def make(
        cls,
        shot: ShotType,
        zone_index: int,
        height: HeightBand,
        exec_code: int = 0,
    ) -> "Action":
        return cls(
            shot=shot,
            target=CourtZone.from_index(zone_index),
            height=height,
            exec=ExecAttrs.from_code(exec_code),
        )

    def to_dict(self) -> dict:
        return {
            "shot": enum_to_json(self.shot),
            "target": self.target.zone_index,
            "height": enum_to_json(self.height),
            "exec": self.exec.to_json(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Action":
        return cls(
            shot=enum_from_json(ShotType, d["shot"]),
            target=CourtZone.from_index(d["target"]),
            height=enum_from_json(HeightBand, d["height"]),
            exec=ExecAttrs.from_json(d["exec"]),
        )


def encode_action(a: Action) -> int:
    """Flat index of an action: ((shot*9 + zone)*3 + height)*3 + exec_code."""
    return ((a.shot * N_ZONES + a.target.zone_index) * N_HEIGHTS + a.height) * N_EXEC + a.exec.code


def decode_action(idx: int) -> Action:
    """Inverse of :func:`encode_action` over the full 0..485 range."""
    if not 0 <= idx < N_ACTIONS:
        raise DomainError(f"action index out of range: {idx}")
    exec_code = idx % N_EXEC
    idx //= N_EXEC
    height = HeightBand(idx % N_HEIGHTS)
    idx //= N_HEIGHTS
    zone = idx % N_ZONES
    shot = ShotType(idx // N_ZONES)
    return Action.make(shot, zone, height, exec_code)


@dataclass(frozen=True)
class RallyEvent:
    """One resolved shot: who hit what, whether it was valid, whether it came back."""

    actor: PlayerId
    action: Action
    exec_result: ExecResult
    defense_result: Optional[DefenseResult] = None

    def __post_init__(self) -> None:
        if (self.exec_result is ExecResult.VALID) != (self.defense_result is not None):
            raise DomainError("defense_result must be present iff exec_result is valid")

    @property
    def terminal(self) -> bool:
        return self.exec_result is ExecResult.FAULT or self.defense_result is DefenseResult.MISSED

    @property
    def rally_winner(self) -> Optional[PlayerId]:
        if self.exec_result is ExecResult.FAULT:
            return self.actor.opponent
        if self.defense_result is DefenseResult.MISSED:
            return self.actor
        return None

    def to_dict(self) -> dict:
        return {
            "actor": enum_to_json(self.actor),
            "action": self.action.to_dict(),
            "exec_result": enum_to_json(self.exec_result),
            "defense_result": (
                None if self.defense_result is None else enum_to_json(self.defense_result)
            ),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RallyEvent":
        return cls(
            actor=enum_from_json(PlayerId, d["actor"]),
            action=Action.from_dict(d["action"]),
            exec_result=enum_from_json(ExecResult, d["exec_result"]),
            defense_result=(
                None
                if d.get("defense_result") is None
                else enum_from_json(DefenseResult, d["defense_result"])
            ),
        )


@dataclass(frozen=True)
class ScoreState:
    """Running game score under rally scoring; the rally winner serves next."""

    points: tuple[int, int] = (0, 0)
    server: PlayerId = PlayerId.P0
    game_over: bool = False
    winner: Optional[PlayerId] = None

    def points_of(self, player: PlayerId) -> int:
        return self.points[player]

    def to_dict(self) -> dict:
        return {
            "points": list(self.points),
            "server": enum_to_json(self.server),
            "game_over": self.game_over,
            "winner": None if self.winner is None else enum_to_json(self.winner),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreState":
        return cls(
            points=(d["points"][0], d["points"][1]),
            server=enum_from_json(PlayerId, d["server"]),
            game_over=d["game_over"],
            winner=None if d.get("winner") is None else enum_from_json(PlayerId, d["winner"]),
        )


@dataclass(frozen=True)
class Observation:
    """What a player sees before acting: recent rally events plus the score.

    ``history`` holds the last (up to K) events in raw, game-absolute form,
    most recent last.  ``feature_vec`` re-expresses them relative to the
    viewer: zones of opponent shots are mirrored so left/right is always the
    viewer's own left/right.
    """

    history: tuple[RallyEvent, ...]
    k: int
    viewer: PlayerId
    score_self: int
    score_opp: int
    serving: bool

    @cached_property
    def feature_vec(self) -> np.ndarray:
        vec = np.zeros(self.k * SLOT_FEATURES + TAIL_FEATURES, dtype=np.float64)
        pad = self.k - len(self.history)
        for slot, event in enumerate(self.history):
            base = (pad + slot) * SLOT_FEATURES
            action = event.action
            zone = action.target if event.actor == self.viewer else action.target.mirror()
            vec[base + action.shot] = 1.0
            vec[base + N_SHOTS + zone.zone_index] = 1.0
            vec[base + N_SHOTS + N_ZONES + action.height] = 1.0
            vec[base + N_SHOTS + N_ZONES + N_HEIGHTS + action.exec.code] = 1.0
            actor_slot = 0 if event.actor == self.viewer else 1
            vec[base + N_SHOTS + N_ZONES + N_HEIGHTS + N_EXEC + actor_slot] = 1.0
        vec[-3] = self.score_self / SCORE_NORM
        vec[-2] = self.score_opp / SCORE_NORM
        vec[-1] = 1.0 if self.serving else 0.0
        return vec


def observation_dim(k: int) -> int:
    return k * SLOT_FEATURES + TAIL_FEATURES


def build_observation(
    events: Sequence[RallyEvent],
    score: ScoreState,
    viewer: PlayerId,
    k: int = 4,
    observe_score: bool = True,
) -> Observation:
    """Build the viewer's observation from a rally prefix and the score.

    With ``observe_score`` off the score block is zeroed (the serving flag is
    kept: it is part of the rally situation, not the scoreboard).
    """
    if k < 1:
        raise DomainError(f"history window must be >= 1, got {k}")
    window = tuple(events[-k:])
    return Observation(
        history=window,
        k=k,
        viewer=viewer,
        score_self=score.points_of(viewer) if observe_score else 0,
        score_opp=score.points_of(viewer.opponent) if observe_score else 0,
        serving=score.server == viewer,
    )
