"""Shot-level rally-log schema: records, JSON-Lines IO, validation,
train/test splitting and summary statistics."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .core import (
    Action,
    CourtZone,
    DefenseResult,
    ExecResult,
    PlayerId,
    RallyEvent,
    enum_from_json,
    enum_to_json,
)


class RallyLogError(ValueError):
    """Unparseable or invalid rally-log content."""


@dataclass(frozen=True)
class ShotRecord:
    """One annotated stroke of a logged rally."""

    match_id: str
    rally_id: int
    shot_index: int
    actor: PlayerId
    action: Action
    exec_result: ExecResult
    defense_result: Optional[DefenseResult] = None
    position: Optional[CourtZone] = None  # annotation only, unused by the models

    def to_event(self) -> RallyEvent:
        return RallyEvent(
            actor=self.actor,
            action=self.action,
            exec_result=self.exec_result,
            defense_result=self.defense_result,
        )

    def to_dict(self) -> dict:
        d = {
            "match_id": self.match_id,
            "rally_id": self.rally_id,
            "shot_index": self.shot_index,
            "actor": enum_to_json(self.actor),
            "action": self.action.to_dict(),
            "exec_result": enum_to_json(self.exec_result),
            "defense_result": (
                None if self.defense_result is None else enum_to_json(self.defense_result)
            ),
        }
        if self.position is not None:
            d["position"] = self.position.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ShotRecord":
        return cls(
            match_id=d["match_id"],
            rally_id=d["rally_id"],
            shot_index=d["shot_index"],
            actor=enum_from_json(PlayerId, d["actor"]),
            action=Action.from_dict(d["action"]),
            exec_result=enum_from_json(ExecResult, d["exec_result"]),
            defense_result=(
                None
                if d.get("defense_result") is None
                else enum_from_json(DefenseResult, d["defense_result"])
            ),
            position=(
                None if d.get("position") is None else CourtZone.from_dict(d["position"])
            ),
        )


@dataclass(frozen=True)
class RallyRecord:
    """A complete logged rally: server, its shots in order, and the winner."""

    match_id: str
    rally_id: int
    server: PlayerId
    shots: tuple[ShotRecord, ...]
    winner: PlayerId

    def events(self) -> list[RallyEvent]:
        return [s.to_event() for s in self.shots]

    def to_dict(self) -> dict:
        return {
            "match_id": self.match_id,
            "rally_id": self.rally_id,
            "server": enum_to_json(self.server),
            "shots": [s.to_dict() for s in self.shots],
            "winner": enum_to_json(self.winner),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RallyRecord":
        return cls(
            match_id=d["match_id"],
            rally_id=d["rally_id"],
            server=enum_from_json(PlayerId, d["server"]),
            shots=tuple(ShotRecord.from_dict(s) for s in d["shots"]),
            winner=enum_from_json(PlayerId, d["winner"]),
        )


def validate_rally(rally: RallyRecord) -> list[str]:
    """Check every rally/shot invariant; returns violation messages (empty = valid)."""
    v: list[str] = []
    if not rally.shots:
        return [f"rally {rally.rally_id}: no shots"]
    expected_actor = rally.server
    for i, shot in enumerate(rally.shots):
        where = f"rally {rally.rally_id} shot_index {i}"
        if shot.match_id != rally.match_id or shot.rally_id != rally.rally_id:
            v.append(f"{where}: match/rally id mismatch")
        if shot.shot_index != i:
            v.append(f"{where}: shot_index is {shot.shot_index}, expected {i}")
        if shot.actor != expected_actor:
            v.append(f"{where}: actors do not alternate from server")
        expected_actor = expected_actor.opponent
        if (shot.exec_result is ExecResult.VALID) != (shot.defense_result is not None):
            v.append(f"{where}: defense_result must be present iff shot is valid")
        is_last = i == len(rally.shots) - 1
        terminal = shot.exec_result is ExecResult.FAULT or (
            shot.defense_result is DefenseResult.MISSED
        )
        if not is_last and terminal:
            if shot.exec_result is ExecResult.FAULT:
                v.append(f"rally {rally.rally_id}: non-terminal fault at shot_index {i}")
            else:
                v.append(f"rally {rally.rally_id}: non-terminal miss at shot_index {i}")
        if is_last and not terminal:
            v.append(f"rally {rally.rally_id}: final shot is not terminal")
    last = rally.shots[-1]
    if last.exec_result is ExecResult.FAULT:
        expected_winner = last.actor.opponent
    elif last.defense_result is DefenseResult.MISSED:
        expected_winner = last.actor
    else:
        expected_winner = None
    if expected_winner is not None and rally.winner != expected_winner:
        v.append(
            f"rally {rally.rally_id}: winner {enum_to_json(rally.winner)} contradicts "
            f"terminal event (expected {enum_to_json(expected_winner)})"
        )
    return v


def load_rally_log(path: Union[str, Path]) -> list[RallyRecord]:
    """Load a JSON-Lines rally log, validating every record."""
    records: list[RallyRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = RallyRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise RallyLogError(f"{path}:{lineno}: {exc}") from exc
            violations = validate_rally(record)
            if violations:
                raise RallyLogError(f"{path}:{lineno}: " + "; ".join(violations))
            records.append(record)
    return records


def save_rally_log(records: Iterable[RallyRecord], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), separators=(",", ":")) + "\n")


def split_rallies(
    records: Sequence[RallyRecord], test_fraction: float, seed: int
) -> tuple[list[RallyRecord], list[RallyRecord]]:
    """Split at rally granularity; deterministic given the seed."""
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if len(records) < 2:
        raise ValueError("need at least 2 rallies to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(records))
    n_test = max(1, round(len(records) * test_fraction))
    if n_test >= len(records):
        n_test = len(records) - 1
    test_idx = set(order[:n_test].tolist())
    train = [r for i, r in enumerate(records) if i not in test_idx]
    test = [r for i, r in enumerate(records) if i in test_idx]
    return train, test


@dataclass
class DatasetSummary:
    n_rallies: int = 0
    n_shots: int = 0
    shot_type_freq: dict = field(default_factory=dict)
    rally_length_hist: dict = field(default_factory=dict)
    per_player: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_rallies": self.n_rallies,
            "n_shots": self.n_shots,
            "shot_type_freq": self.shot_type_freq,
            "rally_length_hist": self.rally_length_hist,
            "per_player": self.per_player,
        }


def summary_stats(records: Sequence[RallyRecord]) -> DatasetSummary:
    """Counts of rallies/shots, shot-type frequencies, rally-length histogram
    and per-player fault/win rates."""
    shot_counts: Counter = Counter()
    length_hist: Counter = Counter()
    shots_by = Counter()
    faults_by = Counter()
    wins_by = Counter()
    n_shots = 0
    for rally in records:
        length_hist[len(rally.shots)] += 1
        wins_by[rally.winner] += 1
        for shot in rally.shots:
            n_shots += 1
            shot_counts[shot.action.shot] += 1
            shots_by[shot.actor] += 1
            if shot.exec_result is ExecResult.FAULT:
                faults_by[shot.actor] += 1
    per_player = {}
    for p in PlayerId:
        shots = shots_by[p]
        per_player[enum_to_json(p)] = {
            "shots": shots,
            "faults": faults_by[p],
            "fault_rate": faults_by[p] / shots if shots else 0.0,
            "rallies_won": wins_by[p],
            "win_rate": wins_by[p] / len(records) if records else 0.0,
        }
    return DatasetSummary(
        n_rallies=len(records),
        n_shots=n_shots,
        shot_type_freq={
            enum_to_json(s): shot_counts[s] / n_shots if n_shots else 0.0 for s in list(shot_counts)
        },
        rally_length_hist={str(k): length_hist[k] for k in sorted(length_hist)},
        per_player=per_player,
    )
