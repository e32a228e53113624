"""Interactive rally environment.

Each shot resolves through a two-stage stochastic process: an execution
draw against the hitter's success model, then a defensive draw against the
defender's return model.  Rewards are sparse: nonzero only on the step that
ends a rally.  Supports a single-agent mode with a built-in opponent and a
symmetric two-agent mode where the caller supplies every shot.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Protocol, Sequence, Union

import numpy as np

from .core import (
    Action,
    DefenseResult,
    ExecResult,
    Observation,
    PlayerId,
    RallyEvent,
    ScoreState,
    build_observation,
)
from .data import RallyRecord, ShotRecord
from .models import ContextKey, TransitionModel, context_of


class EnvStateError(RuntimeError):
    """Stepping a finished game or acting out of turn."""


@dataclass(frozen=True)
class ScoreRule:
    """Rally scoring: ``game_to_21_cap_30`` (win by 2, sudden point at 29-29)
    or ``first_to_n`` for short episodes."""

    kind: str = "game_to_21_cap_30"
    n: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("game_to_21_cap_30", "first_to_n"):
            raise ValueError(f"unknown score rule: {self.kind!r}")
        if self.kind == "first_to_n" and self.n < 1:
            raise ValueError("first_to_n requires n >= 1")

    @classmethod
    def first_to(cls, n: int) -> "ScoreRule":
        return cls(kind="first_to_n", n=n)

    def is_over(self, points: tuple[int, int]) -> bool:
        hi, lo = max(points), min(points)
        if self.kind == "first_to_n":
            return hi >= self.n
        return (hi >= 21 and hi - lo >= 2) or hi == 30

    def apply(self, score: ScoreState, rally_winner: PlayerId) -> ScoreState:
        if score.game_over:
            raise EnvStateError("cannot score a rally after the game is over")
        points = list(score.points)
        points[rally_winner] += 1
        points = (points[0], points[1])
        over = self.is_over(points)
        return ScoreState(
            points=points,
            server=rally_winner,
            game_over=over,
            winner=(PlayerId(int(np.argmax(points))) if over else None),
        )

    def to_dict(self) -> dict:
        if self.kind == "first_to_n":
            return {"kind": self.kind, "n": self.n}
        return {"kind": self.kind}

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreRule":
        return cls(kind=d["kind"], n=d.get("n", 1))


class Policy(Protocol):
    """Minimal acting interface; implementations live in :mod:`shuttlesim.agents`."""

    def act(self, obs: Observation, rng: np.random.Generator) -> Action: ...


@dataclass
class PlayerModels:
    """The transition-model pair governing one player's shots and defenses."""

    success: TransitionModel
    ret: TransitionModel


ModelSpec = Union[PlayerModels, dict]


@dataclass
class EnvConfig:
    models: ModelSpec
    opponent_policy: Optional[Policy] = None
    agent: PlayerId = PlayerId.P0
    k: int = 4
    reward_win: float = 1.0
    reward_loss: float = -1.0
    score_rule: ScoreRule = field(default_factory=ScoreRule)
    initial_server: PlayerId = PlayerId.P0
    observe_score: bool = True
    opponent_infallible: bool = False
    rally_shot_cap: int = 10_000
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.reward_win > 0 > self.reward_loss:
            raise ValueError("need reward_win > 0 > reward_loss")
        if isinstance(self.models, PlayerModels):
            self.models = {PlayerId.P0: self.models, PlayerId.P1: self.models}


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: float
    rally_done: bool
    game_done: bool
    info: dict


def _shot_record(match_id: str, rally_id: int, idx: int, event: RallyEvent) -> ShotRecord:
    return ShotRecord(
        match_id=match_id,
        rally_id=rally_id,
        shot_index=idx,
        actor=event.actor,
        action=event.action,
        exec_result=event.exec_result,
        defense_result=event.defense_result,
    )


class RallyEnv:
    """One game of simulated badminton, stepped one shot at a time."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self._rng = np.random.default_rng(config.seed)
        self._reset_state()

    # -- state ---------------------------------------------------------------

    def _reset_state(self) -> None:
        self.score = ScoreState(server=self.config.initial_server)
        self.events: list[RallyEvent] = []
        self.turn: PlayerId = self.config.initial_server
        self.completed_rallies: list[tuple[PlayerId, list[RallyEvent], PlayerId]] = []
        self._rally_server: PlayerId = self.config.initial_server

    @property
    def rng(self) -> np.random.Generator:
        return self._rng

    @property
    def game_over(self) -> bool:
        return self.score.game_over

    def observation(self, viewer: PlayerId) -> Observation:
        return build_observation(
            self.events, self.score, viewer, self.config.k, self.config.observe_score
        )

    def _models_of(self, player: PlayerId) -> PlayerModels:
        return self.config.models[player]

    # -- core two-stage resolution --------------------------------------------

    def _resolve_shot(self, actor: PlayerId, action: Action) -> RallyEvent:
        """Run both stochastic stages for one shot and append the event."""
        if len(self.events) >= self.config.rally_shot_cap:
            raise EnvStateError(
                f"non-terminating rally: exceeded {self.config.rally_shot_cap} shots"
            )
        ctx = context_of(self.events)
        if self._rng.random() >= self._models_of(actor).success.prob(ctx, action):
            event = RallyEvent(actor, action, ExecResult.FAULT)
        else:
            defender = actor.opponent
            facing = ContextKey.from_incoming(action)
            returned = self._rng.random() < self._models_of(defender).ret.prob(facing, action)
            event = RallyEvent(
                actor,
                action,
                ExecResult.VALID,
                DefenseResult.RETURNED if returned else DefenseResult.MISSED,
            )
        self.events.append(event)
        return event

    def _opponent_reply(self) -> RallyEvent:
        opponent = self.config.agent.opponent
        action = self.config.opponent_policy.act(self.observation(opponent), self._rng)
        if self.config.opponent_infallible:
            # ablation mode: only the agent's own two-stage draws can end a rally
            event = RallyEvent(opponent, action, ExecResult.VALID, DefenseResult.RETURNED)
            self.events.append(event)
            return event
        return self._resolve_shot(opponent, action)

    def _finish_rally(self, winner: PlayerId) -> None:
        self.completed_rallies.append((self._rally_server, list(self.events), winner))
        self.score = self.config.score_rule.apply(self.score, winner)
        self.events = []
        self.turn = winner
        self._rally_server = winner

    # -- single-agent mode -----------------------------------------------------

    def _advance_to_agent_turn(self) -> list[dict]:
        """Resolve opponent serves (and any rallies they settle outright) until
        the agent is on turn or the game ends.  Returns what happened."""
        auto: list[dict] = []
        agent = self.config.agent
        while not self.score.game_over and self.turn != agent:
            event = self._opponent_reply()
            winner = event.rally_winner
            if winner is None:
                self.turn = agent
            else:
                auto.append({"event": event, "rally_winner": winner})
                self._finish_rally(winner)
        return auto

    def reset(self, seed: Optional[int] = None) -> Observation:
        """Start a fresh game; returns the agent's serve-or-receive observation.

        In single-agent mode, if the opponent serves first their serve is
        resolved here so the agent always observes its own decision point.
        """
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._reset_state()
        if self.config.opponent_policy is not None:
            self._advance_to_agent_turn()
        return self.observation(self.config.agent)

    def step(self, action: Action) -> StepResult:
        """Single-agent step: the agent's shot, then the built-in opponent's reply."""
        if self.config.opponent_policy is None:
            raise EnvStateError("single-agent step requires an opponent_policy")
        if self.score.game_over:
            raise EnvStateError("game is over; call reset()")
        agent = self.config.agent
        if self.turn != agent:
            raise EnvStateError("not the agent's turn")

        info: dict = {"opponent_event": None}
        event = self._resolve_shot(agent, action)
        info["exec_result"] = event.exec_result
        info["defense_result"] = event.defense_result
        winner = event.rally_winner

        if winner is None:
            self.turn = agent.opponent
            reply = self._opponent_reply()
            info["opponent_event"] = reply
            winner = reply.rally_winner
            if winner is None:
                self.turn = agent

        reward = 0.0
        rally_done = winner is not None
        if rally_done:
            reward = self.config.reward_win if winner == agent else self.config.reward_loss
            info["rally_winner"] = winner
            self._finish_rally(winner)
            info["auto_resolved"] = self._advance_to_agent_turn()
        info["score"] = self.score
        return StepResult(
            observation=self.observation(agent),
            reward=reward,
            rally_done=rally_done,
            game_done=self.score.game_over,
            info=info,
        )

    # -- two-agent mode ----------------------------------------------------------

    def step_two_agent(self, action: Action) -> StepResult:
        """Resolve one shot for whichever player is on turn.

        Reward is reported from the shooter's perspective; the returned
        observation belongs to the next player to act.
        """
        if self.score.game_over:
            raise EnvStateError("game is over; call reset()")
        shooter = self.turn
        event = self._resolve_shot(shooter, action)
        winner = event.rally_winner
        info = {
            "actor": shooter,
            "exec_result": event.exec_result,
            "defense_result": event.defense_result,
            "opponent_event": None,
        }
        reward = 0.0
        rally_done = winner is not None
        if rally_done:
            reward = self.config.reward_win if winner == shooter else self.config.reward_loss
            info["rally_winner"] = winner
            self._finish_rally(winner)
        else:
            self.turn = shooter.opponent
        info["score"] = self.score
        return StepResult(
            observation=self.observation(self.turn),
            reward=reward,
            rally_done=rally_done,
            game_done=self.score.game_over,
            info=info,
        )

    def rally_records(self, match_id: str) -> list[RallyRecord]:
        """Completed rallies so far, in the shared rally-log schema."""
        records = []
        for rally_id, (server, events, winner) in enumerate(self.completed_rallies):
            records.append(
                RallyRecord(
                    match_id=match_id,
                    rally_id=rally_id,
                    server=server,
                    shots=tuple(
                        _shot_record(match_id, rally_id, i, e) for i, e in enumerate(events)
                    ),
                    winner=winner,
                )
            )
        return records


@dataclass
class GameRecord:
    match_id: str
    rallies: list[RallyRecord]
    final_score: ScoreState
    winner: PlayerId


def play_game(
    policy_a: Policy,
    policy_b: Policy,
    config: EnvConfig,
    seed: Optional[int] = None,
    match_id: Optional[str] = None,
) -> GameRecord:
    """Play one full game between two policies (player P0 = policy_a)."""
    cfg = replace(config, opponent_policy=None, seed=seed if seed is not None else config.seed)
    env = RallyEnv(cfg)
    policies = {PlayerId.P0: policy_a, PlayerId.P1: policy_b}
    while not env.game_over:
        player = env.turn
        action = policies[player].act(env.observation(player), env.rng)
        env.step_two_agent(action)
    match_id = match_id if match_id is not None else f"sim-{cfg.seed}"
    return GameRecord(
        match_id=match_id,
        rallies=env.rally_records(match_id),
        final_score=env.score,
        winner=env.score.winner,
    )
