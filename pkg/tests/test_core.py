import numpy as np
import pytest
from hypothesis import given, strategies as st

from shuttlesim.core import (
    Action,
    CourtZone,
    DomainError,
    ExecAttrs,
    ExecResult,
    DefenseResult,
    Half,
    HeightBand,
    N_ACTIONS,
    Observation,
    PlayerId,
    RallyEvent,
    ScoreState,
    ShotType,
    SLOT_FEATURES,
    build_observation,
    decode_action,
    encode_action,
    observation_dim,
)


def make_event(actor, shot=ShotType.CLEAR, zone=4, height=HeightBand.HIGH, exec_code=0,
               exec_result=ExecResult.VALID, defense=DefenseResult.RETURNED):
    return RallyEvent(
        actor=actor,
        action=Action.make(shot, zone, height, exec_code),
        exec_result=exec_result,
        defense_result=defense if exec_result is ExecResult.VALID else None,
    )


class TestActionEncoding:
    def test_all_zero_components(self):
        a = Action.make(ShotType.SMASH, 0, HeightBand.LOW, 0)
        assert encode_action(a) == 0

    def test_all_max_components(self):
        a = Action.make(ShotType.LIFT, 8, HeightBand.HIGH, 2)
        assert encode_action(a) == N_ACTIONS - 1 == 485

    def test_hand_evaluated_index(self):
        # ((shot*9 + zone)*3 + height)*3 + exec = ((1*9+4)*3+1)*3+1
        a = Action.make(ShotType.DROP, 4, HeightBand.MID, 1)
        assert encode_action(a) == ((1 * 9 + 4) * 3 + 1) * 3 + 1 == 121

    def test_round_trip_exhaustive(self):
        for idx in range(N_ACTIONS):
            assert encode_action(decode_action(idx)) == idx

    def test_decode_out_of_range(self):
        with pytest.raises(DomainError):
            decode_action(486)
        with pytest.raises(DomainError):
            decode_action(-1)

    def test_illegal_exec_combination(self):
        with pytest.raises(DomainError):
            ExecAttrs(backhand=True, around_head=True)

    def test_action_json_round_trip(self):
        for idx in range(0, N_ACTIONS, 7):
            a = decode_action(idx)
            assert Action.from_dict(a.to_dict()) == a


class TestZones:
    def test_zone_count(self):
        zones = {CourtZone(h, r, c).zone_index for h in Half for r in range(3) for c in range(3)}
        assert zones == set(range(9))

    def test_mirror_is_involution(self):
        for r in range(3):
            for c in range(3):
                z = CourtZone(Half.FAR, r, c)
                assert z.mirror().mirror() == z
                assert z.mirror().row == z.row
                assert z.mirror().col == 2 - z.col

    def test_bad_zone(self):
        with pytest.raises(DomainError):
            CourtZone(Half.NEAR, 3, 0)


class TestPlayers:
    def test_opponent_involutive(self):
        assert PlayerId.P0.opponent is PlayerId.P1
        assert PlayerId.P1.opponent is PlayerId.P0
        assert PlayerId.P0.opponent.opponent is PlayerId.P0


class TestRallyEvent:
    def test_defense_present_iff_valid(self):
        with pytest.raises(DomainError):
            RallyEvent(PlayerId.P0, decode_action(0), ExecResult.FAULT, DefenseResult.MISSED)
        with pytest.raises(DomainError):
            RallyEvent(PlayerId.P0, decode_action(0), ExecResult.VALID, None)

    def test_rally_winner(self):
        fault = make_event(PlayerId.P0, exec_result=ExecResult.FAULT, defense=None)
        assert fault.rally_winner is PlayerId.P1
        winner = make_event(PlayerId.P0, defense=DefenseResult.MISSED)
        assert winner.rally_winner is PlayerId.P0
        live = make_event(PlayerId.P0)
        assert live.rally_winner is None


class TestObservation:
    def test_empty_rally_fully_padded(self):
        obs = build_observation([], ScoreState(server=PlayerId.P0), PlayerId.P0, k=4)
        vec = obs.feature_vec
        assert vec.shape == (95,)
        assert observation_dim(4) == 95
        np.testing.assert_array_equal(vec[:92], 0.0)
        np.testing.assert_array_equal(vec[92:], [0.0, 0.0, 1.0])

    def test_dimension_formula(self):
        for k in (1, 2, 4, 7):
            obs = build_observation([], ScoreState(), PlayerId.P0, k=k)
            assert obs.feature_vec.shape == (23 * k + 3,)

    def test_partial_window_pads_oldest_slots(self):
        events = [make_event(PlayerId.P0), make_event(PlayerId.P1)]
        obs = build_observation(events, ScoreState(), PlayerId.P0, k=4)
        vec = obs.feature_vec
        np.testing.assert_array_equal(vec[: 2 * SLOT_FEATURES], 0.0)
        assert vec[2 * SLOT_FEATURES : 3 * SLOT_FEATURES].sum() == 5.0  # five one-hot blocks

    def test_window_keeps_most_recent(self):
        events = [make_event(PlayerId(i % 2), shot=ShotType(i % 6)) for i in range(7)]
        obs = build_observation(events, ScoreState(), PlayerId.P0, k=4)
        assert obs.history == tuple(events[-4:])

    def test_viewer_mirroring_of_zones(self):
        # P0 hits to zone col 0; P1 views that zone mirrored to col 2
        events = [make_event(PlayerId.P0, zone=0)]
        score = ScoreState(server=PlayerId.P0)
        vec0 = build_observation(events, score, PlayerId.P0, k=1).feature_vec
        vec1 = build_observation(events, score, PlayerId.P1, k=1).feature_vec
        zone_block0 = vec0[6:15]
        zone_block1 = vec1[6:15]
        assert zone_block0[0] == 1.0  # row 0, col 0
        assert zone_block1[2] == 1.0  # row 0, col 2 after mirroring
        # shot / height / exec blocks agree between viewers
        np.testing.assert_array_equal(vec0[:6], vec1[:6])
        np.testing.assert_array_equal(vec0[15:21], vec1[15:21])

    def test_score_and_serving_flags(self):
        score = ScoreState(points=(3, 7), server=PlayerId.P1)
        obs = build_observation([], score, PlayerId.P1, k=2)
        assert obs.score_self == 7 and obs.score_opp == 3 and obs.serving
        vec = obs.feature_vec
        assert vec[-3] == pytest.approx(7 / 30)
        assert vec[-2] == pytest.approx(3 / 30)
        assert vec[-1] == 1.0

    def test_observe_score_off_zeroes_score_block(self):
        score = ScoreState(points=(3, 7), server=PlayerId.P1)
        obs = build_observation([], score, PlayerId.P1, k=2, observe_score=False)
        vec = obs.feature_vec
        assert vec[-3] == 0.0 and vec[-2] == 0.0 and vec[-1] == 1.0

    @given(st.lists(st.integers(0, N_ACTIONS - 1), min_size=1, max_size=12), st.integers(1, 6))
    def test_window_depends_only_on_last_k_events(self, idxs, k):
        events = []
        for i, idx in enumerate(idxs):
            a = decode_action(idx)
            events.append(RallyEvent(PlayerId(i % 2), a, ExecResult.VALID, DefenseResult.RETURNED))
        score = ScoreState()
        full = build_observation(events, score, PlayerId.P0, k=k).feature_vec
        suffix = build_observation(events[-k:], score, PlayerId.P0, k=k).feature_vec
        np.testing.assert_array_equal(full, suffix)

    def test_mirrored_events_permute_zone_blocks_only(self):
        events = [make_event(PlayerId.P0, zone=3), make_event(PlayerId.P1, zone=8)]
        mirrored = [
            RallyEvent(e.actor,
                       Action(e.action.shot, e.action.target.mirror(), e.action.height, e.action.exec),
                       e.exec_result, e.defense_result)
            for e in events
        ]
        score = ScoreState()
        vec = build_observation(events, score, PlayerId.P0, k=2).feature_vec
        vec_m = build_observation(mirrored, score, PlayerId.P0, k=2).feature_vec
        for slot in range(2):
            base = slot * SLOT_FEATURES
            np.testing.assert_array_equal(vec[base : base + 6], vec_m[base : base + 6])
            zone = vec[base + 6 : base + 15].reshape(3, 3)
            zone_m = vec_m[base + 6 : base + 15].reshape(3, 3)
            np.testing.assert_array_equal(zone[:, ::-1], zone_m)
            np.testing.assert_array_equal(vec[base + 15 : base + 23], vec_m[base + 15 : base + 23])
        np.testing.assert_array_equal(vec[-3:], vec_m[-3:])
