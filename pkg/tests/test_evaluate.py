import numpy as np
import pytest

from shuttlesim.core import N_ACTIONS, PlayerId, decode_action
from shuttlesim.env import EnvConfig, PlayerModels, ScoreRule
from shuttlesim.evaluate import (
    analytic_rally_win_prob,
    normal_ci_halfwidth,
    run_matches,
    shot_distribution,
    topk_report,
)
from shuttlesim.models import ConstantModel, fit_next_action
from shuttlesim.synth import load_preset, synth_generate


class RandomPolicy:
    def act(self, obs, rng):
        return decode_action(int(rng.integers(N_ACTIONS)))


def constant_config(p_s, p_r, rule=None):
    return EnvConfig(
        models=PlayerModels(success=ConstantModel(p_s), ret=ConstantModel(p_r)),
        score_rule=rule or ScoreRule.first_to(1),
    )


class TestAnalyticOracle:
    def test_certain_ace(self):
        assert analytic_rally_win_prob(1.0, 0.5, 0.5, 0.0) == 1.0

    def test_certain_fault(self):
        assert analytic_rally_win_prob(0.0, 0.5, 0.5, 0.5) == 0.0

    def test_hand_solved_symmetric_system(self):
        # x = 0.45 + 0.45*(1 - y); y = 0.45 + 0.45*(1 - x)
        # => x = (0.45 + 0.45*0.1) / (1 - 0.45**2)
        expected = (0.45 + 0.45 * 0.1) / (1 - 0.45**2)
        assert analytic_rally_win_prob(0.9, 0.5, 0.9, 0.5) == pytest.approx(expected)

    def test_non_absorbing_chain_rejected(self):
        with pytest.raises(ValueError, match="non-absorbing"):
            analytic_rally_win_prob(1.0, 1.0, 1.0, 1.0)

    def test_bad_input_rejected(self):
        with pytest.raises(ValueError):
            analytic_rally_win_prob(1.2, 0.5, 0.5, 0.5)

    def test_monte_carlo_agreement_single_config(self):
        p_s, p_r = 0.85, 0.55
        report = run_matches(
            RandomPolicy(), RandomPolicy(), constant_config(p_s, p_r), n=20_000, seed=17
        )
        assert report.win_rate == pytest.approx(
            analytic_rally_win_prob(p_s, p_r, p_s, p_r), abs=0.01
        )


class TestRunMatches:
    def test_degenerate_ci_at_extremes(self):
        report = run_matches(RandomPolicy(), RandomPolicy(), constant_config(1.0, 0.0), n=1, seed=0)
        assert report.win_rate == 1.0 and report.ci_halfwidth == 0.0
        assert normal_ci_halfwidth(0.0, 5) == 0.0

    def test_deterministic_given_seed(self):
        cfg = constant_config(0.8, 0.5)
        a = run_matches(RandomPolicy(), RandomPolicy(), cfg, n=50, seed=3)
        b = run_matches(RandomPolicy(), RandomPolicy(), cfg, n=50, seed=3)
        assert a.wins == b.wins and a.game_seeds == b.game_seeds

    def test_report_consistency(self):
        report = run_matches(RandomPolicy(), RandomPolicy(), constant_config(0.7, 0.6), n=64, seed=1)
        assert report.wins <= report.n_games
        assert report.win_rate == report.wins / report.n_games
        assert len(report.fingerprint) == 16

    @pytest.mark.slow
    def test_self_play_symmetric_near_half(self):
        preset = load_preset("balanced")
        cfg = EnvConfig(models=preset.transition_models(), score_rule=ScoreRule.first_to(1))
        pol_a, pol_b = preset.policy(PlayerId.P0), preset.policy(PlayerId.P1)
        report = run_matches(pol_a, pol_b, cfg, n=10_000, seed=23)
        assert 0.48 <= report.win_rate <= 0.52


class TestShotDistribution:
    def test_uniform_policy_matches_uniform_mass(self):
        preset = load_preset("balanced")
        cfg = EnvConfig(models=preset.transition_models())
        hist = shot_distribution(RandomPolicy(), cfg, n_rallies=4000, seed=2)
        assert hist.shape == (6, 9)
        assert hist.sum() == pytest.approx(1.0)
        # every (shot, zone) cell carries 9 of the 486 uniform action slots
        np.testing.assert_allclose(hist, 1.0 / 54, atol=0.01)

    def test_deterministic_policy_point_mass(self):
        action = decode_action(123)
        preset = load_preset("balanced")
        cfg = EnvConfig(models=preset.transition_models())

        class Fixed:
            def act(self, obs, rng):
                return action

        hist = shot_distribution(Fixed(), cfg, n_rallies=50, seed=0, opponent=RandomPolicy())
        assert hist[action.shot, action.target.zone_index] == 1.0

    def test_bc_policy_histogram_matches_log_marginal(self):
        from shuttlesim.agents import bc_policy

        preset = load_preset("balanced")
        log = synth_generate(preset, 4000, seed=31)
        model = fit_next_action(log, alpha=1.0)
        policy = bc_policy(model, PlayerId.P0)
        cfg = EnvConfig(models=preset.transition_models())
        hist = shot_distribution(policy, cfg, n_rallies=6000, seed=5,
                                 opponent=bc_policy(model, PlayerId.P1))
        log_hist = np.zeros((6, 9))
        for rally in log:
            for s in rally.shots:
                if s.actor is PlayerId.P0:
                    log_hist[s.action.shot, s.action.target.zone_index] += 1
        log_hist /= log_hist.sum()
        assert np.abs(hist - log_hist).max() < 0.02


class TestTopKReport:
    @pytest.fixture(scope="class")
    def fitted(self):
        preset = load_preset("balanced")
        log = synth_generate(preset, 4000, seed=41)
        return fit_next_action(log[:3200], alpha=1.0), log[3200:]

    def test_rows_nondecreasing(self, fitted):
        model, test = fitted
        report = topk_report(model, test, ks=(1, 2, 3, 4))
        for row in report.rows.values():
            for accs in row.values():
                assert all(b >= a for a, b in zip(accs, accs[1:]))

    def test_k_max_column_is_one(self, fitted):
        model, test = fitted
        report = topk_report(model, test, ks=(6,), projections=("stroke_type",))
        for row in report.rows.values():
            assert row["stroke_type"][0] == 1.0

    def test_text_rendering(self, fitted):
        model, test = fitted
        text = str(topk_report(model, test, ks=(1, 2)))
        assert "stroke_type@1" in text and "p0" in text
