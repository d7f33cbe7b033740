"""Schedule closed forms, ablation selectors, sentence-level baselines, and
the curriculum-length estimator."""

import math

import numpy as np
import pytest

from curriseq import data as data_mod
from curriseq.curriculum import (
    Curriculum,
    CurriculumConfig,
    WeightVector,
    ablation_weight_vector,
    estimate_curriculum_length,
    hard_subseq_length,
    hard_weight_vector,
    ones_weight_vector,
    rarity_difficulty,
    sc_rsqrt_schedule,
    sc_sqrt_competence,
    sc_uncertainty_baby_steps,
    soft_decay_factor,
    soft_power_factor,
    soft_weight_vector,
    unlocked_bucket_count,
)

I = 1000  # curriculum length used throughout


class TestHardSchedule:
    def test_initial_prefix(self):
        assert hard_subseq_length(20, 0, I, 0.1) == 2

    def test_midpoint(self):
        assert hard_subseq_length(20, I // 2, I, 0.1) == 11

    def test_short_sentence_clamped_to_one(self):
        # floor(0.1 * 5) = 0 would select nothing
        assert hard_subseq_length(5, 0, I, 0.1) == 1

    def test_full_length_after_curriculum(self):
        for i in (I, I + 1, 10 * I):
            assert hard_subseq_length(20, i, I, 0.1) == 20

    def test_nondecreasing_in_i(self):
        lengths = [hard_subseq_length(37, i, I, 0.1) for i in range(0, I + 1, 7)]
        assert lengths == sorted(lengths)

    def test_weight_vector_is_prefix(self):
        w = hard_weight_vector(10, 0, I, 0.1)
        assert w.binary
        assert w.weights.tolist() == [1.0] + [0.0] * 9

    def test_weight_vector_midpoint(self):
        w = hard_weight_vector(20, I // 2, I, 0.1)
        assert w.weights.tolist() == [1.0] * 11 + [0.0] * 9

    def test_all_ones_after_curriculum(self):
        assert hard_weight_vector(20, I, I, 0.1).weights.min() == 1.0

    def test_contiguous_prefix_property(self):
        for length in (1, 3, 8, 33):
            for i in range(0, I + 1, 97):
                w = hard_weight_vector(length, i, I, 0.1).weights
                ones = int(w.sum())
                assert np.array_equal(w, np.r_[np.ones(ones), np.zeros(length - ones)])

    def test_preconditions(self):
        with pytest.raises(ValueError):
            hard_subseq_length(0, 0, I, 0.1)
        with pytest.raises(ValueError):
            hard_subseq_length(5, -1, I, 0.1)
        with pytest.raises(ValueError):
            hard_subseq_length(5, 0, I, 1.0)


class TestSoftSchedule:
    def test_decay_start_is_gamma0(self):
        assert soft_decay_factor(0, I, 0.7) == 0.7

    def test_decay_midpoint(self):
        assert soft_decay_factor(I // 2, I, 0.7) == pytest.approx(0.85, abs=1e-15)

    def test_decay_saturates(self):
        assert soft_decay_factor(I, I, 0.7) == 1.0

    def test_power_first_token_zero(self):
        for length in (1, 2, 50):
            assert soft_power_factor(1, length, 25.0) == 0.0

    def test_power_last_token_alpha0(self):
        assert soft_power_factor(40, 40, 25.0) == 25.0

    def test_length_one_defined(self):
        assert soft_power_factor(1, 1, 25.0) == 0.0
        assert soft_weight_vector(1, 0, I, 0.7, 25.0).weights.tolist() == [1.0]

    def test_weights_example(self):
        # alpha = 0, 1, 2 for length 3 and alpha0 = 2, so direct powers of 0.8
        w = soft_weight_vector(3, 0, I, 0.8, 2.0)
        assert w.weights == pytest.approx([1.0, 0.8, 0.64], rel=1e-15)

    def test_tail_weight_at_defaults(self):
        w = soft_weight_vector(30, 0, I, 0.7, 25.0)
        # 7**25 / 10**25 via exact rational arithmetic
        assert w.weights[-1] == pytest.approx(0.7**25, rel=1e-12)
        assert w.weights[-1] == pytest.approx(1.341068619663965e-4, rel=1e-12)

    def test_all_ones_after_curriculum(self):
        w = soft_weight_vector(9, I, I, 0.7, 25.0)
        assert np.array_equal(w.weights, np.ones(9))

    def test_monotonicity_properties(self):
        for length in (2, 5, 17):
            previous = None
            for i in range(0, I + 1, 50):
                w = soft_weight_vector(length, i, I, 0.7, 25.0).weights
                assert w[0] == 1.0
                assert np.all(np.diff(w) <= 1e-15)  # nonincreasing in t
                assert w.min() >= 0.0 and w.max() <= 1.0
                if previous is not None:
                    assert np.all(w >= previous - 1e-15)  # nondecreasing in i
                previous = w


class TestWeightVector:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            WeightVector(np.array([0.5, 1.2]), binary=False)

    def test_rejects_nonbinary_in_binary_mode(self):
        with pytest.raises(ValueError):
            WeightVector(np.array([0.5, 1.0]), binary=True)

    def test_soft_requires_leading_one(self):
        with pytest.raises(ValueError):
            WeightVector(np.array([0.9, 0.5]), binary=False)

    def test_normalizers(self):
        assert hard_weight_vector(10, 0, I, 0.1).normalizer == 1.0
        assert ones_weight_vector(7).normalizer == 7.0


class TestAblations:
    def test_random_reproducible_with_exact_popcount(self):
        k = hard_subseq_length(10, 300, I, 0.1)
        rngs = [np.random.default_rng(5) for _ in range(2)]
        first = ablation_weight_vector("random", 10, 300, I, 0.1, rng=rngs[0])
        second = ablation_weight_vector("random", 10, 300, I, 0.1, rng=rngs[1])
        assert np.array_equal(first.weights, second.weights)
        assert int(first.weights.sum()) == k

    def test_random_popcount_matches_hard_everywhere(self):
        rng = np.random.default_rng(0)
        for length in (1, 4, 23):
            for i in (0, I // 3, I):
                w = ablation_weight_vector("random", length, i, I, 0.1, rng=rng)
                assert w.weights.sum() == hard_weight_vector(length, i, I, 0.1).weights.sum()

    def test_lowloss_picks_min_mean_window(self):
        losses = np.array([5.0, 1.0, 1.0, 5.0, 5.0])
        i = _step_for_prefix(5, 2)
        w = ablation_weight_vector("lowloss", 5, i, I, 0.1, token_losses=losses)
        assert w.weights.tolist() == [0.0, 1.0, 1.0, 0.0, 0.0]

    def test_lowloss_matches_exhaustive_scan(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            length = int(rng.integers(2, 15))
            losses = rng.uniform(0.0, 4.0, size=length)
            i = int(rng.integers(0, I))
            w = ablation_weight_vector("lowloss", length, i, I, 0.1, token_losses=losses)
            k = int(w.weights.sum())
            best = min(
                (losses[s : s + k].mean(), s) for s in range(length - k + 1)
            )
            start = int(np.argmax(w.weights))
            assert losses[start : start + k].mean() == pytest.approx(best[0])

    def test_range_tail_starts_at_last_position(self):
        w = ablation_weight_vector("range", 10, 0, I, 0.1, range_bounds=(0.9, 1.0))
        assert w.weights.tolist() == [0.0] * 9 + [1.0]

    def test_range_tail_expands_right_to_left(self):
        i = _step_for_prefix(10, 4)
        w = ablation_weight_vector("range", 10, i, I, 0.1, range_bounds=(0.9, 1.0))
        assert w.weights.tolist() == [0.0] * 6 + [1.0] * 4

    def test_range_interior_expands_both_ways(self):
        i = _step_for_prefix(20, 8)
        w = ablation_weight_vector("range", 20, i, I, 0.1, range_bounds=(0.3, 0.4))
        ones = np.flatnonzero(w.weights)
        assert len(ones) == 8
        assert ones[0] < 6 and ones[-1] > 7  # grew around the 30-40% anchor
        assert np.array_equal(ones, np.arange(ones[0], ones[-1] + 1))  # contiguous

    def test_range_saturates_to_full_sentence(self):
        w = ablation_weight_vector("range", 12, I, I, 0.1, range_bounds=(0.6, 0.7))
        assert w.weights.sum() == 12

    def test_missing_aux_errors(self):
        with pytest.raises(ValueError):
            ablation_weight_vector("random", 5, 0, I, 0.1)
        with pytest.raises(ValueError):
            ablation_weight_vector("lowloss", 5, 0, I, 0.1)


def _step_for_prefix(length, want):
    """Smallest i whose hard prefix length equals `want` (test helper)."""
    for i in range(I + 1):
        if hard_subseq_length(length, i, I, 0.1) == want:
            return i
    raise AssertionError("prefix length not reachable")


class TestSentenceLevel:
    def test_competence_start(self):
        assert sc_sqrt_competence(0, 100, 0.01) == pytest.approx(0.01)

    def test_competence_end(self):
        assert sc_sqrt_competence(100, 100, 0.01) == 1.0

    def test_competence_midpoint_formula(self):
        # c0 pinned near zero: c(T/2) -> sqrt(0.5)
        assert sc_sqrt_competence(50, 100, 1e-9) == pytest.approx(math.sqrt(0.5), rel=1e-6)

    def test_competence_nondecreasing(self):
        values = [sc_sqrt_competence(i, 100, 0.01) for i in range(101)]
        assert values == sorted(values)

    def test_rsqrt_selects_easiest_first(self):
        difficulty = np.array([3.0, 1.0, 2.0, 5.0])
        chosen = sc_rsqrt_schedule(0, 100, 0.3, difficulty)
        assert chosen.tolist() == [1]  # floor(0.3 * 4) = 1 sentence, the easiest

    def test_rsqrt_selects_all_at_end(self):
        difficulty = np.array([3.0, 1.0, 2.0])
        assert sc_rsqrt_schedule(100, 100, 0.01, difficulty).tolist() == [0, 1, 2]

    def test_rsqrt_empty_corpus(self):
        with pytest.raises(ValueError):
            sc_rsqrt_schedule(0, 100, 0.1, np.array([]))

    def test_rarity_hand_computed(self):
        # corpus {"a a", "a b"}: freq(a) = 3/4, freq(b) = 1/4
        scores = rarity_difficulty([[7, 7], [7, 8]])
        assert scores[0] == pytest.approx(-2 * math.log(3 / 4))
        assert scores[1] == pytest.approx(-math.log(3 / 4) - math.log(1 / 4))
        assert scores[0] < scores[1]

    def test_rarity_additivity(self):
        base = rarity_difficulty([[5, 6], [5, 6, 6]])
        single = rarity_difficulty([[5, 6], [5, 6, 6]])
        # duplicating token 6 adds exactly its -log frequency (3/5 of all tokens)
        assert base[1] - base[0] == pytest.approx(-math.log(3 / 5))
        assert np.array_equal(base, single)

    def test_baby_steps_equal_split(self):
        src = [[4, 5]] * 8
        tgt = [[4, 5, 2]] * 8
        buckets = sc_uncertainty_baby_steps(src, tgt, 6, 6)
        assert [len(b) for b in buckets] == [2, 2, 2, 2]

    def test_baby_steps_unlock_schedule(self):
        assert unlocked_bucket_count(0, 1000, 4) == 1
        assert unlocked_bucket_count(249, 1000, 4) == 1
        assert unlocked_bucket_count(250, 1000, 4) == 2
        assert unlocked_bucket_count(750, 1000, 4) == 4
        assert unlocked_bucket_count(10_000, 1000, 4) == 4

    def test_repeated_sentence_lands_in_first_bucket(self):
        rng = np.random.default_rng(2)
        src = [list(rng.integers(4, 24, size=6)) for _ in range(15)]
        tgt = [list(rng.integers(4, 24, size=6)) + [2] for _ in range(15)]
        easy = [5, 6, 7]
        for _ in range(5):
            src.append(list(easy))
            tgt.append(easy + [2])
        buckets = sc_uncertainty_baby_steps(src, tgt, 24, 24)
        repeated = [k for k, s in enumerate(src) if s == easy]
        assert all(k in buckets[0] for k in repeated)

    def test_too_small_corpus(self):
        with pytest.raises(ValueError):
            sc_uncertainty_baby_steps([[4]], [[4, 2]], 5, 5)


class TestComposeAndDriver:
    def _corpus(self, n=12):
        return data_mod.synth_task("copy", n, 6, 5, seed=3)

    def test_sc_gating_grows(self):
        corpus = self._corpus(16)
        cfg = CurriculumConfig(variant="sc-unc", total_updates=100, sc_baby_steps=4)
        cur = Curriculum(cfg, corpus)
        early = cur.selected_indices(0)
        late = cur.selected_indices(100)
        assert len(early) == 4
        assert len(late) == 16
        assert set(early) <= set(late)

    def test_compose_selects_and_weights(self):
        corpus = self._corpus(16)
        cfg = CurriculumConfig(variant="tc-soft+sc", total_updates=100, sc_method="rsqrt")
        cur = Curriculum(cfg, corpus)
        assert cur.gates_sentences
        assert len(cur.selected_indices(0)) >= 1
        w = cur.weight_vector(6, 0)
        assert not w.binary and w.weights[-1] < 1.0

    def test_compose_saturated_is_baseline(self):
        corpus = self._corpus(16)
        cfg = CurriculumConfig(variant="tc-soft+sc", total_updates=50, sc_method="rsqrt")
        cur = Curriculum(cfg, corpus)
        i = max(cfg.total_updates, cfg.sc_updates)
        assert len(cur.selected_indices(i)) == 16
        assert np.array_equal(cur.weight_vector(9, i).weights, np.ones(9))

    def test_sc_variants_use_all_ones_weights(self):
        corpus = self._corpus(16)
        cur = Curriculum(CurriculumConfig(variant="sc-rsqrt", total_updates=10), corpus)
        assert np.array_equal(cur.weight_vector(4, 0).weights, np.ones(4))

    def test_consumed_target_prefix(self):
        cur = Curriculum(CurriculumConfig(variant="tc-hard", total_updates=100))
        assert cur.consumed_target([5, 6, 7, 8], 0) == [5]

    def test_every_variant_weight_in_unit_interval(self):
        corpus = self._corpus(16)
        rng = np.random.default_rng(0)
        for variant in ("none", "tc-hard", "tc-soft", "ablation-random", "ablation-range",
                        "sc-rsqrt", "sc-unc", "tc-soft+sc"):
            cfg = CurriculumConfig(variant=variant, total_updates=40)
            cur = Curriculum(cfg, corpus)
            for _ in range(10):
                length = int(rng.integers(1, 12))
                i = int(rng.integers(0, 80))
                w = cur.weight_vector(length, i, key=int(rng.integers(0, 16)))
                assert w.weights.min() >= 0.0 and w.weights.max() <= 1.0


class TestLengthEstimator:
    def test_bleu_like_threshold(self):
        history = [(100, 10.0), (200, 25.0), (300, 30.0)]
        assert estimate_curriculum_length(history, 0.7, "higher") == 200

    def test_constant_history(self):
        assert estimate_curriculum_length([(5, 2.0), (6, 2.0)], 0.7, "higher") == 5

    def test_perplexity_like_threshold(self):
        history = [(1, 100.0), (2, 60.0), (3, 40.0)]
        # threshold = 0.3 * 100 + 0.7 * 40 = 58
        assert estimate_curriculum_length(history, 0.7, "lower") == 3

    def test_unreachable_reports_closest(self):
        # negative higher-is-better metric whose 70% threshold is never met
        history = [(1, -10.0), (2, -5.0)]
        with pytest.raises(ValueError, match="closest achieved"):
            estimate_curriculum_length(history, 0.7, "higher")

    def test_empty_history(self):
        with pytest.raises(ValueError):
            estimate_curriculum_length([], 0.7, "higher")
