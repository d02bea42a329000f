from __future__ import annotations

import numpy as np
import pytest

from conftest import make_expl
from xaieval.corpus import build_perturbation_pair
from xaieval.errors import EmptyInput, FractionOutOfRange, IndexOutOfRange
from xaieval.records import normalize_scores
from xaieval.robustness import (
    average_difference,
    make_perturbation_plan,
    match_positions,
    mean_average_difference,
    normalized_pair,
    plan_from_wire,
    plan_to_wire,
    word_difference,
)


def naive_ad(original_tokens, original_scores, perturbed_tokens, perturbed_scores):
    """Direct per-word evaluation of the difference equations.

    Normalizes both score vectors by their absolute sums, takes importance
    magnitudes, then walks the original words left to right, consuming
    perturbed occurrences one at a time via an explicit used-flags list.
    """
    os_total = sum(abs(s) for s in original_scores)
    ps_total = sum(abs(s) for s in perturbed_scores)
    x = [abs(s) / os_total for s in original_scores]
    xp = [abs(s) / ps_total for s in perturbed_scores]
    used = [False] * len(perturbed_tokens)
    ds = []
    for k, token in enumerate(original_tokens):
        found = None
        for j, cand in enumerate(perturbed_tokens):
            if not used[j] and cand.lower() == token.lower():
                found = j
                break
        if found is None:
            ds.append(x[k])  # rel(k) = 0: the perturbed term vanishes
        else:
            used[found] = True
            ds.append(abs(x[k] - xp[found]))
    return sum(ds) / len(ds), ds


class TestWordDifference:
    def test_matched_word(self):
        pair = build_perturbation_pair(
            make_expl(["a", "b"], [0.5, 0.5]), make_expl(["a", "b"], [0.3, 0.7]), "synonym"
        )
        assert word_difference(pair, 0) == pytest.approx(0.2, abs=1e-12)

    def test_absent_word_keeps_original_mass(self):
        pair = build_perturbation_pair(
            make_expl(["a", "b"], [0.5, 0.5]), make_expl(["b"], [1.0]), "delete"
        )
        assert word_difference(normalized_pair(pair), 0) == pytest.approx(0.5, abs=1e-12)

    def test_identical_records_are_zero(self):
        rec = normalize_scores(make_expl(["a", "b", "c"], [0.2, 0.3, 0.5]))
        pair = build_perturbation_pair(rec, rec, "mask")
        for k in range(3):
            assert word_difference(pair, k) == 0.0

    def test_index_out_of_range(self):
        rec = make_expl(["a"], [1.0])
        pair = build_perturbation_pair(rec, rec, "mask")
        with pytest.raises(IndexOutOfRange):
            word_difference(pair, 1)

    def test_duplicates_consume_left_to_right(self):
        original = make_expl(["the", "the"], [0.75, 0.25])
        perturbed = make_expl(["the"], [1.0])
        matches = match_positions(original.tokens, perturbed.tokens)
        assert matches == [0, None]


class TestAverageDifference:
    def test_mean_of_two(self):
        pair = build_perturbation_pair(
            make_expl(["a", "b"], [0.5, 0.5]), make_expl(["a", "b"], [0.3, 0.7]), "synonym"
        )
        result = average_difference(pair)
        assert result.ad == pytest.approx(0.2, abs=1e-12)

    def test_unperturbed_pair_is_zero(self):
        rec = make_expl(["a", "b"], [0.6, 0.4])
        assert average_difference(build_perturbation_pair(rec, rec, "mask")).ad == 0.0

    def test_hand_evaluated_deletion(self):
        # original [0.6, 0.4]; word 0 deleted, word 1 keeps all mass
        original = make_expl(["bright", "story"], [0.6, 0.4])
        perturbed = make_expl(["story"], [1.0])
        expected_ad, expected_ds = naive_ad(
            ["bright", "story"], [0.6, 0.4], ["story"], [1.0]
        )
        assert expected_ds == pytest.approx([0.6, 0.6], abs=1e-15)
        result = average_difference(build_perturbation_pair(original, perturbed, "delete"))
        assert result.ad == pytest.approx(expected_ad, abs=1e-12)
        assert result.ad == pytest.approx(0.6, abs=1e-12)
        assert [rel for _, rel, _ in result.per_word] == [0, 1]

    def test_ad_equals_stored_per_word_mean(self):
        pair = build_perturbation_pair(
            make_expl(["a", "b", "c"], [0.1, -0.7, 0.2]),
            make_expl(["c", "a"], [0.5, -0.5]),
            "delete",
        )
        result = average_difference(pair)
        ds = [d for _, _, d in result.per_word]
        assert result.ad == sum(ds) / len(ds)
        # enlarging any single d strictly increases the mean
        for i in range(len(ds)):
            bumped = list(ds)
            bumped[i] += 0.1
            assert sum(bumped) / len(bumped) > result.ad


class TestMeanAverageDifference:
    def _result(self, iid, ad):
        pair = build_perturbation_pair(
            make_expl(["a"], [1.0], instance_id=iid),
            make_expl(["a"], [1.0], instance_id=iid),
            "mask",
        )
        res = average_difference(pair)
        object.__setattr__(res, "ad", ad)
        return res

    def test_mean(self):
        assert mean_average_difference([self._result("i1", 0.1), self._result("i2", 0.3)]) == pytest.approx(0.2)

    def test_single(self):
        assert mean_average_difference([self._result("i1", 0.42)]) == 0.42

    def test_three(self):
        results = [self._result(f"i{n}", ad) for n, ad in ((1, 0.0), (2, 0.0), (3, 0.6))]
        assert mean_average_difference(results) == pytest.approx(0.2, abs=1e-12)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            mean_average_difference([])

    def test_flat_and_nested_sums_agree_bitwise(self):
        rng = np.random.default_rng(3)
        results = []
        for i in range(50):
            k = int(rng.integers(1, 8))
            original = make_expl([f"w{j}" for j in range(k)], rng.normal(size=k) + 0.01,
                                 instance_id=f"i{i:03d}")
            keep = rng.random(size=k) > 0.3
            ptokens = [t for t, kp in zip(original.tokens, keep) if kp] or ["other"]
            pscores = list(rng.normal(size=len(ptokens)) + 0.01)
            perturbed = make_expl(ptokens, pscores, instance_id=f"i{i:03d}")
            results.append(average_difference(build_perturbation_pair(original, perturbed, "delete")))
        # dataset mean of per-instance means vs the same fold written as one nested sum
        flat = mean_average_difference(results)
        ordered = sorted(results, key=lambda r: r.instance_id)
        total = 0.0
        for r in ordered:
            ds = [d for _, _, d in r.per_word]
            inner = 0.0
            for d in ds:
                inner += d
            total += inner / len(ds)
        nested = total / len(ordered)
        assert flat == nested  # bit-for-bit under sorted accumulation


class TestPerturbationPlan:
    def test_quarter_fraction_picks_top_index(self):
        rec = make_expl(["a", "b", "c", "d"], [0.1, 0.9, 0.3, 0.2])
        plan = make_perturbation_plan(rec, "mask", 0.25, "high", seed=1)
        assert plan.actions == ((1, "mask", "high"),)

    def test_full_fraction_covers_all(self):
        rec = make_expl(["a", "b", "c", "d"], [0.1, 0.9, 0.3, 0.2])
        plan = make_perturbation_plan(rec, "delete", 1.0, "high", seed=1)
        assert sorted(i for i, _, _ in plan.actions) == [0, 1, 2, 3]

    def test_low_tier_picks_smallest_magnitude(self):
        rec = make_expl(["a", "b", "c", "d"], [0.1, 0.9, 0.3, 0.2])
        plan = make_perturbation_plan(rec, "mask", 0.25, "low", seed=1)
        assert plan.actions == ((0, "mask", "low"),)

    def test_deterministic(self):
        rec = make_expl(["a", "b", "c"], [0.5, 0.2, 0.3])
        p1 = make_perturbation_plan(rec, "synonym", 0.5, "high", seed=9)
        p2 = make_perturbation_plan(rec, "synonym", 0.5, "high", seed=9)
        assert p1 == p2

    @pytest.mark.parametrize("fraction", [0.0, -0.5, 1.2])
    def test_fraction_out_of_range(self, fraction):
        with pytest.raises(FractionOutOfRange):
            make_perturbation_plan(make_expl(["a"], [1.0]), "mask", fraction, "high", 0)

    def test_wire_round_trip(self):
        plan = make_perturbation_plan(make_expl(["a", "b"], [0.7, 0.3]), "mask", 0.5, "low", 4)
        assert plan_from_wire(plan_to_wire(plan)) == plan


class TestOracleEquivalence:
    def test_randomized_pairs_match_naive_evaluation(self):
        vocab = [f"w{i}" for i in range(9)]  # small vocab forces duplicates
        rng = np.random.default_rng(2024)
        for i in range(500):
            k = int(rng.integers(1, 13))
            tokens = list(rng.choice(vocab, size=k))
            scores = rng.normal(size=k)
            if not np.any(scores):
                continue
            # random edit: drop some words, maybe add noise words, shuffle
            keep = rng.random(size=k) > 0.25
            ptokens = [t for t, kp in zip(tokens, keep) if kp]
            for _ in range(int(rng.integers(0, 3))):
                ptokens.append(str(rng.choice(vocab)))
            if not ptokens:
                ptokens = ["filler"]
            rng.shuffle(ptokens)
            pscores = rng.normal(size=len(ptokens))
            if not np.any(pscores):
                continue
            original = make_expl(tokens, scores, instance_id=f"i{i:04d}")
            perturbed = make_expl(ptokens, pscores, instance_id=f"i{i:04d}")
            pair = build_perturbation_pair(original, perturbed, "delete")
            expected_ad, expected_ds = naive_ad(tokens, list(scores), ptokens, list(pscores))
            result = average_difference(pair)
            assert result.ad == pytest.approx(expected_ad, abs=1e-12)
            assert [d for _, _, d in result.per_word] == pytest.approx(expected_ds, abs=1e-12)
            for k_i in range(original.token_count):
                assert word_difference(normalized_pair(pair), k_i) == pytest.approx(
                    expected_ds[k_i], abs=1e-12
                )
            # with L1-normalized scores every d(k) is bounded by 1
            assert all(0.0 <= d <= 1.0 + 1e-12 for d in expected_ds)
            assert 0.0 <= result.ad <= 1.0 + 1e-12

    def test_ad_zero_iff_identical_normalized_scores(self):
        rec = make_expl(["a", "b"], [0.25, 0.75])
        scaled = make_expl(["a", "b"], [1.0, 3.0])  # same after normalization
        pair = build_perturbation_pair(rec, scaled, "synonym")
        assert average_difference(pair).ad == pytest.approx(0.0, abs=1e-15)

    def test_sign_flip_at_equal_importance_is_stable(self):
        rec = make_expl(["a", "b"], [0.25, 0.75])
        flipped = make_expl(["a", "b"], [-0.25, 0.75])
        pair = build_perturbation_pair(rec, flipped, "synonym")
        assert average_difference(pair).ad == 0.0
