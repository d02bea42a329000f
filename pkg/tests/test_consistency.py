from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import make_expl
from xaieval.consistency import (
    average_attention,
    consistency,
    rank_with_ties,
    spearman_rho,
    vector_distance,
)
from xaieval.corpus import CorpusIndex
from xaieval.errors import (
    AlignmentError,
    DegenerateSeries,
    InsufficientInstances,
    LengthMismatch,
    ZeroVector,
)
from xaieval.records import AttentionSummary


def oracle_ranks(values):
    """Average ranks computed from counts: smaller + (equal + 1) / 2."""
    return [
        sum(1 for y in values if y < x) + (sum(1 for y in values if y == x) + 1) / 2.0
        for x in values
    ]


def oracle_spearman(xs, ys):
    """Independent Spearman: count-based average ranks + textbook Pearson."""
    rx, ry = oracle_ranks(xs), oracle_ranks(ys)
    n = len(xs)
    mx, my = sum(rx) / n, sum(ry) / n
    sxx = sum((a - mx) ** 2 for a in rx)
    syy = sum((b - my) ** 2 for b in ry)
    if sxx == 0 or syy == 0:
        return None  # degenerate
    sxy = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    return sxy / math.sqrt(sxx * syy)


class TestRanks:
    def test_average_ranks_for_ties(self):
        assert rank_with_ties([1.0, 2.0, 2.0, 4.0]) == [1.0, 2.5, 2.5, 4.0]

    def test_matches_count_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            values = list(rng.integers(0, 5, size=int(rng.integers(1, 10))).astype(float))
            assert rank_with_ties(values) == pytest.approx(oracle_ranks(values), abs=1e-12)


class TestSpearman:
    def test_perfect_monotone(self):
        assert spearman_rho([1, 2, 3], [10, 20, 30]) == 1.0

    def test_reversed(self):
        assert spearman_rho([1, 2, 3], [3, 2, 1]) == -1.0

    def test_tied_series_against_oracle(self):
        xs, ys = [1.0, 2.0, 2.0, 4.0], [1.0, 3.0, 2.0, 4.0]
        expected = oracle_spearman(xs, ys)
        assert expected == pytest.approx(0.9486832980505138, abs=1e-12)
        assert spearman_rho(xs, ys) == pytest.approx(expected, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            spearman_rho([1, 2, 3], [1, 2])

    def test_too_short(self):
        with pytest.raises(InsufficientInstances):
            spearman_rho([1, 2], [1, 2])

    def test_degenerate_series(self):
        with pytest.raises(DegenerateSeries):
            spearman_rho([5, 5, 5], [1, 2, 3])
        with pytest.raises(DegenerateSeries):
            spearman_rho([1, 2, 3], [7, 7, 7])

    def test_random_series_against_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(300):
            n = int(rng.integers(3, 12))
            xs = list(rng.integers(0, 6, size=n).astype(float))
            ys = list(rng.integers(0, 6, size=n).astype(float))
            expected = oracle_spearman(xs, ys)
            if expected is None:
                with pytest.raises(DegenerateSeries):
                    spearman_rho(xs, ys)
                continue
            got = spearman_rho(xs, ys)
            assert got == pytest.approx(expected, abs=1e-12)
            assert -1.0 <= got <= 1.0

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(17)
        transforms = [lambda x: 2.0 * x + 1.0, math.exp, lambda x: x**3]
        for _ in range(200):
            n = int(rng.integers(3, 10))
            xs = list(rng.integers(0, 5, size=n).astype(float))
            ys = list(rng.normal(size=n))
            if oracle_spearman(xs, ys) is None:
                continue
            base = spearman_rho(xs, ys)
            f = transforms[int(rng.integers(0, len(transforms)))]
            assert spearman_rho([f(x) for x in xs], ys) == pytest.approx(base, abs=1e-12)
            assert spearman_rho(xs, [f(y) for y in ys]) == pytest.approx(base, abs=1e-12)


class TestVectorDistance:
    def test_cosine_identical_direction(self):
        assert vector_distance([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert vector_distance([1.0, 2.0], [2.0, 4.0], "cosine") == pytest.approx(0.0, abs=1e-12)

    def test_cosine_orthogonal(self):
        assert vector_distance([1.0, 0.0], [0.0, 1.0], "cosine") == pytest.approx(1.0)

    def test_euclidean_three_four_five(self):
        assert vector_distance([0.0, 0.0], [3.0, 4.0], "euclidean") == pytest.approx(5.0)

    def test_zero_vector_cosine_only(self):
        with pytest.raises(ZeroVector):
            vector_distance([0.0, 0.0], [1.0, 0.0], "cosine")
        assert vector_distance([0.0, 0.0], [1.0, 0.0], "euclidean") == 1.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            vector_distance([1.0], [1.0, 2.0])

    def test_cosine_scale_invariant_euclidean_not(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            u = rng.normal(size=4) + 2.0
            v = rng.normal(size=4) + 2.0
            c = float(rng.uniform(0.5, 9.0))
            assert vector_distance(c * u, v, "cosine") == pytest.approx(
                vector_distance(u, v, "cosine"), abs=1e-12
            )
            if not np.allclose(u * (c - 1), 0):
                assert vector_distance(c * u, v, "euclidean") != pytest.approx(
                    vector_distance(u, v, "euclidean"), abs=1e-12
                )


class TestAverageAttention:
    def _summary(self, vectors, seed="s1"):
        return AttentionSummary("ds", "i001", "m", seed, len(vectors), tuple(map(tuple, vectors)))

    def test_element_mean(self):
        out = average_attention(self._summary([[1.0, 0.0], [0.0, 1.0]]))
        assert out.tolist() == [0.5, 0.5]

    def test_pre_averaged_identity(self):
        out = average_attention(self._summary([[0.3, 0.7]]))
        assert out.tolist() == [0.3, 0.7]

    def test_identical_layers_idempotent(self):
        out = average_attention(self._summary([[0.2, 0.8]] * 3))
        assert out.tolist() == [0.2, 0.8]

    def test_commutes_with_layer_permutation(self):
        rng = np.random.default_rng(31)
        layers = [list(rng.random(5)) for _ in range(4)]
        base = average_attention(self._summary(layers))
        rng.shuffle(layers)
        assert average_attention(self._summary(layers)).tolist() == pytest.approx(
            base.tolist(), abs=1e-15
        )


def build_seed_corpus(d_scale=1.0, n=5, zero_instance=False):
    """Corpus with controlled cross-seed differences; distances grow with instance index.

    Explanation scores are emitted pre-normalized (unit L1 mass) so the
    designed euclidean gaps survive the metric's internal normalization.
    """
    corpus = CorpusIndex()
    rng = np.random.default_rng(7)
    for i in range(n):
        iid = f"i{i:03d}"
        base_att = rng.random(4) + 0.5
        shift = np.zeros(4)
        shift[0] = 0.08 * (i + 1) * d_scale
        for seed, att in (("s1", base_att), ("s2", base_att + shift)):
            corpus.attention[("ds", iid, "m", seed)] = AttentionSummary(
                "ds", iid, "m", seed, 1, (tuple(att),)
            )
        c = 0.04 * (i + 1) * d_scale
        seed_scores = {
            "s1": np.array([0.25, 0.25, 0.25, 0.25]),
            "s2": np.array([0.25 + c, 0.25 - c, 0.25, 0.25]),
        }
        for seed, scores in seed_scores.items():
            if zero_instance and i == 0 and seed == "s2":
                scores = np.zeros(4)
            corpus.explanations[("ds", iid, f"m@{seed}", "x", "pos")] = make_expl(
                [f"w{j}" for j in range(4)], scores, instance_id=iid,
                model_id=f"m@{seed}",
            )
    return corpus


class TestConsistencyOperation:
    def test_identical_seeds_degenerate(self):
        corpus = build_seed_corpus(d_scale=0.0)
        with pytest.raises(DegenerateSeries):
            consistency(corpus, "ds", "m", "s1", "s2", "x")

    def test_matches_brute_force_oracle(self):
        corpus = build_seed_corpus()
        result = consistency(corpus, "ds", "m", "s1", "s2", "x")
        xs = [d.d_attention for d in result.per_instance]
        ys = [d.d_explanation for d in result.per_instance]
        assert result.rho == pytest.approx(oracle_spearman(xs, ys), abs=1e-12)
        assert result.n_instances == 5
        assert -1.0 <= result.rho <= 1.0

    def test_symmetric_in_seed_order(self):
        corpus = build_seed_corpus()
        forward = consistency(corpus, "ds", "m", "s1", "s2", "x")
        backward = consistency(corpus, "ds", "m", "s2", "s1", "x")
        assert backward.rho == pytest.approx(forward.rho, abs=1e-12)
        for a, b in zip(forward.per_instance, backward.per_instance):
            assert b.d_attention == pytest.approx(a.d_attention, abs=1e-12)
            assert b.d_explanation == pytest.approx(a.d_explanation, abs=1e-12)

    def test_proportional_distances_give_perfect_rho(self):
        corpus = build_seed_corpus()
        result = consistency(corpus, "ds", "m", "s1", "s2", "x", "euclidean")
        # distances were built strictly increasing per instance in both signals
        assert result.rho == 1.0

    def test_insufficient_instances(self):
        corpus = build_seed_corpus(n=2)
        with pytest.raises(InsufficientInstances):
            consistency(corpus, "ds", "m", "s1", "s2", "x")

    def test_degenerate_instance_is_skipped(self):
        corpus = build_seed_corpus(zero_instance=True)
        result = consistency(corpus, "ds", "m", "s1", "s2", "x")
        assert result.n_instances == 4

    def test_alignment_error_on_token_count_drift(self):
        corpus = build_seed_corpus()
        corpus.attention[("ds", "i000", "m", "s2")] = AttentionSummary(
            "ds", "i000", "m", "s2", 1, ((0.5, 0.5),)
        )
        with pytest.raises(AlignmentError):
            consistency(corpus, "ds", "m", "s1", "s2", "x")
