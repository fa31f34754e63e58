import math

import numpy as np
import pytest

from rdskit.dispersion import (
    EmbeddingSet,
    ProbabilityWeights,
    avg_pairwise_cosine,
    centroid,
    eigen_embed,
    l2_normalize,
    probs_from_anll,
    rds,
    rds_l2,
    rds_per_sample,
    rds_w_per_sample,
    rds_weighted,
    score_set,
    weighted_centroid,
)
from rdskit.errors import DegenerateEmbedding, InvalidLikelihood, LengthMismatch


def es(*vectors) -> EmbeddingSet:
    return EmbeddingSet.from_vectors(list(vectors))


def random_sets(count, seed=0, dims=(2, 8, 384), sizes=(2, 5, 10, 40)):
    rng = np.random.default_rng(seed)
    for i in range(count):
        d = dims[i % len(dims)]
        n = sizes[(i // len(dims)) % len(sizes)]
        g = rng.standard_normal((n, d))
        yield EmbeddingSet.from_vectors(g / np.linalg.norm(g, axis=1, keepdims=True))


class TestL2Normalize:
    def test_three_four_five(self):
        assert np.array_equal(l2_normalize([3.0, 4.0]), [0.6, 0.8])

    def test_already_unit(self):
        assert np.array_equal(l2_normalize([1.0, 0.0]), [1.0, 0.0])

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateEmbedding):
            l2_normalize([0.0, 0.0])

    def test_direction_preserved(self):
        v = l2_normalize([-2.0, 0.0, 0.0])
        assert v[0] == -1.0


class TestEmbeddingSet:
    def test_singleton_rejected(self):
        with pytest.raises(ValueError):
            EmbeddingSet.from_vectors([[1.0, 0.0]])

    def test_off_sphere_renormalized_with_warning(self):
        with pytest.warns(RuntimeWarning):
            s = EmbeddingSet.from_vectors([[2.0, 0.0], [0.0, 3.0]])
        assert np.allclose(np.linalg.norm(s.vectors, axis=1), 1.0)

    def test_off_sphere_rejected_when_not_renormalizing(self):
        with pytest.raises(ValueError):
            EmbeddingSet.from_vectors([[2.0, 0.0], [0.0, 1.0]], renormalize=False)

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateEmbedding):
            EmbeddingSet.from_vectors([[0.0, 0.0], [1.0, 0.0]])

    def test_vectors_read_only(self):
        s = es([1.0, 0.0], [0.0, 1.0])
        with pytest.raises(ValueError):
            s.vectors[0, 0] = 5.0

    def test_duplicates_allowed(self):
        s = es([1.0, 0.0], [1.0, 0.0], [0.0, 1.0])
        assert s.n == 3


class TestCentroid:
    def test_antipodal_cancels(self):
        assert np.array_equal(centroid(es([1.0, 0.0], [-1.0, 0.0])), [0.0, 0.0])

    def test_mean(self):
        assert np.array_equal(centroid(es([1.0, 0.0], [0.0, 1.0])), [0.5, 0.5])

    def test_identical_vectors_exact(self):
        v = l2_normalize([0.3, 0.7, 0.1])
        s = EmbeddingSet.from_vectors([v] * 3)
        assert np.array_equal(centroid(s), v)

    def test_norm_at_most_one(self):
        for s in random_sets(50, seed=5):
            assert np.linalg.norm(centroid(s)) <= 1.0 + 1e-12


class TestWeightedCentroid:
    def test_uniform_matches_unweighted(self):
        s = es([1.0, 0.0], [0.0, 1.0])
        p = ProbabilityWeights.uniform(2)
        assert np.allclose(weighted_centroid(s, p), centroid(s))

    def test_point_mass(self):
        s = es([1.0, 0.0], [0.0, 1.0])
        p = ProbabilityWeights.from_values([1.0, 0.0])
        assert np.array_equal(weighted_centroid(s, p), [1.0, 0.0])

    def test_convex_combination(self):
        s = es([1.0, 0.0], [0.0, 1.0])
        p = ProbabilityWeights.from_values([0.75, 0.25])
        assert np.array_equal(weighted_centroid(s, p), [0.75, 0.25])

    def test_length_mismatch(self):
        s = es([1.0, 0.0], [0.0, 1.0])
        with pytest.raises(LengthMismatch):
            weighted_centroid(s, ProbabilityWeights.uniform(3))


class TestRds:
    def test_identical_is_zero(self):
        assert rds(es([1.0, 0.0], [1.0, 0.0])) == 0.0

    def test_orthogonal_pair(self):
        # centered vectors (+-0.5, -+0.5), each with l1 norm 1
        value = rds(es([1.0, 0.0], [0.0, 1.0]))
        s = es([1.0, 0.0], [0.0, 1.0])
        direct = sum(np.abs(v - centroid(s)).sum() for v in s.vectors)
        assert value == pytest.approx(direct, abs=0) == pytest.approx(2.0, abs=1e-12)

    def test_antipodal_pair(self):
        value = rds(es([1.0, 0.0], [-1.0, 0.0]))
        assert value == pytest.approx(2.0, abs=1e-12)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        for s in random_sets(20, seed=11):
            perm = rng.permutation(s.n)
            shuffled = EmbeddingSet.from_vectors(s.vectors[perm])
            assert rds(shuffled) == pytest.approx(rds(s), rel=1e-12)
            assert np.allclose(
                np.sort(rds_per_sample(shuffled)), np.sort(rds_per_sample(s))
            )


class TestRdsL2:
    def test_identical_is_zero(self):
        assert rds_l2(es([0.0, 1.0], [0.0, 1.0])) == 0.0

    def test_orthogonal_pair(self):
        assert rds_l2(es([1.0, 0.0], [0.0, 1.0])) == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_antipodal_pair(self):
        assert rds_l2(es([1.0, 0.0], [-1.0, 0.0])) == pytest.approx(2.0, abs=1e-12)

    def test_l1_dominates_l2(self):
        for s in random_sets(100, seed=7):
            assert rds(s) >= rds_l2(s) - 1e-12


class TestEigenEmbed:
    def test_collapsed(self):
        assert eigen_embed(es([1.0, 0.0], [1.0, 0.0])) == 0.0

    def test_antipodal_maximum(self):
        assert eigen_embed(es([1.0, 0.0], [-1.0, 0.0])) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_pair(self):
        assert eigen_embed(es([1.0, 0.0], [0.0, 1.0])) == pytest.approx(0.5, abs=1e-12)

    def test_distance_form_equals_centroid_form(self):
        for s in random_sets(200, seed=13):
            ub = s.vectors.mean(axis=0)
            assert eigen_embed(s) == pytest.approx(1.0 - float(ub @ ub), abs=1e-9)

    def test_bound_chain(self):
        # rds >= sqrt(n * ee) >= sqrt(n) * ee >= ee
        for s in random_sets(200, seed=17):
            ee = eigen_embed(s)
            r = rds(s)
            assert r >= math.sqrt(s.n * ee) - 1e-9
            assert math.sqrt(s.n * ee) >= math.sqrt(s.n) * ee - 1e-9
            assert math.sqrt(s.n) * ee >= ee - 1e-9

    def test_strict_gap_when_dispersed(self):
        for s in random_sets(100, seed=19):
            ee = eigen_embed(s)
            if ee > 1e-9:
                assert rds(s) > ee


class TestWeighted:
    def test_point_mass_is_zero(self):
        s = es([1.0, 0.0], [0.0, 1.0])
        p = ProbabilityWeights.from_values([1.0, 0.0])
        assert rds_weighted(s, p) == 0.0

    def test_uniform_reduction(self):
        s = es([1.0, 0.0], [0.0, 1.0])
        assert rds_weighted(s, ProbabilityWeights.uniform(2)) == pytest.approx(
            rds(s) / 2, abs=1e-12
        )

    def test_skewed_weights(self):
        s = es([1.0, 0.0], [0.0, 1.0])
        p = ProbabilityWeights.from_values([0.75, 0.25])
        # distances to (0.75, 0.25): 0.5 and 1.5; weighted sum by hand
        assert rds_weighted(s, p) == pytest.approx(0.75 * 0.5 + 0.25 * 1.5, abs=1e-12)
        assert np.allclose(rds_w_per_sample(s, p), [0.5, 1.5])

    def test_uniform_per_sample_matches(self):
        for s in random_sets(30, seed=23):
            p = ProbabilityWeights.uniform(s.n)
            assert np.allclose(rds_w_per_sample(s, p), rds_per_sample(s), atol=1e-9)

    def test_identical_vectors_zero_per_sample(self):
        s = es([1.0, 0.0], [1.0, 0.0])
        p = ProbabilityWeights.from_values([0.3, 0.7])
        assert np.array_equal(rds_w_per_sample(s, p), [0.0, 0.0])

    def test_weighted_sum_consistency(self):
        rng = np.random.default_rng(29)
        for s in random_sets(50, seed=31):
            w = rng.gamma(1.0, 1.0, size=s.n)
            p = ProbabilityWeights.from_values(w / w.sum())
            total = rds_weighted(s, p)
            assert float(p.weights @ rds_w_per_sample(s, p)) == pytest.approx(total, rel=1e-6)

    def test_length_mismatch(self):
        s = es([1.0, 0.0], [0.0, 1.0])
        with pytest.raises(LengthMismatch):
            rds_weighted(s, ProbabilityWeights.uniform(5))


class TestPerSample:
    def test_identical(self):
        assert np.array_equal(rds_per_sample(es([1.0, 0.0], [1.0, 0.0])), [0.0, 0.0])

    def test_symmetric_pairs(self):
        assert np.allclose(rds_per_sample(es([1.0, 0.0], [0.0, 1.0])), [1.0, 1.0])
        assert np.allclose(rds_per_sample(es([1.0, 0.0], [-1.0, 0.0])), [1.0, 1.0])

    def test_sums_to_rds(self):
        for s in random_sets(100, seed=37):
            assert float(rds_per_sample(s).sum()) == pytest.approx(rds(s), rel=1e-6)


class TestAvgPairwiseCosine:
    def test_antipodal(self):
        assert avg_pairwise_cosine(es([1.0, 0.0], [-1.0, 0.0])) == pytest.approx(-1.0, abs=1e-12)

    def test_identical(self):
        s = es([1.0, 0.0], [1.0, 0.0], [1.0, 0.0])
        assert avg_pairwise_cosine(s) == pytest.approx(1.0, abs=1e-12)

    def test_four_axis_vectors(self):
        s = es([1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0])
        brute = 0.0
        for i in range(4):
            for j in range(4):
                if i != j:
                    brute += float(s.vectors[i] @ s.vectors[j])
        brute /= 4 * 3
        assert avg_pairwise_cosine(s) == pytest.approx(brute, abs=1e-12)
        assert avg_pairwise_cosine(s) == pytest.approx(-1.0 / 3.0, abs=1e-6)

    def test_zero_centroid_signature(self):
        # every zero-centroid set averages -1/(N-1) and each sample has an opposer
        rng = np.random.default_rng(41)
        for n in (2, 4, 6, 10):
            half = rng.standard_normal((n // 2, 3))
            half /= np.linalg.norm(half, axis=1, keepdims=True)
            s = EmbeddingSet.from_vectors(np.vstack([half, -half]))
            assert avg_pairwise_cosine(s) == pytest.approx(-1.0 / (n - 1), abs=1e-6)
            gram = s.vectors @ s.vectors.T
            np.fill_diagonal(gram, 0.0)
            assert np.all(gram.min(axis=1) < 0)


class TestProbsFromAnll:
    def test_equal_values(self):
        assert np.allclose(probs_from_anll([0.0, 0.0]).weights, [0.5, 0.5])

    def test_log_ratio(self):
        p = probs_from_anll([math.log(2), 2 * math.log(2)])
        assert np.allclose(p.weights, [2 / 3, 1 / 3])

    def test_constant_inputs_uniform(self):
        for c in (0.0, 5.0, 123.456):
            assert np.allclose(probs_from_anll([c, c, c]).weights, [1 / 3] * 3)

    def test_shift_invariance(self):
        base = np.array([0.2, 1.7, 0.9, 3.1])
        p0 = probs_from_anll(base)
        p1 = probs_from_anll(base + 57.0)
        assert np.allclose(p0.weights, p1.weights, atol=1e-12)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidLikelihood):
            probs_from_anll([0.5, float("inf")])
        with pytest.raises(InvalidLikelihood):
            probs_from_anll([float("nan")])

    def test_large_values_stable(self):
        p = probs_from_anll([1000.0, 1001.0])
        assert math.isfinite(float(p.weights.sum()))
        assert p.weights[0] > p.weights[1]


class TestProbabilityWeights:
    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            ProbabilityWeights.from_values([-0.1, 1.1])

    def test_sum_enforced(self):
        with pytest.raises(ValueError):
            ProbabilityWeights.from_values([0.5, 0.6])


class TestScoreSet:
    def test_bundles_everything(self):
        s = es([1.0, 0.0], [0.0, 1.0])
        p = ProbabilityWeights.from_values([0.75, 0.25])
        out = score_set(s, p)
        assert out.rds == rds(s)
        assert out.rds_l2 == rds_l2(s)
        assert out.eigen_embed == eigen_embed(s)
        assert out.rds_w == rds_weighted(s, p)
        assert np.array_equal(out.per_sample, rds_per_sample(s))
        assert np.array_equal(out.per_sample_w, rds_w_per_sample(s, p))

    def test_weights_optional(self):
        out = score_set(es([1.0, 0.0], [0.0, 1.0]))
        assert out.rds_w is None and out.per_sample_w is None
