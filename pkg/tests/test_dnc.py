"""Similarity matrices, row sorting, the identity score, and rank statistics."""

from __future__ import annotations

import numpy as np
import pytest

from mudikit import (
    CountMismatch,
    DncConfig,
    EmbeddingSet,
    SimilarityPair,
    auroc,
    build_matrices,
    dnc_score,
    mean_similarity_baseline,
    row_wise_sort,
    spearman,
    subject_similarity,
)
from mudikit.errors import ContractError, ParameterError, StatisticUndefinedError


def unit_sets(rng: np.random.Generator, count: int, dim: int = 6) -> list[EmbeddingSet]:
    """Random single-or-multi vector embedding sets with unit rows."""
    sets = []
    for i in range(count):
        vectors = rng.normal(size=(int(rng.integers(1, 4)), dim))
        sets.append(EmbeddingSet.normalized(f"subject-{i}", vectors))
    return sets


# -- brute-force oracles -----------------------------------------------------


def rank_average(values: np.ndarray) -> np.ndarray:
    """Fractional ranks with ties averaged, by direct counting."""
    ranks = np.empty(values.size)
    for i, v in enumerate(values):
        less = int(np.sum(values < v))
        equal = int(np.sum(values == v))
        ranks[i] = less + (equal + 1) / 2.0
    return ranks


def spearman_oracle(x: np.ndarray, y: np.ndarray) -> float:
    rx = rank_average(np.asarray(x, dtype=np.float64))
    ry = rank_average(np.asarray(y, dtype=np.float64))
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float((rx @ ry) / np.sqrt((rx @ rx) * (ry @ ry)))


def auroc_oracle(scores: np.ndarray, labels: np.ndarray) -> float:
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (pos.size * neg.size)


class TestEmbeddingSet:
    def test_unit_norm_enforced(self):
        with pytest.raises(ParameterError):
            EmbeddingSet("s", np.array([[3.0, 4.0]]))

    def test_normalized_constructor(self):
        es = EmbeddingSet.normalized("s", np.array([[3.0, 4.0]]))
        np.testing.assert_allclose(es.vectors, [[0.6, 0.8]])
        assert (es.count, es.dim) == (1, 2)

    def test_zero_vector_rejected(self):
        with pytest.raises(ParameterError):
            EmbeddingSet.normalized("s", np.zeros((1, 3)))

    def test_empty_id_rejected(self):
        with pytest.raises(ParameterError):
            EmbeddingSet("", np.array([[1.0, 0.0]]))


class TestSubjectSimilarity:
    def test_identical_single_vectors(self):
        a = EmbeddingSet("a", np.array([[1.0, 0.0, 0.0]]))
        assert subject_similarity(a, a) == 1.0

    def test_orthogonal_vectors(self):
        a = EmbeddingSet("a", np.array([[1.0, 0.0]]))
        b = EmbeddingSet("b", np.array([[0.0, 1.0]]))
        assert subject_similarity(a, b) == 0.0

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(42)
        a = EmbeddingSet.normalized("a", rng.normal(size=(2, 5)))
        b = EmbeddingSet.normalized("b", rng.normal(size=(3, 5)))
        expected = np.mean(
            [float(u @ v) for u in a.vectors for v in b.vectors]
        )
        assert abs(subject_similarity(a, b) - expected) < 1e-12
        assert subject_similarity(a, b) == subject_similarity(b, a)

    def test_dimension_mismatch(self):
        a = EmbeddingSet("a", np.array([[1.0, 0.0]]))
        b = EmbeddingSet("b", np.array([[1.0, 0.0, 0.0]]))
        with pytest.raises(ContractError):
            subject_similarity(a, b)


class TestRowWiseSort:
    def test_aligned_matrix_unchanged(self):
        matrix = np.array([[0.9, 0.1], [0.2, 0.8]])
        assert np.array_equal(row_wise_sort(matrix), matrix)

    def test_hand_traced_swap(self):
        matrix = np.array([[0.2, 0.9], [0.95, 0.1]])
        expected = np.array([[0.95, 0.1], [0.2, 0.9]])
        assert np.array_equal(row_wise_sort(matrix), expected)

    def test_all_equal_ties_resolve_to_identity(self):
        matrix = np.full((3, 3), 0.5)
        assert np.array_equal(row_wise_sort(matrix), matrix)

    def test_greedy_and_sequential_can_differ(self):
        matrix = np.array([
            [0.9, 0.95, 0.0],
            [0.8, 0.1, 0.0],
            [0.0, 0.0, 0.5],
        ])
        greedy = row_wise_sort(matrix, "greedy")
        assert np.array_equal(greedy, matrix[[1, 0, 2]])
        sequential = row_wise_sort(matrix, "sequential")
        assert np.array_equal(sequential, matrix)

    def test_output_is_row_permutation(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            n = int(rng.integers(2, 6))
            matrix = rng.normal(size=(n, n))
            for method in ("greedy", "sequential"):
                out = row_wise_sort(matrix, method)
                original = {row.tobytes() for row in matrix}
                sorted_rows = {row.tobytes() for row in out}
                assert original == sorted_rows

    def test_validation(self):
        with pytest.raises(ParameterError):
            row_wise_sort(np.zeros((2, 3)))
        with pytest.raises(ParameterError):
            row_wise_sort(np.zeros((2, 2)), "fancy")
        with pytest.raises(ParameterError):
            row_wise_sort(np.full((2, 2), np.nan))


class TestBuildMatrices:
    def test_count_mismatch_is_a_value(self):
        rng = np.random.default_rng(0)
        refs = unit_sets(rng, 2)
        detected = unit_sets(rng, 3)
        outcome = build_matrices(detected, refs)
        assert outcome == CountMismatch(detected=3, expected=2)

    def test_self_match_gives_equal_matrices(self):
        rng = np.random.default_rng(1)
        refs = unit_sets(rng, 3)
        pair = build_matrices(refs, refs)
        assert np.array_equal(pair.s_gt, pair.s_dc)
        assert pair.reference_order == ("subject-0", "subject-1", "subject-2")

    def test_known_cross_similarity(self):
        v2 = np.array([0.2, np.sqrt(1 - 0.04)])
        refs = [
            EmbeddingSet("a", np.array([[1.0, 0.0]])),
            EmbeddingSet("b", v2[np.newaxis, :]),
        ]
        pair = build_matrices(refs, refs)
        np.testing.assert_allclose(pair.s_gt, [[1.0, 0.2], [0.2, 1.0]], atol=1e-12)

    def test_empty_references_rejected(self):
        with pytest.raises(ParameterError):
            build_matrices([], [])

    def test_sort_method_flows_from_config(self):
        rng = np.random.default_rng(2)
        refs = unit_sets(rng, 3)
        detected = [refs[1], refs[0], refs[2]]
        for method in ("greedy", "sequential"):
            pair = build_matrices(detected, refs, DncConfig(sort_method=method))
            assert np.array_equal(pair.s_dc, pair.s_gt)


class TestDncScore:
    def test_perfect_match(self):
        rng = np.random.default_rng(3)
        refs = unit_sets(rng, 4)
        assert dnc_score(build_matrices(refs, refs)) == 1.0

    def test_count_mismatch_scores_zero(self):
        assert dnc_score(CountMismatch(detected=1, expected=2)) == 0.0

    def test_two_by_two_hand_case(self):
        pair = SimilarityPair(
            s_gt=np.array([[1.0, 0.2], [0.2, 1.0]]),
            s_dc=np.array([[0.9, 0.3], [0.3, 0.9]]),
            reference_order=("a", "b"),
        )
        assert abs(dnc_score(pair) - 0.96) < 1e-12

    def test_score_not_clamped(self):
        pair = SimilarityPair(
            s_gt=np.ones((2, 2)),
            s_dc=-np.ones((2, 2)),
            reference_order=("a", "b"),
        )
        assert dnc_score(pair) == 1.0 - 16.0

    def test_detection_order_invariance(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = int(rng.integers(2, 6))
            refs = unit_sets(rng, n)
            detected = unit_sets(rng, n)
            base = dnc_score(build_matrices(detected, refs))
            perm = rng.permutation(n)
            shuffled = [detected[i] for i in perm]
            assert abs(dnc_score(build_matrices(shuffled, refs)) - base) <= 1e-12

    def test_degradation_is_monotone_on_average(self):
        rng = np.random.default_rng(5)
        refs = [EmbeddingSet.normalized(f"s{i}", rng.normal(size=(1, 8))) for i in range(3)]
        magnitudes = [0.0, 0.3, 0.8, 2.0]
        means = []
        for magnitude in magnitudes:
            scores = []
            for _ in range(100):
                detected = [
                    EmbeddingSet.normalized(
                        s.subject_id, s.vectors + magnitude * rng.normal(size=s.vectors.shape)
                    )
                    for s in refs
                ]
                scores.append(dnc_score(build_matrices(detected, refs)))
            means.append(np.mean(scores))
        assert all(means[i] >= means[i + 1] for i in range(len(means) - 1))


class TestMeanSimilarityBaseline:
    def test_single_reference_equal(self):
        a = EmbeddingSet("a", np.array([[0.0, 1.0]]))
        assert mean_similarity_baseline(a, [a]) == 1.0

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(6)
        generated = EmbeddingSet.normalized("g", rng.normal(size=(2, 4)))
        refs = unit_sets(rng, 5, dim=4)
        expected = np.mean([subject_similarity(generated, r) for r in refs])
        assert mean_similarity_baseline(generated, refs) == pytest.approx(expected, abs=1e-12)

    def test_empty_references_rejected(self):
        a = EmbeddingSet("a", np.array([[1.0, 0.0]]))
        with pytest.raises(ParameterError):
            mean_similarity_baseline(a, [])


class TestSpearman:
    def test_identity_and_reversal(self):
        x = [3.0, 1.0, 4.0, 1.5, 5.0]
        assert spearman(x, x) == 1.0
        assert spearman(x, [-v for v in x]) == -1.0

    def test_tied_case_matches_oracle(self):
        x = np.array([1.0, 2.0, 2.0, 3.0, 4.0, 5.0])
        y = np.array([2.0, 1.0, 4.0, 4.0, 5.0, 6.0])
        assert spearman(x, y) == spearman_oracle(x, y)

    def test_randomized_corpus_matches_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(500):
            n = int(rng.integers(2, 7))
            x = rng.integers(0, 4, size=n).astype(float)
            y = rng.integers(0, 4, size=n).astype(float)
            if np.all(x == x[0]) or np.all(y == y[0]):
                continue
            assert spearman(x, y) == spearman_oracle(x, y)

    def test_constant_input_undefined(self):
        with pytest.raises(StatisticUndefinedError):
            spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_validation(self):
        with pytest.raises(ContractError):
            spearman([1.0, 2.0], [1.0, 2.0, 3.0])
        with pytest.raises(ParameterError):
            spearman([1.0], [2.0])
        with pytest.raises(ParameterError):
            spearman([[1.0, 2.0]], [[1.0, 2.0]])


class TestAuroc:
    def test_perfect_separation(self):
        assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_ties_give_half(self):
        assert auroc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5

    def test_eight_element_mixed_case(self):
        scores = np.array([0.1, 0.4, 0.35, 0.8, 0.35, 0.9, 0.5, 0.2])
        labels = np.array([0, 0, 1, 1, 0, 1, 0, 1])
        assert auroc(scores, labels) == auroc_oracle(scores, labels)

    def test_randomized_corpus_matches_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            n = int(rng.integers(2, 7))
            scores = rng.integers(0, 3, size=n).astype(float)
            labels = rng.integers(0, 2, size=n)
            if labels.sum() in (0, n):
                continue
            assert auroc(scores, labels) == auroc_oracle(scores, labels)

    def test_single_class_undefined(self):
        with pytest.raises(StatisticUndefinedError):
            auroc([0.1, 0.2], [1, 1])

    def test_label_validation(self):
        with pytest.raises(ParameterError):
            auroc([0.1, 0.2], [0, 2])
        with pytest.raises(ContractError):
            auroc([0.1, 0.2, 0.3], [0, 1])
