"""
Distance Tests
Hamming variants, relabeling search and tree-distance inversion
"""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.distances import (
    best_relabeling, confusion_matrix, estimate_distance, estimate_distance_matrix, expected_hamming,
    normalized_hamming, pair_codes, pair_decode, pairwise_hamming, pairwise_matches,
    pairwise_relative_hamming, relative_hamming,
)
from src.errors import CorruptInputError, InvalidParamsError


def test_normalized_hamming_examples():
    assert normalized_hamming([1, 2, 3], [1, 2, 3]) == 0.0
    assert normalized_hamming([0, 0, 0], [1, 1, 1]) == 1.0
    assert normalized_hamming([0, 1, 2, 3], [0, 1, 2, 0]) == 0.25
    with pytest.raises(InvalidParamsError):
        normalized_hamming([0, 1], [0, 1, 2])


def test_relative_hamming_binary_swap():
    value, sigma = relative_hamming([0, 0, 1, 1], [1, 1, 0, 0], q=2)
    assert value == 0.0
    assert sigma.tolist() == [1, 0]


@given(st.permutations(list(range(5))), st.integers(0, 1000))
def test_relative_hamming_finds_relabeling(perm, seed):
    rng = np.random.default_rng(seed)
    a = np.concatenate([np.arange(5), rng.integers(0, 5, size=30)])
    pi = np.asarray(perm)
    value, sigma = relative_hamming(a, pi[a], q=5)
    assert value == 0.0
    assert np.array_equal(sigma, pi)


def test_relative_hamming_symmetry_and_bound():
    rng = np.random.default_rng(4)
    a, b = rng.integers(0, 4, size=(2, 200))
    ab, sigma = relative_hamming(a, b, 4)
    ba, _ = relative_hamming(b, a, 4)
    assert ab == pytest.approx(ba)
    assert ab <= normalized_hamming(a, b)
    assert normalized_hamming(sigma[a], b) == pytest.approx(ab)


def test_assignment_solver_agrees_with_exhaustive_search():
    rng = np.random.default_rng(12)
    for _ in range(20):
        confusion = rng.integers(0, 20, size=(5, 5))
        _, exhaustive = best_relabeling(confusion, exhaustive_max_q=6)
        _, solver = best_relabeling(confusion, exhaustive_max_q=2)
        assert exhaustive == solver


def test_confusion_matrix_counts():
    confusion = confusion_matrix([0, 1, 1, 2], [0, 0, 1, 2], q=3)
    assert confusion.tolist() == [[1, 0, 0], [1, 1, 0], [0, 0, 1]]


def test_pairwise_helpers_match_scalar_versions():
    rng = np.random.default_rng(0)
    reps = rng.integers(0, 3, size=(6, 40))
    matches = pairwise_matches(reps, 3)
    dist = pairwise_hamming(reps, 3)
    rel, sigmas = pairwise_relative_hamming(reps, 3)
    for u in range(6):
        for v in range(6):
            assert matches[u, v] == np.count_nonzero(reps[u] == reps[v])
            assert dist[u, v] == pytest.approx(normalized_hamming(reps[u], reps[v]))
            assert rel[u, v] == pytest.approx(relative_hamming(reps[u], reps[v], 3)[0])
            assert normalized_hamming(sigmas[u, v][reps[u]], reps[v]) == pytest.approx(rel[u, v])


def test_pair_codes_round_trip():
    reps = np.asarray([[0, 2, 1, 1], [2, 2, 0, 1]])
    codes = pair_codes(reps, 3)
    assert codes.tolist() == [[2, 4], [8, 1]]
    assert np.array_equal(pair_decode(codes, 3), reps)


# ============================================================================
# ESTIMATION
# ============================================================================

def test_estimate_distance_examples():
    assert estimate_distance(0.0, 0.5, 1.0, 1.0, q=4, r=2).distance == 0
    estimate = estimate_distance(0.5625, 0.5, 1.0, 1.0, q=4, r=2)
    assert estimate.distance == 2
    assert not estimate.far
    assert estimate.margin == pytest.approx(0.5)
    far = estimate_distance(0.75, 0.5, 1.0, 1.0, q=4, r=2)
    assert far.far
    assert far.distance == 6


@pytest.mark.parametrize("r", [1, 2, 3])
@pytest.mark.parametrize("lam,la,lb,q", [(0.9, 1.0, 1.0, 4), (0.7, 0.8, 0.6, 2), (0.45, 1.0, 0.9, 64)])
def test_inversion_is_identity_on_exact_inputs(r, lam, la, lb, q):
    for dist in range(0, 2 * r + 3):
        raw = expected_hamming(dist, lam, la, lb, q)
        assert estimate_distance(raw, lam, la, lb, q, r).distance == dist


def test_matrix_estimate_matches_scalar():
    raw = np.asarray([[0.0, 0.3], [0.3, 0.0]])
    distance, far, _ = estimate_distance_matrix(raw, 0.8, 1.0, 1.0, q=2, r=1)
    scalar = estimate_distance(0.3, 0.8, 1.0, 1.0, q=2, r=1)
    assert distance[0, 1] == scalar.distance
    assert far[0, 1] == scalar.far


def test_estimate_rejects_impossible_inputs():
    with pytest.raises(CorruptInputError):
        estimate_distance(0.9, 0.5, 1.0, 1.0, q=4, r=2)
    with pytest.raises(InvalidParamsError):
        estimate_distance(0.1, 1.0, 1.0, 1.0, q=4, r=2)
    with pytest.raises(InvalidParamsError):
        estimate_distance(0.1, 0.5, 0.0, 1.0, q=4, r=2)
