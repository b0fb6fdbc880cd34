"""
Baseline Tests
Local and shallow classifiers, tie rules and locality
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.baselines import (
    BaselineKind, LocalClassifier, classify_dataset, local_classify, path_log_probs, shallow_classify,
    trivial_classify,
)
from src.compression import CompressionScheme, compress
from src.core import UNLABELED, Dataset, Model, NodeRef
from src.errors import InvalidParamsError


def _dataset(labeled_reps, labels, unlabeled_reps, q=4, d=2):
    k = len(unlabeled_reps[0])
    labeled_reps = np.asarray(labeled_reps, dtype=np.int64).reshape(len(labels), k)
    n_lab = len(labels)
    h = 1
    while d ** h < n_lab + len(unlabeled_reps):
        h += 1
    unlabeled = np.zeros((d ** h - n_lab, k), dtype=np.int64)
    unlabeled[:len(unlabeled_reps)] = unlabeled_reps
    return Dataset(
        d=d, h=h, q=q, k=k, model=Model.IIDM,
        labeled_nodes=tuple(NodeRef(h, i) for i in range(n_lab)),
        labeled_reps=labeled_reps, labels=np.asarray(labels),
        unlabeled_nodes=tuple(NodeRef(h, i) for i in range(n_lab, d ** h)),
        unlabeled_reps=unlabeled,
    )


# ============================================================================
# LOCAL
# ============================================================================

def test_nearest_neighbor_returns_identical_rep_label():
    labeled = [(np.asarray([0, 1, 2, 3]), 5), (np.asarray([3, 3, 3, 3]), 7)]
    assert local_classify([0, 1, 2, 3], labeled, BaselineKind.LOCAL_NN, None, q=4) == 5
    assert local_classify([3, 3, 3, 2], labeled, BaselineKind.LOCAL_NN, None, q=4) == 7


def test_nearest_neighbor_ties_go_to_smallest_label():
    labeled = [(np.asarray([0, 0]), 9), (np.asarray([1, 1]), 2)]
    assert local_classify([0, 1], labeled, BaselineKind.LOCAL_NN, None, q=2) == 2


def test_local_ml_sums_over_label_reps():
    reps = np.asarray([[0, 0, 0, 0], [0, 0, 0, 1], [1, 1, 1, 1]])
    classifier = LocalClassifier(reps, [3, 3, 1], BaselineKind.LOCAL_ML, q=2, lam=0.6, depth=2)
    assert classifier.classify(np.asarray([[0, 0, 0, 0], [1, 1, 1, 1]])).tolist() == [3, 1]
    # two labels with mirrored reps score the same at a balanced query
    mirrored = LocalClassifier(np.asarray([[0, 0], [1, 1]]), [6, 4], BaselineKind.LOCAL_ML, q=2, lam=0.6)
    assert mirrored.classify(np.asarray([[0, 1]])).tolist() == [4]


def test_path_log_probs():
    same, other = path_log_probs(0.5, 2, 4)
    assert np.exp(same) == pytest.approx(0.25 + 0.75 / 4)
    assert np.exp(other) == pytest.approx(0.75 / 4)
    same, other = path_log_probs(1.0, 3, 2)
    assert same == pytest.approx(0.0, abs=1e-6)
    assert np.isfinite(other)


def test_local_classifier_validation():
    reps = np.zeros((1, 3), dtype=int)
    with pytest.raises(InvalidParamsError):
        LocalClassifier(reps, [0], BaselineKind.LOCAL_ML, q=2)
    with pytest.raises(InvalidParamsError):
        LocalClassifier(reps, [0], BaselineKind.SHALLOW_NB, q=2)
    assert local_classify([0, 1, 0], [], BaselineKind.LOCAL_NN, None, q=2) == UNLABELED


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=5, max_size=5), st.sampled_from(["local_nn", "local_ml"]))
def test_local_label_ignores_other_unlabeled_leaves(other, kind):
    labeled = [[0, 1, 2, 0, 1], [2, 2, 2, 1, 1], [1, 0, 0, 0, 2]]
    query = [0, 1, 2, 1, 1]
    alone = classify_dataset(_dataset(labeled, [0, 1, 2], [query], q=3), kind, lam=0.7)
    paired = classify_dataset(_dataset(labeled, [0, 1, 2], [query, other], q=3), kind, lam=0.7)
    assert alone[0] == paired[0]


# ============================================================================
# SHALLOW
# ============================================================================

def test_identical_histograms_give_smallest_label():
    data = _dataset([[0, 1], [0, 1]], [4, 1], [[0, 1]], q=2)
    compressed = compress(data, CompressionScheme.canonical(2))
    assert shallow_classify(compressed, BaselineKind.SHALLOW_NB)[0] == 1


def test_dominant_label_wins():
    data = _dataset([[0, 0, 0]] * 3 + [[1, 1, 1]], [0, 0, 0, 1], [[0, 0, 0], [1, 1, 1]], q=2)
    labels = classify_dataset(data, BaselineKind.SHALLOW_NB)
    assert labels[:2].tolist() == [0, 1]


def test_shallow_nb_needs_canonical_scheme():
    data = _dataset([[0, 1, 0, 1]], [0], [[0, 1, 0, 1]], q=2)
    with pytest.raises(InvalidParamsError):
        shallow_classify(compress(data, CompressionScheme.blocks(4, 2)), BaselineKind.SHALLOW_NB)
    with pytest.raises(InvalidParamsError):
        shallow_classify(compress(data, CompressionScheme.canonical(4)), BaselineKind.LOCAL_NN)


def test_shallow_s_uses_joint_blocks():
    # per-coordinate counts are identical for both labels; only pairs tell them apart
    labeled = [[0, 0], [1, 1], [0, 1], [1, 0]]
    data = _dataset(labeled, [2, 2, 5, 5], [[0, 0], [0, 1]], q=2)
    assert classify_dataset(data, BaselineKind.SHALLOW_S, s=2)[:2].tolist() == [2, 5]
    assert classify_dataset(data, BaselineKind.SHALLOW_NB)[:2].tolist() == [2, 2]


# ============================================================================
# TRIVIAL AND EMPTY INPUTS
# ============================================================================

def test_trivial_picks_most_frequent_then_smallest():
    data = _dataset([[0], [0], [0], [1], [1], [1], [0]], [5, 5, 2, 2, 5, 2, 1], [[0]], q=2)
    compressed = compress(data, CompressionScheme.canonical(1))
    assert trivial_classify(compressed) == 2
    assert set(classify_dataset(data, BaselineKind.TRIVIAL).tolist()) == {2}


@pytest.mark.parametrize("kind", list(BaselineKind))
def test_empty_labeled_set_gives_unlabeled(kind):
    data = Dataset(
        d=2, h=1, q=2, k=3, model=Model.IIDM,
        labeled_nodes=(), labeled_reps=np.empty((0, 3)), labels=np.empty(0),
        unlabeled_nodes=(NodeRef(1, 0), NodeRef(1, 1)), unlabeled_reps=np.asarray([[0, 1, 1], [1, 0, 0]]),
    )
    assert classify_dataset(data, kind, lam=0.5).tolist() == [UNLABELED, UNLABELED]
