"""
Ancestral Reconstruction Tests
Belief propagation against brute-force enumeration, tie rules and calibration
"""

import itertools

import numpy as np
import pytest

from src.ancestral import (
    ancestral_bp, calibrate_quality, complete_hierarchy, map_letters, symmetric_channel,
)
from src.errors import InvalidParamsError


def _brute_force_posterior(hierarchy, observed, leaf_quality, lam, q):
    """Enumerate every internal assignment of one coordinate"""
    edges, internal = [], []

    def walk(node, name):
        if isinstance(node, int):
            return
        internal.append(name)
        for j, child in enumerate(node):
            child_name = ("leaf", child) if isinstance(child, int) else name + (j,)
            edges.append((name, child_name))
            walk(child, child_name)

    walk(hierarchy, ("root",))
    channel = symmetric_channel(lam, q)
    observe = symmetric_channel(leaf_quality, q)
    posterior = np.zeros(q)
    for values in itertools.product(range(q), repeat=len(internal)):
        letters = dict(zip(internal, values))
        for leaf_values in itertools.product(range(q), repeat=len(observed)):
            p = 1.0 / q
            for leaf, value in enumerate(leaf_values):
                letters[("leaf", leaf)] = value
                p *= observe[value, observed[leaf]]
            for parent, child in edges:
                p *= channel[letters[parent], letters[child]]
            posterior[letters[("root",)]] += p
    return posterior / posterior.sum()


@pytest.mark.parametrize("hierarchy", [(0, 1), (0, 1, 2), ((0, 1), (2, 3)), ((0, 1, 2), 3)])
@pytest.mark.parametrize("lam,leaf_quality,q", [(0.8, 1.0, 2), (0.6, 0.7, 3)])
def test_bp_matches_enumeration(hierarchy, lam, leaf_quality, q):
    rng = np.random.default_rng(len(str(hierarchy)))
    n_leaves = max(itertools.chain.from_iterable(
        h if isinstance(h, tuple) else (h,) for h in hierarchy)) + 1
    observed = rng.integers(0, q, size=(n_leaves, 3))
    result = ancestral_bp(hierarchy, observed, leaf_quality, lam, q)
    for coord in range(3):
        expected = _brute_force_posterior(hierarchy, observed[:, coord], leaf_quality, lam, q)
        assert np.allclose(result.posterior[coord], expected, atol=1e-10)


def _enumerate_posteriors(hierarchy, patterns, leaf_quality, lam, q):
    """Sum over every internal assignment for all leaf patterns at once"""
    internal, edges, leaf_parent = [], [], {}

    def walk(node):
        me = len(internal)
        internal.append(me)
        for child in node:
            if isinstance(child, int):
                leaf_parent[child] = me
            else:
                edges.append((me, walk(child)))
        return me

    walk(hierarchy)
    channel = symmetric_channel(lam, q)
    to_leaf = channel @ symmetric_channel(leaf_quality, q)
    posterior = np.zeros((patterns.shape[1], q))
    for values in itertools.product(range(q), repeat=len(internal)):
        weight = np.full(patterns.shape[1], 1.0 / q)
        for parent, child in edges:
            weight *= channel[values[parent], values[child]]
        for leaf, parent in leaf_parent.items():
            weight *= to_leaf[values[parent], patterns[leaf]]
        posterior[:, values[0]] += weight
    return posterior / posterior.sum(axis=1, keepdims=True)


def _leaves(node):
    return [node] if isinstance(node, int) else [leaf for child in node for leaf in _leaves(child)]


def _all_patterns(n_leaves, q):
    return np.asarray(list(itertools.product(range(q), repeat=n_leaves))).T


def test_two_level_binary_matches_enumeration_on_every_pattern():
    hierarchy = complete_hierarchy(2, 2)
    patterns = _all_patterns(4, 2)
    assert patterns.shape == (4, 16)
    result = ancestral_bp(hierarchy, patterns, 0.8, 0.6, 2)
    for coord in range(16):
        expected = _brute_force_posterior(hierarchy, patterns[:, coord], 0.8, 0.6, 2)
        assert np.allclose(result.posterior[coord], expected, atol=1e-10)


SMALL_HIERARCHIES = [
    complete_hierarchy(2, 1), complete_hierarchy(2, 2), complete_hierarchy(2, 3),
    complete_hierarchy(3, 1), complete_hierarchy(3, 2),
    ((0, 1), (2, 3, 4)), (((0, 1), (2, 3)), ((4, 5), (6, 7, 8))), ((0, 1, 2), (3, 4, 5), (6, 7)),
]


@pytest.mark.parametrize("hierarchy", SMALL_HIERARCHIES, ids=str)
@pytest.mark.parametrize("q", [2, 3])
@pytest.mark.parametrize("lam,leaf_quality", [(0.6, 0.8), (0.85, 0.4)])
def test_bp_matches_enumeration_on_all_leaf_patterns(hierarchy, q, lam, leaf_quality):
    n_leaves = len(_leaves(hierarchy))
    assert n_leaves <= 12
    patterns = _all_patterns(n_leaves, q)
    result = ancestral_bp(hierarchy, patterns, leaf_quality, lam, q)
    expected = _enumerate_posteriors(hierarchy, patterns, leaf_quality, lam, q)
    assert np.allclose(result.posterior, expected, atol=1e-10, rtol=0.0)




def test_unanimous_children_give_their_letter():
    observed = np.full((3, 5), 2)
    result = ancestral_bp((0, 1, 2), observed, 1.0, 0.7, 4)
    assert result.root_letters.tolist() == [2] * 5


def test_ties_go_to_smallest_letter():
    observed = np.asarray([[3], [1]])
    result = ancestral_bp((0, 1), observed, 1.0, 0.5, 4)
    assert result.root_letters.tolist() == [1]
    assert map_letters(np.asarray([[0.25, 0.25, 0.25, 0.25]])).tolist() == [0]


def test_complete_hierarchy_layout():
    assert complete_hierarchy(2, 2) == ((0, 1), (2, 3))
    assert complete_hierarchy(3, 1, start=3) == (3, 4, 5)
    assert complete_hierarchy(2, 0) == 0


def test_bp_validates_inputs():
    with pytest.raises(InvalidParamsError):
        ancestral_bp((0, 1), np.zeros((2, 2), dtype=int), 0.0, 0.5, 2)
    with pytest.raises(InvalidParamsError):
        ancestral_bp((0, 1), np.zeros((2, 2), dtype=int), 1.0, 1.5, 2)


def test_calibrated_quality_is_deterministic_and_ordered():
    a = calibrate_quality(2, 2, 0.9, 4, 1.0, n_samples=5000, seed=1)
    b = calibrate_quality(2, 2, 0.9, 4, 1.0, n_samples=5000, seed=1)
    assert a == b
    noisier = calibrate_quality(2, 2, 0.9, 4, 0.5, n_samples=5000, seed=1)
    assert 0.0 < noisier < a <= 1.0
    assert calibrate_quality(2, 1, 0.0, 4, 1.0, n_samples=2000, seed=1) < 0.1
