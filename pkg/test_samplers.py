"""
Sampler Tests
Channel law, model reductions, FIM edge inversion, instances and determinism
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from src.core import Model, ModelParams, NodeRef, PermutationRegime, build_tree, default_rewirings
from src.errors import InvalidParamsError
from src.reconstruct import is_well_represented
from src.samplers import (
    InstanceSpec, channel_array, channel_step, draw_edge_params, generate_instance, invert_fim_edge,
    make_dataset, sample_fim, sample_iidm, sample_vrm, simulate, true_leaf_labels,
)


# ============================================================================
# CHANNEL
# ============================================================================

@given(st.integers(0, 9), st.integers(2, 10), st.floats(0, 0.999999))
def test_channel_step_full_copy(letter, q, rand):
    letter %= q
    assert channel_step(letter, 1.0, q, rand) == letter


def test_channel_step_uniform_when_lambda_zero():
    q = 4
    draws = (np.arange(400) + 0.5) / 400
    counts = np.bincount([channel_step(2, 0.0, q, u) for u in draws], minlength=q)
    assert counts.tolist() == [100, 100, 100, 100]


def test_channel_step_keep_probability():
    q, lam = 4, 0.8
    draws = (np.arange(100_000) + 0.5) / 100_000
    kept = np.mean([channel_step(1, lam, q, u) == 1 for u in draws])
    assert kept == pytest.approx(lam + (1 - lam) / q, abs=1e-4)


def test_channel_array_matches_step():
    rng_a = np.random.default_rng(3)
    letters = np.random.default_rng(1).integers(0, 5, size=(7, 11)).astype(np.uint8)
    out = channel_array(letters, 0.6, 5, rng_a)
    draws = np.random.default_rng(3).random(letters.shape)
    expected = np.vectorize(lambda a, u: channel_step(a, 0.6, 5, u))(letters, draws)
    assert np.array_equal(out, expected)


@pytest.mark.parametrize("q", [2, 4, 8])
@pytest.mark.parametrize("lam", [0.3, 0.6, 0.9])
def test_single_edge_copy_frequency(q, lam):
    n = 100_000
    rng = np.random.default_rng(10 * q + int(round(10 * lam)))
    parents = rng.integers(0, q, size=n).astype(np.uint8)
    children = channel_array(parents, lam, q, rng)
    expected = lam + (1 - lam) / q
    sd = np.sqrt(expected * (1 - expected) / n)
    assert abs(np.mean(children == parents) - expected) <= 3 * sd


# ============================================================================
# MODELS
# ============================================================================

def test_lambda_one_copies_root():
    tree = build_tree(2, 3)
    root = [0, 1, 2, 3, 0, 1]
    truth = sample_iidm(tree, ModelParams(Model.IIDM, q=4, k=6, lam=1.0), root_rep=root, n_jobs=1)
    assert np.all(truth.representations == np.asarray(root))


def test_vrm_lambda_one_applies_edge_maps():
    tree = build_tree(2, 2)
    params = ModelParams(Model.VRM, q=3, k=9, lam=1.0, seed=5)
    truth = sample_vrm(tree, params, n_jobs=1)
    for level in range(1, tree.h + 1):
        for node in tree.nodes_at(level):
            edge = truth.edge_params(node)
            assert np.array_equal(truth.rep(node), edge.perm[truth.rep(tree.parent(node))])


def test_vrm_with_identity_edges_equals_iidm():
    tree = build_tree(2, 3)
    identity = tuple(tuple(range(3)) for _ in range(tree.num_nodes - 1))
    vrm = ModelParams(Model.VRM, q=3, k=20, lam=0.7, regime=PermutationRegime.ADVERSARIAL,
                      edge_permutations=identity, seed=9)
    iidm = ModelParams(Model.IIDM, q=3, k=20, lam=0.7, seed=9)
    a = simulate(tree, vrm, n_jobs=1)
    b = simulate(tree, iidm, n_jobs=1)
    assert np.array_equal(a.representations, b.representations)


def test_adversarial_list_must_cover_every_edge():
    tree = build_tree(2, 2)
    params = ModelParams(Model.VRM, q=3, k=4, lam=0.5, regime=PermutationRegime.ADVERSARIAL,
                         edge_permutations=((0, 1, 2),))
    with pytest.raises(InvalidParamsError, match="6 edge permutations"):
        draw_edge_params(tree, params)


def test_shared_regime_repeats_level_permutation():
    tree = build_tree(3, 2)
    table = draw_edge_params(tree, ModelParams(Model.VRM, q=4, k=2, lam=0.5,
                                               regime=PermutationRegime.SHARED, seed=2))
    for level in (1, 2):
        rows = table[tree.level_offset(level):tree.level_offset(level) + tree.level_size(level)]
        assert np.all(rows == rows[0])


def test_fim_edge_inversion_recovers_intermediate():
    tree = build_tree(3, 2)
    k = 8
    params = ModelParams(Model.FIM, q=3, k=k, lam=1.0, rewiring=default_rewirings(k, 2, 4), seed=4)
    truth = sample_fim(tree, params, n_jobs=1)
    for node in tree.nodes_at(2):
        sigma = params.rewiring_for(2)
        noisy = invert_fim_edge(truth.rep(node), truth.edge_params(node), sigma)
        # lambda = 1: the intermediate is the parent itself
        assert np.array_equal(noisy, truth.rep(tree.parent(node)))


def test_fim_lambda_zero_is_uniform():
    tree = build_tree(3, 3)
    k = 200
    params = ModelParams(Model.FIM, q=2, k=k, lam=0.0, rewiring=default_rewirings(k, 3, 1), seed=1)
    leaves = sample_fim(tree, params, n_jobs=1).level_reps(3)
    assert leaves.mean() == pytest.approx(0.5, abs=0.03)


@pytest.mark.parametrize("model", list(Model))
def test_node_marginals_are_uniform(model):
    tree = build_tree(3, 3)
    k = 20_000
    rewiring = default_rewirings(k, tree.h, 7) if model == Model.FIM else None
    truth = simulate(tree, ModelParams(model, q=4, k=k, lam=0.7, rewiring=rewiring, seed=7), n_jobs=1)
    for node in (NodeRef(1, 2), NodeRef(3, 26)):
        counts = np.bincount(truth.rep(node).astype(np.int64), minlength=4)
        assert chisquare(counts).pvalue > 1e-3


def test_sampler_variant_checks():
    tree = build_tree(2, 1)
    with pytest.raises(InvalidParamsError):
        sample_vrm(tree, ModelParams(Model.IIDM, q=2, k=2, lam=0.5))


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(list(Model)), st.integers(0, 1000))
def test_simulation_is_independent_of_worker_count(model, seed):
    from src import samplers

    tree = build_tree(3, 4)
    k = 6
    rewiring = default_rewirings(k, tree.h, seed) if model == Model.FIM else None
    params = ModelParams(model, q=3, k=k, lam=0.7, rewiring=rewiring, seed=seed)
    original = samplers._CHUNK_ROWS
    samplers._CHUNK_ROWS = 5
    try:
        serial = simulate(tree, params, n_jobs=1)
        threaded = simulate(tree, params, n_jobs=3)
    finally:
        samplers._CHUNK_ROWS = original
    assert np.array_equal(serial.representations, threaded.representations)
    again = simulate(tree, params, n_jobs=1)
    assert np.array_equal(serial.representations, again.representations)


# ============================================================================
# INSTANCES
# ============================================================================

@pytest.mark.parametrize("h,h1,expected", [(4, 2, 16), (5, 3, 16), (5, 2, 32)])
def test_instance_sizes(h, h1, expected):
    tree = build_tree(2, h)
    labels, labeled = generate_instance(tree, InstanceSpec(1, h1), seed=3)
    assert len(labeled) == expected
    assert sorted(labels.label_roots()) == [0, 1]
    assert all(node.level == h for node in labeled)


@given(st.integers(0, 10_000))
def test_instance_labels_are_well_represented(seed):
    tree = build_tree(3, 4)
    spec = InstanceSpec(1, 2)
    labels, labeled = generate_instance(tree, spec, seed)
    assert len(labels.label_roots()) == spec.num_labels(tree)
    for label in labels.all_labels():
        assert is_well_represented(label, labeled, labels, tree)


def test_instance_spec_validation():
    with pytest.raises(InvalidParamsError):
        InstanceSpec(2, 2)
    with pytest.raises(InvalidParamsError):
        generate_instance(build_tree(2, 3), InstanceSpec(1, 3), seed=0)


def test_make_dataset_withholds_unlabeled_labels():
    tree = build_tree(2, 5)
    truth = simulate(tree, ModelParams(Model.IIDM, q=2, k=5, lam=0.9, seed=8), n_jobs=1)
    labels, labeled = generate_instance(tree, InstanceSpec(1, 3), seed=8)
    truth = truth.with_instance(labels, labeled)
    data = make_dataset(truth)
    assert len(data.labeled_nodes) == 16
    assert len(data.unlabeled_nodes) == 16
    assert set(data.labeled_nodes) == set(labeled)
    leaf_truth = true_leaf_labels(truth)
    assert data.labels.tolist() == [leaf_truth[n.index] for n in data.labeled_nodes]
    assert list(data.labeled_nodes) == sorted(data.labeled_nodes)
    assert np.array_equal(data.unlabeled_reps[0], truth.rep(data.unlabeled_nodes[0]))


def test_well_represented_counterexamples():
    tree = build_tree(2, 3)
    labels, _ = generate_instance(tree, InstanceSpec(1, 2), seed=0)
    label = next(iter(labels.all_labels()))
    top = labels.label_root(label)
    first_leaf = NodeRef(3, tree.leaf_span(top).start)
    assert not is_well_represented(label, {first_leaf}, labels, tree)
    assert not is_well_represented(label, {first_leaf, NodeRef(3, first_leaf.index + 1)}, labels, tree)
    other_child_leaf = NodeRef(3, tree.leaf_span(top).stop - 1)
    assert is_well_represented(label, {first_leaf, other_child_leaf}, labels, tree)
