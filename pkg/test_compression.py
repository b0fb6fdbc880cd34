"""
Compression Tests
Histogram counts, scheme helpers, marginals and CSV export
"""

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st

from src.compression import CompressionScheme, compress, expand_full, marginalize
from src.core import Dataset, Model, NodeRef
from src.errors import InvalidParamsError


def _dataset(labeled_reps, labels, unlabeled_reps=(), q=2, d=2):
    labeled_reps = np.asarray(labeled_reps).reshape(len(labels), -1)
    k = labeled_reps.shape[1]
    n_lab, n_unl = len(labels), len(unlabeled_reps)
    total = n_lab + n_unl
    h = 1
    while d ** h < total:
        h += 1
    n_unl = d ** h - n_lab
    unlabeled = np.zeros((n_unl, k), dtype=np.int64)
    unlabeled[:len(unlabeled_reps)] = np.asarray(unlabeled_reps).reshape(-1, k) if len(unlabeled_reps) else 0
    return Dataset(
        d=d, h=h, q=q, k=k, model=Model.IIDM,
        labeled_nodes=tuple(NodeRef(h, i) for i in range(n_lab)),
        labeled_reps=labeled_reps, labels=np.asarray(labels),
        unlabeled_nodes=tuple(NodeRef(h, i) for i in range(n_lab, d ** h)),
        unlabeled_reps=unlabeled,
    )


def test_single_leaf_canonical_counts():
    data = _dataset([[1, 0]], [7])
    compressed = compress(data, CompressionScheme.canonical(2))
    assert compressed.histograms() == {(0, (1,), 7): 1, (1, (0,), 7): 1}
    assert compressed.get(0, (0,), 7) == 0
    assert compressed.label_counts == {7: 1}


def test_equal_letters_accumulate():
    data = _dataset([[1, 0], [1, 1]], [3, 3])
    compressed = compress(data, CompressionScheme.canonical(2))
    assert compressed.get(0, (1,), 3) == 2
    assert compressed.get(1, (0,), 3) == 1
    assert compressed.get(1, (1,), 3) == 1


def test_full_scheme_is_lossless():
    reps = [[0, 1, 1], [0, 1, 1], [1, 1, 0], [0, 0, 0]]
    labels = [0, 0, 1, 0]
    compressed = compress(_dataset(reps, labels), CompressionScheme.full(3))
    assert expand_full(compressed) == {((0, 1, 1), 0): 2, ((1, 1, 0), 1): 1, ((0, 0, 0), 0): 1}


def test_expand_full_needs_single_subset():
    compressed = compress(_dataset([[0, 1]], [0]), CompressionScheme.canonical(2))
    with pytest.raises(InvalidParamsError):
        expand_full(compressed)


@given(st.lists(st.tuples(st.lists(st.integers(0, 2), min_size=4, max_size=4), st.integers(0, 2)),
                min_size=1, max_size=12))
def test_marginals_agree_across_schemes(rows):
    reps = [r for r, _ in rows]
    labels = [lab for _, lab in rows]
    data = _dataset(reps, labels, q=3)
    canonical = compress(data, CompressionScheme.canonical(4))
    blocks = compress(data, CompressionScheme.blocks(4, 2))
    for position in range(4):
        assert marginalize(canonical, position) == marginalize(blocks, position)
    assert sum(canonical.count) == 4 * len(rows)


def test_histograms_do_not_depend_on_leaf_order():
    reps = [[0, 1], [1, 1], [1, 0], [0, 0]]
    labels = [0, 1, 1, 0]
    a = compress(_dataset(reps, labels), CompressionScheme.blocks(2, 1))
    b = compress(_dataset(reps[::-1], labels[::-1]), CompressionScheme.blocks(2, 1))
    assert a.histograms() == b.histograms()


def test_scheme_helpers():
    assert CompressionScheme.blocks(5, 2).subsets == ((0, 1), (2, 3), (4,))
    assert CompressionScheme(((3, 1), (0,))).subsets == ((1, 3), (0,))
    assert CompressionScheme.canonical(3).is_canonical
    assert not CompressionScheme.blocks(4, 2).is_canonical
    assert CompressionScheme.full(6).s == 6
    with pytest.raises(InvalidParamsError):
        CompressionScheme(())
    with pytest.raises(InvalidParamsError):
        CompressionScheme(((0, 0),))
    with pytest.raises(InvalidParamsError):
        compress(_dataset([[0, 1]], [0]), CompressionScheme(((0, 2),)))


def test_write_histograms(tmp_path):
    data = _dataset([[1, 0, 1], [1, 1, 1]], [2, 5], q=2)
    compressed = compress(data, CompressionScheme(((0, 2), (1,))))
    path = compressed.write_histograms(tmp_path / "hist.csv")
    frame = pd.read_csv(path, dtype={"tuple": str})
    assert list(frame.columns) == ["subset_index", "tuple", "label", "count"]
    assert set(frame.loc[frame.subset_index == 0, "tuple"]) == {"1.1"}
    assert frame["count"].sum() == 4


def test_unlabeled_reps_pass_through():
    data = _dataset([[0, 1]], [0], unlabeled_reps=[[1, 1]])
    compressed = compress(data, CompressionScheme.canonical(2))
    assert np.array_equal(compressed.unlabeled_reps, data.unlabeled_reps)
