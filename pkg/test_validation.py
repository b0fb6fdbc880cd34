"""
Validation Tests
Wilson intervals, plug-in total variation and leaf census counts
"""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.errors import InvalidParamsError
from src.validation import census_sampler, estimate_tv_distance, leaf_census, wilson_interval


def test_wilson_interval_values():
    low, high = wilson_interval(0.5, 100)
    assert low == pytest.approx(0.4038, abs=1e-3)
    assert high == pytest.approx(0.5962, abs=1e-3)
    low, high = wilson_interval(1.0, 10)
    assert low == pytest.approx(0.7225, abs=1e-3)
    assert high == 1.0
    assert wilson_interval(0.3, 0) == (0.0, 1.0)


@given(st.floats(0, 1), st.integers(1, 10_000))
def test_wilson_interval_contains_estimate(p, n):
    low, high = wilson_interval(p, n)
    assert 0.0 <= low <= p <= high <= 1.0


# ============================================================================
# TOTAL VARIATION
# ============================================================================

def _census(q):
    return lambda samples: leaf_census(samples, q)


def test_single_level_binary_census_tv():
    # leaf zeros ~ Bin(2, 0.8) against Bin(2, 0.2): TV = 0.6
    a = census_sampler(2, 1, 2, 1, 0.6, [0])
    b = census_sampler(2, 1, 2, 1, 0.6, [1])
    estimate = estimate_tv_distance(a, b, _census(2), n_samples=20_000, seed=3)
    assert estimate.value == pytest.approx(0.6, abs=0.02)
    assert 0.0 < estimate.stderr < 0.02
    assert estimate.n_outcomes == 3


def test_identical_samplers_give_zero():
    a = census_sampler(2, 2, 3, 2, 0.7, [1, 2])
    estimate = estimate_tv_distance(a, a, _census(3), n_samples=500, seed=1)
    assert estimate.value == 0.0
    assert estimate.stderr == 0.0


def test_lambda_zero_forgets_the_root():
    a = census_sampler(3, 2, 2, 2, 0.0, [0, 0])
    b = census_sampler(3, 2, 2, 2, 0.0, [1, 1])
    assert estimate_tv_distance(a, b, _census(2), n_samples=300, seed=4).value == 0.0


def test_disjoint_supports_give_one():
    zeros = lambda rng, n: np.zeros(n, dtype=np.int64)
    ones = lambda rng, n: np.ones(n, dtype=np.int64)
    estimate = estimate_tv_distance(zeros, ones, lambda s: s, n_samples=200)
    assert estimate.value == 1.0
    assert estimate.n_outcomes == 2


def test_tv_needs_enough_samples():
    a = census_sampler(2, 1, 2, 1, 0.5, [0])
    with pytest.raises(InvalidParamsError):
        estimate_tv_distance(a, a, _census(2), n_samples=99)


# ============================================================================
# CENSUS
# ============================================================================

def test_leaf_census_counts_full_strings():
    samples = np.asarray([[[0, 1], [1, 1]], [[1, 1], [1, 1]]])
    assert leaf_census(samples, 2).tolist() == [[0, 1, 0, 1], [0, 0, 0, 2]]


def test_census_sampler_shape_and_root_check():
    sample = census_sampler(2, 3, 4, 5, 1.0, [0, 1, 2, 3, 0])
    out = sample(np.random.default_rng(0), 7)
    assert out.shape == (7, 8, 5)
    assert np.all(out == np.asarray([0, 1, 2, 3, 0]))
    with pytest.raises(InvalidParamsError):
        census_sampler(2, 1, 2, 3, 0.5, [0, 2, 1])
