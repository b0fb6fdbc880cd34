"""
Statistical Validation
Binomial intervals and total-variation estimates for experiment reports

Key Tools:
- Wilson score interval: 95% interval for a success rate over n trials
- Plug-in total variation: 0.5 * sum |p_hat - q_hat| over observed outcomes
- Paired bootstrap: standard error of the TV estimate (200 resamples)
- Leaf census: full-string counts over the leaves of one sampled tree

Both samplers of a TV estimate are driven by identically seeded generators
(common random numbers). Identical samplers therefore give exactly zero, and
so does a channel that ignores the root (lambda = 0).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from .errors import InvalidParamsError
from .samplers import channel_array
from .utils.seeding import derive_seed

logger = logging.getLogger("validation")

MIN_TV_SAMPLES = 100
DEFAULT_BOOTSTRAP = 200

Sampler = Callable[[np.random.Generator, int], np.ndarray]
Statistic = Callable[[np.ndarray], np.ndarray]


def wilson_interval(p: float, n: int, confidence: float = 0.95) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial proportion

    Args:
        p: Observed success rate
        n: Number of trials
        confidence: Two-sided coverage

    Returns:
        (low, high), always containing p
    """
    if n <= 0:
        return 0.0, 1.0
    p = min(max(float(p), 0.0), 1.0)
    z = float(norm.ppf(0.5 + confidence / 2.0))
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, min(center - half, p)), min(1.0, max(center + half, p))


# ============================================================================
# TOTAL VARIATION
# ============================================================================

@dataclass(frozen=True)
class TVEstimate:
    value: float
    stderr: float
    n_samples: int
    n_outcomes: int


def _tv_from_ids(ids_a: np.ndarray, ids_b: np.ndarray, n_ids: int) -> float:
    pa = np.bincount(ids_a, minlength=n_ids) / ids_a.shape[0]
    pb = np.bincount(ids_b, minlength=n_ids) / ids_b.shape[0]
    return 0.5 * float(np.abs(pa - pb).sum())


def estimate_tv_distance(sampler_a: Sampler, sampler_b: Sampler, statistic: Statistic, n_samples: int,
                         seed: int = 0, n_bootstrap: int = DEFAULT_BOOTSTRAP) -> TVEstimate:
    """
    Plug-in total-variation distance between two statistic distributions

    Args:
        sampler_a, sampler_b: (rng, n) -> n samples
        statistic: samples -> one outcome per sample (1-D ids or 2-D rows)
        n_samples: Samples per side (>= 100)
        seed: Seed shared by both samplers
        n_bootstrap: Paired bootstrap resamples for the standard error

    Returns:
        TVEstimate

    Raises:
        InvalidParamsError: fewer than 100 samples
    """
    if n_samples < MIN_TV_SAMPLES:
        raise InvalidParamsError(f"TV estimation needs at least {MIN_TV_SAMPLES} samples, got {n_samples}")

    stat_a = np.asarray(statistic(sampler_a(np.random.default_rng(seed), n_samples)))
    stat_b = np.asarray(statistic(sampler_b(np.random.default_rng(seed), n_samples)))
    both = np.concatenate([stat_a, stat_b])
    if both.ndim == 1:
        outcomes, ids = np.unique(both, return_inverse=True)
    else:
        outcomes, ids = np.unique(both.reshape(both.shape[0], -1), axis=0, return_inverse=True)
    ids = ids.reshape(-1)
    ids_a, ids_b = ids[:n_samples], ids[n_samples:]
    n_ids = len(outcomes)

    value = _tv_from_ids(ids_a, ids_b, n_ids)
    rng = np.random.default_rng(derive_seed(seed, n_samples, n_bootstrap))
    boots = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        pick = rng.integers(0, n_samples, size=n_samples)
        boots[b] = _tv_from_ids(ids_a[pick], ids_b[pick], n_ids)
    stderr = float(boots.std(ddof=1)) if n_bootstrap > 1 else 0.0

    logger.debug(f"TV estimate {value:.4f} +/- {stderr:.4f} over {n_ids} outcomes")
    return TVEstimate(value, stderr, n_samples, n_ids)


def census_sampler(d: int, h: int, q: int, k: int, lam: float, root_rep: Sequence[int]) -> Sampler:
    """
    Sampler of leaf representations of a d-ary broadcast with a fixed root

    Returns:
        (rng, n) -> array (n, d^h, k)
    """
    root = np.asarray(root_rep, dtype=np.int64)
    if root.shape != (k,) or root.min() < 0 or root.max() >= q:
        raise InvalidParamsError(f"Root representation must be {k} letters in [0, {q})")

    def sample(rng: np.random.Generator, n: int) -> np.ndarray:
        level = np.broadcast_to(root, (n, 1, k)).astype(np.uint8 if q <= 256 else np.int64)
        for _ in range(h):
            level = channel_array(np.repeat(level, d, axis=1), lam, q, rng)
        return level

    return sample


def leaf_census(samples: np.ndarray, q: int) -> np.ndarray:
    """
    Full-string counts at the leaves of each sample

    Args:
        samples: (n, leaves, k) letters
        q: Alphabet size

    Returns:
        (n, q^k) counts; column c counts leaves whose string has base-q code c
    """
    n, _, k = samples.shape
    if q ** k > 1 << 20:
        raise InvalidParamsError(f"Census over {q}^{k} strings is too large")
    weights = q ** np.arange(k - 1, -1, -1, dtype=np.int64)
    codes = samples.astype(np.int64) @ weights
    width = q ** k
    flat = (np.arange(n, dtype=np.int64)[:, None] * width + codes).ravel()
    return np.bincount(flat, minlength=n * width).reshape(n, width)
