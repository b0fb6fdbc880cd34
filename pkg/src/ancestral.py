"""
Ancestral Reconstruction
Exact per-coordinate belief propagation over a small rooted hierarchy

The hierarchy is a nested tuple: an int is a leaf (a row of the leaf-letter
array), a tuple is an internal node whose entries are its children. Every
parent-child edge is the symmetric channel with copy probability lambda; each
leaf is additionally observed through a symmetric channel of copy probability
leaf_quality. All k coordinates are processed together as (k, q) message arrays.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple, Union

import numpy as np

from .errors import InvalidParamsError, ReconstructionError
from .samplers import channel_array

logger = logging.getLogger("ancestral")

Hierarchy = Union[int, Tuple["Hierarchy", ...]]

# Letters within this relative distance of the best posterior are tied
MAP_TIE_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class BPResult:
    root_letters: np.ndarray
    posterior: np.ndarray


def symmetric_channel(lam: float, q: int) -> np.ndarray:
    """Transition matrix lam * I + (1 - lam) / q * J"""
    return lam * np.eye(q) + (1.0 - lam) / q * np.ones((q, q))


def _through_channel(likelihood: np.ndarray, lam: float, q: int) -> np.ndarray:
    # likelihood @ symmetric_channel(lam, q), without forming the matrix
    return lam * likelihood + (1.0 - lam) / q * likelihood.sum(axis=1, keepdims=True)


def _normalize(belief: np.ndarray, where: str) -> np.ndarray:
    totals = belief.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise ReconstructionError(f"All-zero message at {where}", stage="ancestral")
    return belief / totals


def _upward(node: Hierarchy, leaf_letters: np.ndarray, leaf_quality: float, lam: float, q: int) -> np.ndarray:
    """Normalized likelihood of the subtree's observations given the node's letter"""
    if isinstance(node, (int, np.integer)):
        obs = leaf_letters[int(node)].astype(np.int64)
        likelihood = np.full((obs.shape[0], q), (1.0 - leaf_quality) / q)
        likelihood[np.arange(obs.shape[0]), obs] += leaf_quality
        return likelihood

    belief = None
    for child in node:
        message = _through_channel(_upward(child, leaf_letters, leaf_quality, lam, q), lam, q)
        belief = message if belief is None else belief * message
        belief = _normalize(belief, "internal node")
    return belief


def map_letters(posterior: np.ndarray) -> np.ndarray:
    """MAP letter per coordinate; ties go to the smallest letter"""
    best = posterior.max(axis=1, keepdims=True)
    return np.argmax(posterior >= best * (1.0 - MAP_TIE_TOLERANCE), axis=1)


def ancestral_bp(hierarchy: Hierarchy, leaf_letters: np.ndarray, leaf_quality: float,
                 lam: float, q: int) -> BPResult:
    """
    Posterior of the hierarchy root's letters under a uniform prior

    Args:
        hierarchy: Nested tuple over leaf rows
        leaf_letters: (n_leaves, k) observed leaf estimates
        leaf_quality: Quality of the leaf estimates, in (0, 1]
        lam: Channel copy probability
        q: Alphabet size

    Returns:
        BPResult with MAP letters (k,) and posterior (k, q)

    Raises:
        ReconstructionError: a message vanished (only possible with lam = 1)
    """
    if not 0.0 < leaf_quality <= 1.0:
        raise InvalidParamsError(f"Leaf quality must lie in (0, 1], got {leaf_quality}")
    if not 0.0 <= lam <= 1.0:
        raise InvalidParamsError(f"lambda must lie in [0, 1], got {lam}")
    leaf_letters = np.atleast_2d(leaf_letters)
    posterior = _normalize(_upward(hierarchy, leaf_letters, leaf_quality, lam, q), "root")
    return BPResult(map_letters(posterior), posterior)


def complete_hierarchy(arity: int, depth: int, start: int = 0) -> Hierarchy:
    """Complete arity-ary hierarchy of the given depth over leaves start, start+1, ..."""
    if depth == 0:
        return start
    width = arity ** (depth - 1)
    return tuple(complete_hierarchy(arity, depth - 1, start + j * width) for j in range(arity))


@lru_cache(maxsize=256)
def _calibrate(arity: int, depth: int, lam: float, q: int, leaf_quality: float,
               n_samples: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    level = rng.integers(0, q, size=(1, n_samples))
    root = level[0].copy()
    for _ in range(depth):
        level = channel_array(np.repeat(level, arity, axis=0), lam, q, rng)
    observed = channel_array(level, leaf_quality, q, rng)

    result = ancestral_bp(complete_hierarchy(arity, depth), observed, leaf_quality, lam, q)
    accuracy = float(np.mean(result.root_letters == root))
    return max((accuracy - 1.0 / q) / (1.0 - 1.0 / q), 1e-3)


def calibrate_quality(arity: int, depth: int, lam: float, q: int, leaf_quality: float,
                      n_samples: int, seed: int) -> float:
    """
    Monte-Carlo quality of the BP root estimate

    Simulates n_samples independent coordinates down a complete hierarchy,
    reconstructs the root by BP and converts the accuracy into the quality
    scale (accuracy = quality + (1 - quality) / q).

    Returns:
        Quality in [1e-3, 1]
    """
    quality = _calibrate(int(arity), int(depth), round(float(lam), 12), int(q),
                         round(float(leaf_quality), 6), int(n_samples), int(seed))
    logger.debug(f"Calibrated BP quality d={arity} depth={depth} lambda={lam} "
                 f"leaf_quality={leaf_quality:.4f}: {quality:.4f}")
    return quality
