"""
Distances Between Representations
Hamming, relabeling-invariant Hamming and tree-distance estimates

The relative Hamming distance minimizes over letter relabelings sigma:
  min_sigma d_H(sigma(a), b)
The objective is linear in sigma through the letter confusion matrix
C[x, y] = #{i : a_i = x, b_i = y}, so for small alphabets all q! relabelings
are scored at once and for larger ones the minimum-cost assignment on -C is
solved with scipy.

Under the symmetric channel the expected normalized Hamming distance between
two nodes at tree distance D, observed through estimates of quality la and lb,
is (q-1)/q * (1 - la * lb * lambda^D). estimate_distance inverts this.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations
from typing import Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment

from .config import get_settings
from .errors import CorruptInputError, InvalidParamsError

logger = logging.getLogger("distances")


def _check_lengths(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidParamsError(f"Representations must have equal length, got {a.shape} and {b.shape}")


def normalized_hamming(a, b) -> float:
    """Fraction of coordinates where a and b disagree"""
    a, b = np.asarray(a), np.asarray(b)
    _check_lengths(a, b)
    if a.size == 0:
        return 0.0
    return float(np.count_nonzero(a != b)) / a.size


def confusion_matrix(a, b, q: int) -> np.ndarray:
    """C[x, y] = number of coordinates with a_i = x and b_i = y"""
    a, b = np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)
    _check_lengths(a, b)
    return np.bincount(a * q + b, minlength=q * q).reshape(q, q)


@lru_cache(maxsize=8)
def _all_permutations(q: int) -> np.ndarray:
    """Every permutation of range(q), lexicographic order"""
    return np.asarray(list(permutations(range(q))), dtype=np.int64)


def best_relabeling(confusion: np.ndarray, exhaustive_max_q: Optional[int] = None) -> Tuple[np.ndarray, int]:
    """
    Relabeling sigma maximizing sum_x C[x, sigma(x)]

    Exhaustive search returns the lexicographically smallest maximizer. Above
    exhaustive_max_q the assignment solver is used (same optimum, its own
    tie-breaking).

    Returns:
        (sigma, number of agreeing coordinates)
    """
    q = confusion.shape[0]
    limit = get_settings().exhaustive_max_q if exhaustive_max_q is None else exhaustive_max_q
    if q <= limit:
        perms = _all_permutations(q)
        scores = confusion[np.arange(q), perms].sum(axis=1)
        best = int(np.argmax(scores))
        return perms[best].copy(), int(scores[best])
    rows, cols = linear_sum_assignment(-confusion)
    sigma = np.empty(q, dtype=np.int64)
    sigma[rows] = cols
    return sigma, int(confusion[rows, cols].sum())


def relative_hamming(a, b, q: int, exhaustive_max_q: Optional[int] = None) -> Tuple[float, np.ndarray]:
    """
    Minimal normalized Hamming distance over relabelings of a

    Args:
        a, b: Representations of equal length
        q: Alphabet size (use q*q for pair-coded FIM representations)

    Returns:
        (value, sigma) with sigma[a] as close to b as possible
    """
    a = np.asarray(a)
    confusion = confusion_matrix(a, b, q)
    sigma, agree = best_relabeling(confusion, exhaustive_max_q)
    if a.size == 0:
        return 0.0, sigma
    return 1.0 - agree / a.size, sigma


def pairwise_matches(reps: np.ndarray, q: int, other: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Number of agreeing coordinates for every pair of rows

    Built from sparse one-hot encodings: M = X @ Y.T where X[v, i*q + a] = 1
    iff reps[v, i] = a.

    Args:
        reps: (n, k) letters
        q: Alphabet size
        other: Optional (m, k) second set; defaults to reps

    Returns:
        (n, m) integer array
    """
    x = _one_hot(reps, q)
    y = x if other is None else _one_hot(other, q)
    return np.asarray((x @ y.T).toarray(), dtype=np.int64)


def _one_hot(reps: np.ndarray, q: int) -> sparse.csr_matrix:
    n, k = reps.shape
    cols = (np.arange(k, dtype=np.int64) * q)[None, :] + reps.astype(np.int64)
    data = np.ones(n * k, dtype=np.float64)
    rows = np.repeat(np.arange(n), k)
    return sparse.csr_matrix((data, (rows, cols.ravel())), shape=(n, k * q))


def pairwise_hamming(reps: np.ndarray, q: int) -> np.ndarray:
    """Normalized Hamming distance matrix of the rows of reps"""
    k = reps.shape[1]
    return 1.0 - pairwise_matches(reps, q) / k


def pairwise_relative_hamming(reps: np.ndarray, q: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Relative Hamming distance for every pair of rows

    Returns:
        (distances (n, n), sigmas (n, n, q)) where sigmas[u, v][reps[u]] best
        matches reps[v]; the diagonal is zero with identity relabelings
    """
    n = reps.shape[0]
    dist = np.zeros((n, n))
    sigmas = np.tile(np.arange(q), (n, n, 1))
    for u in range(n):
        for v in range(u + 1, n):
            value, sigma = relative_hamming(reps[u], reps[v], q)
            dist[u, v] = dist[v, u] = value
            sigmas[u, v] = sigma
            sigmas[v, u] = np.argsort(sigma)
    return dist, sigmas


def pair_codes(reps: np.ndarray, q: int) -> np.ndarray:
    """Encode letter pairs (2i, 2i+1) as a*q + b; works on 1-D or 2-D input"""
    reps = np.asarray(reps, dtype=np.int64)
    return reps[..., 0::2] * q + reps[..., 1::2]


def pair_decode(codes: np.ndarray, q: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    out = np.empty(codes.shape[:-1] + (2 * codes.shape[-1],), dtype=np.int64)
    out[..., 0::2] = codes // q
    out[..., 1::2] = codes % q
    return out


# ============================================================================
# DISTANCE ESTIMATION
# ============================================================================

@dataclass(frozen=True, eq=False)
class DistanceEstimate:
    """
    Estimated tree distance, capped at 2r+2

    far is set when the statistic is beyond the 2r+2 threshold; such pairs carry
    distance 2r+2. continuous is log(lam_power) / log(lambda) before rounding.
    """
    distance: int
    far: bool
    raw: float
    lam_power: float
    continuous: float
    sigma: Optional[np.ndarray] = None

    @property
    def margin(self) -> float:
        """Distance of the continuous estimate from the nearest rounding boundary"""
        if self.far or not math.isfinite(self.continuous):
            return 0.5
        return 0.5 - abs(self.continuous - round(self.continuous))


def _check_estimation_inputs(lam: float, lam_a: float, lam_b: float) -> None:
    if not 0.0 < lam < 1.0:
        raise InvalidParamsError(f"Distance estimation needs lambda in (0, 1), got {lam}")
    if not (0.0 < lam_a <= 1.0 and 0.0 < lam_b <= 1.0):
        raise InvalidParamsError(f"Endpoint qualities must lie in (0, 1], got {lam_a}, {lam_b}")


def estimate_distance_matrix(raw: np.ndarray, lam: float, lam_a: float, lam_b: float, q: int, r: int,
                             tolerance: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorized estimate_distance

    Returns:
        (distance, far, continuous) arrays shaped like raw

    Raises:
        CorruptInputError: some raw value exceeds (q-1)/q by more than the tolerance
    """
    _check_estimation_inputs(lam, lam_a, lam_b)
    tolerance = get_settings().distance_tolerance if tolerance is None else tolerance
    raw = np.asarray(raw, dtype=np.float64)
    ceiling = (q - 1) / q
    worst = float(raw.max()) if raw.size else 0.0
    if worst > ceiling + tolerance:
        raise CorruptInputError(f"Normalized Hamming {worst:.4f} exceeds the model maximum {ceiling:.4f}")

    cap = 2 * r + 2
    lam_power = (1.0 - raw / ceiling) / (lam_a * lam_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        continuous = np.where(lam_power > 0, np.log(np.maximum(lam_power, 1e-300)) / math.log(lam), np.inf)
    # threshold sits halfway (geometrically) between lam^(2r+1) and lam^(2r+2)
    far = lam_power < lam ** (cap - 0.5)
    distance = np.where(far, cap, np.clip(np.rint(np.where(far, 0.0, continuous)), 0, cap)).astype(np.int64)
    return distance, far, continuous


def estimate_distance(raw: float, lam: float, lam_a: float, lam_b: float, q: int, r: int,
                      sigma: Optional[np.ndarray] = None, tolerance: Optional[float] = None) -> DistanceEstimate:
    """
    Invert the expected-Hamming formula into an integer distance

    lambda^dist is estimated as (1 - raw * q / (q-1)) / (lam_a * lam_b) and the
    distance is the nearest integer of its log base lambda.

    Args:
        raw: Observed (relative) normalized Hamming distance
        lam: Channel copy probability, in (0, 1)
        lam_a, lam_b: Qualities of the two endpoint estimates, in (0, 1]
        q: Alphabet size
        r: Window; distances beyond 2r+2 are reported as FAR
        sigma: Relabeling attached to the estimate, if any

    Raises:
        CorruptInputError: raw exceeds (q-1)/q by more than the tolerance
    """
    distance, far, continuous = estimate_distance_matrix(np.asarray([raw]), lam, lam_a, lam_b, q, r, tolerance)
    lam_power = (1.0 - raw / ((q - 1) / q)) / (lam_a * lam_b)
    return DistanceEstimate(int(distance[0]), bool(far[0]), float(raw), lam_power, float(continuous[0]), sigma)


def expected_hamming(distance: int, lam: float, lam_a: float, lam_b: float, q: int) -> float:
    """Expected normalized Hamming distance at a given tree distance"""
    return (q - 1) / q * (1.0 - lam_a * lam_b * lam ** distance)
