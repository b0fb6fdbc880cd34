"""
FIM Pair-Map Recovery
Recover each sibling's pair bijection up to per-letter relabeling and a row/column flip

Siblings share their parent's rewired letter pairs x_i, and sibling j shows
tau_j(noise_j(x_i)) at pair position i (pairs coded a*q + b). For a target
sibling and two helpers:
  1. align the helpers on the pair alphabet (relative Hamming over q^2 values)
  2. keep the positions where both helpers agree with value z, i.e. the
     parent pair was most likely tau_helper^-1(z)
  3. in the target, the most frequent value there is y = tau(x) and the next
     2(q-1) values are A(y): the images of pairs differing from x in exactly
     one letter
  4. A(y) splits into two groups of q-1 mutually adjacent values: B(y) (same
     first letter) and C(y) (same second letter); which is which is the flip
  5. naming B(0) fixes the flip; every y in C(0) shares 0's column, so its
     row group is the part of A(y) without 0, and the rows cover all q^2 values
  6. rows and columns then index every value: decode[y] = row * q + column

decode composed with the true tau is (a, b) -> (p1(a), p2(b)) or, flipped,
(a, b) -> (p1(b), p2(a)).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .config import get_settings
from .distances import pair_codes, pair_decode, relative_hamming
from .errors import AmbiguousRecoveryError, InvalidParamsError, ReconstructionError, UnsupportedConfigurationError

logger = logging.getLogger("fim_recovery")


@dataclass(frozen=True, eq=False)
class PairPermRecovery:
    """
    Recovered structure of one sibling's pair bijection

    neighbor_sets[y] is A(y); parts[y] is (B(y), C(y)) under the globally
    chosen naming; decode maps the sibling's pair codes to canonical codes.
    """
    q: int
    neighbor_sets: Dict[int, FrozenSet[int]]
    parts: Dict[int, Tuple[FrozenSet[int], FrozenSet[int]]]
    decode: np.ndarray
    centers: np.ndarray = field(default=None)

    def apply(self, codes: np.ndarray) -> np.ndarray:
        return self.decode[np.asarray(codes, dtype=np.int64)]

    def residual(self, true_pair_perm: np.ndarray) -> np.ndarray:
        """decode after the true pair map; lies in the allowed subgroup when correct"""
        return self.decode[np.asarray(true_pair_perm, dtype=np.int64)]

    def cover_holds(self, y: int) -> bool:
        """{y} + B(y) + union of B(z) for z in C(y) is the whole pair alphabet"""
        covered = {y} | set(self.parts[y][0])
        for z in self.parts[y][1]:
            covered |= set(self.parts[z][0])
        return len(covered) == self.q * self.q


def residual_in_allowed_subgroup(residual: np.ndarray, q: int) -> Tuple[bool, bool]:
    """
    Check that a pair map acts letter-wise, possibly swapping the two letters

    Returns:
        (ok, flipped)
    """
    residual = np.asarray(residual, dtype=np.int64)
    if residual.shape != (q * q,) or not np.array_equal(np.sort(residual), np.arange(q * q)):
        return False, False
    table = residual.reshape(q, q)
    first, second = table // q, table % q
    if np.all(first == first[:, :1]) and np.all(second == second[:1, :]):
        return True, False
    if np.all(first == first[:1, :]) and np.all(second == second[:, :1]):
        return True, True
    return False, False


def _split_neighbors(members: FrozenSet[int], neighbor_sets: Dict[int, FrozenSet[int]],
                     q: int, y: int) -> Tuple[FrozenSet[int], FrozenSet[int]]:
    """Split A(y) into its two adjacency components, ordered by smallest element"""
    remaining = set(members)
    components = []
    while remaining:
        start = min(remaining)
        stack, comp = [start], {start}
        remaining.discard(start)
        while stack:
            node = stack.pop()
            for other in list(remaining):
                if other in neighbor_sets[node] or node in neighbor_sets[other]:
                    remaining.discard(other)
                    comp.add(other)
                    stack.append(other)
        components.append(frozenset(comp))
    if len(components) != 2 or any(len(c) != q - 1 for c in components):
        sizes = sorted(len(c) for c in components)
        raise AmbiguousRecoveryError(f"Neighbor set of value {y} splits into components of sizes {sizes}",
                                     stage="fim_recover")
    return tuple(sorted(components, key=min))


def _other_part(parts: Tuple[FrozenSet[int], FrozenSet[int]], avoid: int, y: int) -> FrozenSet[int]:
    without = [p for p in parts if avoid not in p]
    if len(without) != 1:
        raise ReconstructionError(f"Value {y} is not adjacent to value {avoid}", stage="fim_recover")
    return without[0]


def _recover_one(target: np.ndarray, helper_a: np.ndarray, helper_b: np.ndarray, q: int,
                 min_count: int, tie_margin: float) -> PairPermRecovery:
    pairs = q * q
    width = 2 * (q - 1)
    _, rho = relative_hamming(helper_a, helper_b, pairs)

    neighbor_sets: Dict[int, FrozenSet[int]] = {}
    centers = np.full(pairs, -1, dtype=np.int64)
    for z in range(pairs):
        mask = (helper_a == z) & (helper_b == rho[z])
        count = int(mask.sum())
        if count < min_count:
            raise AmbiguousRecoveryError(
                f"Pair value {z} seen at only {count} aligned positions (< {min_count}); increase k",
                stage="fim_recover")
        freq = np.bincount(target[mask], minlength=pairs) / count
        order = np.argsort(-freq, kind="stable")
        gaps = (freq[order[0]] - freq[order[1]], freq[order[width]] - freq[order[width + 1]]) \
            if width + 1 < pairs else (freq[order[0]] - freq[order[1]],)
        if min(gaps) < tie_margin:
            raise AmbiguousRecoveryError(f"Co-occurrence ranks for value {z} are tied within {tie_margin}",
                                         stage="fim_recover")
        y = int(order[0])
        if y in neighbor_sets:
            raise AmbiguousRecoveryError(f"Two helper values map to target value {y}", stage="fim_recover")
        centers[z] = y
        neighbor_sets[y] = frozenset(int(v) for v in order[1:width + 1])

    split = {y: _split_neighbors(members, neighbor_sets, q, y) for y, members in neighbor_sets.items()}

    # B(0) is the part holding the smallest neighbor of 0; this fixes the flip
    b0, c0 = split[0]
    rows = {0: frozenset({0}) | b0}
    for y in c0:
        rows[y] = frozenset({y}) | _other_part(split[y], 0, y)
    cols = {0: frozenset({0}) | c0}
    for y in b0:
        cols[y] = frozenset({y}) | _other_part(split[y], 0, y)

    row_of = np.full(pairs, -1, dtype=np.int64)
    col_of = np.full(pairs, -1, dtype=np.int64)
    for i, rep in enumerate(sorted(rows)):
        row_of[list(rows[rep])] = i
    for j, rep in enumerate(sorted(cols)):
        col_of[list(cols[rep])] = j
    for lines, index in ((rows, row_of), (cols, col_of)):
        if sum(len(line) for line in lines.values()) != pairs or np.any(index < 0):
            raise ReconstructionError("Recovered lines do not partition the pair alphabet", stage="fim_recover")

    decode = row_of * q + col_of
    if len(np.unique(decode)) != pairs:
        raise ReconstructionError("Recovered rows and columns do not index every pair once", stage="fim_recover")

    parts = {}
    for y in range(pairs):
        first, second = split[y]
        row_line = next(line for line in rows.values() if y in line)
        parts[y] = (first, second) if first <= row_line else (second, first)
    return PairPermRecovery(q, neighbor_sets, parts, decode, centers)


def fim_recover_pairperm(siblings: Sequence[np.ndarray], q: int, min_count: Optional[int] = None,
                         tie_margin: Optional[float] = None) -> List[PairPermRecovery]:
    """
    Recover every sibling's pair bijection

    Args:
        siblings: Letter representations (k,) of at least three siblings
        q: Alphabet size
        min_count: Minimum aligned positions per helper value
        tie_margin: Minimum frequency gap at the rank cut-offs

    Returns:
        One PairPermRecovery per sibling, in input order

    Raises:
        UnsupportedConfigurationError: fewer than three siblings
        AmbiguousRecoveryError: statistics too thin or tied
    """
    settings = get_settings()
    min_count = settings.fim_min_count if min_count is None else min_count
    tie_margin = settings.fim_tie_margin if tie_margin is None else tie_margin
    n = len(siblings)
    if n < 3:
        raise UnsupportedConfigurationError(f"Pair-map recovery needs at least 3 siblings, got {n}",
                                            stage="fim_recover")
    codes = [pair_codes(rep, q) for rep in siblings]
    recoveries = []
    for t in range(n):
        recoveries.append(_recover_one(codes[t], codes[(t + 1) % n], codes[(t + 2) % n], q,
                                       min_count, tie_margin))
    logger.debug(f"Recovered pair maps for {n} siblings (q={q})")
    return recoveries


def decode_letters(rep: np.ndarray, recovery: PairPermRecovery) -> np.ndarray:
    """Sibling letters in the recovery's canonical coordinates"""
    return pair_decode(recovery.apply(pair_codes(rep, recovery.q)), recovery.q)


def align_to_reference(letters: np.ndarray, reference: np.ndarray, q: int) -> Tuple[np.ndarray, bool]:
    """
    Relabel first and second letters onto a reference, swapping them if closer

    Returns:
        (aligned letters, swapped)
    """
    firsts, seconds = letters[0::2], letters[1::2]
    ref_first, ref_second = reference[0::2], reference[1::2]
    straight = [relative_hamming(firsts, ref_first, q), relative_hamming(seconds, ref_second, q)]
    crossed = [relative_hamming(seconds, ref_first, q), relative_hamming(firsts, ref_second, q)]
    swapped = crossed[0][0] + crossed[1][0] < straight[0][0] + straight[1][0]
    (_, s1), (_, s2) = crossed if swapped else straight
    a, b = (seconds, firsts) if swapped else (firsts, seconds)
    aligned = np.empty_like(letters)
    aligned[0::2] = s1[a]
    aligned[1::2] = s2[b]
    return aligned, bool(swapped)


def unrewire(estimate: np.ndarray, sigma: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Undo a level's rewiring on a reconstructed parent, both ways

    Returns:
        (unflipped, flipped) parent representations
    """
    unflipped = np.empty_like(estimate)
    unflipped[sigma[0::2]] = estimate[0::2]
    unflipped[sigma[1::2]] = estimate[1::2]
    flipped = np.empty_like(estimate)
    flipped[sigma[1::2]] = estimate[0::2]
    flipped[sigma[0::2]] = estimate[1::2]
    return unflipped, flipped


@dataclass(frozen=True, eq=False)
class FlipResolution:
    flips: List[bool]
    scores: np.ndarray


def fim_resolve_flip(candidates: Sequence[Tuple[np.ndarray, np.ndarray]], q: int,
                     margin: Optional[float] = None) -> FlipResolution:
    """
    Pick the unflipped or flipped version of every node

    A node's score for a version is its smallest pair-alphabet relative Hamming
    distance to any version of any other node; the lower score wins, exact ties
    keep the unflipped version.

    Args:
        candidates: (unflipped, flipped) representations per node
        q: Alphabet size
        margin: Minimum score gap

    Raises:
        InvalidParamsError: fewer than two nodes
        AmbiguousRecoveryError: score gap below the margin
    """
    margin = get_settings().flip_margin if margin is None else margin
    n = len(candidates)
    if n < 2:
        raise InvalidParamsError("Flip resolution needs at least two nodes")
    pairs = q * q
    codes = [[pair_codes(version, q) for version in node] for node in candidates]

    dist = np.full((n, 2, n, 2), np.inf)
    for u in range(n):
        for v in range(u + 1, n):
            for b in range(2):
                for c in range(2):
                    value, _ = relative_hamming(codes[u][b], codes[v][c], pairs)
                    dist[u, b, v, c] = dist[v, c, u, b] = value
    scores = dist.min(axis=(2, 3))

    flips = []
    for u in range(n):
        gap = abs(scores[u, 0] - scores[u, 1])
        if gap < margin:
            raise AmbiguousRecoveryError(f"Flip scores for node {u} differ by only {gap:.4f}",
                                         stage="fim_flip")
        flips.append(bool(scores[u, 1] < scores[u, 0]))
    return FlipResolution(flips, scores)
