"""
Baseline Classifiers
Local and shallow labelers for the unlabeled leaves

Local classifiers see one unlabeled representation plus the labeled set.
Shallow classifiers see only the compressed data C_A(D). Both are
deterministic; ties always go to the smallest label id.

Kinds:
- local_nn: label of the Hamming-nearest labeled representation
- local_ml: summed log-likelihood of the labeled reps of each label under a
  symmetric channel of depth D (default 2(h - h1))
- shallow_nb: naive Bayes over the canonical per-coordinate histograms
- shallow_s: naive Bayes over the histograms of an s-subset scheme
- trivial: most frequent labeled label
"""

import logging
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .compression import CompressedData, CompressionScheme, compress
from .core import UNLABELED, Dataset
from .distances import pairwise_matches
from .errors import InvalidParamsError

logger = logging.getLogger("baselines")

SMOOTHING_ALPHA = 1.0
_BATCH_ROWS = 1024


class BaselineKind(str, Enum):
    LOCAL_NN = "local_nn"
    LOCAL_ML = "local_ml"
    SHALLOW_NB = "shallow_nb"
    SHALLOW_S = "shallow_s"
    TRIVIAL = "trivial"

    @property
    def is_local(self) -> bool:
        return self in (BaselineKind.LOCAL_NN, BaselineKind.LOCAL_ML)

    @property
    def is_shallow(self) -> bool:
        return self in (BaselineKind.SHALLOW_NB, BaselineKind.SHALLOW_S)


def path_log_probs(lam: float, depth: int, q: int) -> Tuple[float, float]:
    """
    Per-coordinate log-probabilities of agreeing / disagreeing after `depth` channels

    Returns:
        (log P[same letter], log P[a specific other letter])
    """
    power = min(lam ** depth, 1.0 - 1e-9)
    same = power + (1.0 - power) / q
    other = (1.0 - power) / q
    return float(np.log(same)), float(np.log(other))


class LocalClassifier:
    """
    Batch local classifier

    Each row is scored only against the labeled set, so the label of a leaf
    does not depend on any other unlabeled representation.
    """

    def __init__(self, labeled_reps: np.ndarray, labels: Sequence[int], kind: BaselineKind,
                 q: int, lam: Optional[float] = None, depth: int = 2):
        self.kind = BaselineKind(kind)
        if not self.kind.is_local:
            raise InvalidParamsError(f"{self.kind.value} is not a local classifier")
        if self.kind == BaselineKind.LOCAL_ML and lam is None:
            raise InvalidParamsError("local_ml needs the channel lambda")
        self.labeled_reps = np.atleast_2d(np.asarray(labeled_reps))
        self.labels = np.asarray(labels, dtype=np.int64)
        self.q = q
        self.lam = lam
        self.depth = depth
        self.classes = np.unique(self.labels)
        self.logger = logger

    def classify(self, reps: np.ndarray) -> np.ndarray:
        reps = np.atleast_2d(np.asarray(reps))
        if self.labels.size == 0:
            return np.full(reps.shape[0], UNLABELED, dtype=np.int64)
        out = [self._classify_batch(reps[s:s + _BATCH_ROWS]) for s in range(0, reps.shape[0], _BATCH_ROWS)]
        return np.concatenate(out) if out else np.empty(0, dtype=np.int64)

    def _classify_batch(self, reps: np.ndarray) -> np.ndarray:
        matches = pairwise_matches(reps, self.q, self.labeled_reps)
        k = reps.shape[1]
        if self.kind == BaselineKind.LOCAL_NN:
            dist = k - matches
            nearest = dist == dist.min(axis=1, keepdims=True)
            return np.where(nearest, self.labels[None, :], np.iinfo(np.int64).max).min(axis=1)

        log_same, log_other = path_log_probs(self.lam, self.depth, self.q)
        per_rep = matches * log_same + (k - matches) * log_other
        membership = (self.labels[:, None] == self.classes[None, :]).astype(np.float64)
        scores = per_rep @ membership
        return self.classes[np.argmax(scores, axis=1)]


def local_classify(rep, labeled: Sequence[Tuple[np.ndarray, int]], kind: BaselineKind,
                   lam: Optional[float], q: int, depth: int = 2) -> int:
    """
    Label one representation from the labeled set only

    Args:
        rep: Unlabeled representation
        labeled: (representation, label) pairs
        kind: LOCAL_NN or LOCAL_ML
        lam: Channel copy probability (LOCAL_ML)
        q: Alphabet size
        depth: Channel depth assumed by LOCAL_ML

    Returns:
        Label id (UNLABELED if the labeled set is empty)
    """
    if not labeled:
        return UNLABELED
    reps = np.vstack([np.asarray(r) for r, _ in labeled])
    labels = [lab for _, lab in labeled]
    classifier = LocalClassifier(reps, labels, kind, q, lam, depth)
    return int(classifier.classify(np.asarray(rep)[None, :])[0])


# ============================================================================
# SHALLOW CLASSIFIERS
# ============================================================================

def _canonical_log_table(compressed: CompressedData, classes: np.ndarray, k: int, alpha: float) -> np.ndarray:
    """log((n + alpha) / (count + alpha q)) indexed [label, position, letter]"""
    q = compressed.q
    counts = np.zeros((len(classes), k, q))
    label_pos = np.searchsorted(classes, compressed.label)
    letters = np.asarray([x[0] for x in compressed.tuples], dtype=np.int64)
    np.add.at(counts, (label_pos, compressed.subset_index, letters), compressed.count)
    totals = np.asarray([compressed.label_counts[int(c)] for c in classes], dtype=np.float64)
    return np.log(counts + alpha) - np.log(totals + alpha * q)[:, None, None]


def _subset_scores(compressed: CompressedData, classes: np.ndarray, reps: np.ndarray, alpha: float) -> np.ndarray:
    """Naive-Bayes scores (n, n_labels) for an arbitrary scheme"""
    q = compressed.q
    totals = np.asarray([compressed.label_counts[int(c)] for c in classes], dtype=np.float64)
    scores = np.zeros((reps.shape[0], len(classes)))
    for i, subset in enumerate(compressed.scheme.subsets):
        rows = np.flatnonzero(compressed.subset_index == i)
        queries = reps[:, list(subset)].astype(np.int64)
        stored = np.asarray([compressed.tuples[r] for r in rows], dtype=np.int64).reshape(len(rows), len(subset))
        _, inverse = np.unique(np.vstack([stored, queries]), axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        table = np.zeros((int(inverse.max()) + 1 if inverse.size else 0, len(classes)))
        label_pos = np.searchsorted(classes, compressed.label[rows])
        np.add.at(table, (inverse[:len(rows)], label_pos), compressed.count[rows])
        denom = np.log(totals + alpha * float(q) ** len(subset))
        scores += np.log(table[inverse[len(rows):]] + alpha) - denom[None, :]
    return scores


def shallow_classify(compressed: CompressedData, kind: BaselineKind, alpha: float = SMOOTHING_ALPHA) -> np.ndarray:
    """
    Naive-Bayes label per unlabeled representation, from histograms only

    Args:
        compressed: Compressed data (canonical scheme for SHALLOW_NB)
        kind: SHALLOW_NB or SHALLOW_S
        alpha: Add-alpha smoothing

    Returns:
        Label per unlabeled representation, in compressed.unlabeled_reps order
    """
    kind = BaselineKind(kind)
    if not kind.is_shallow:
        raise InvalidParamsError(f"{kind.value} is not a shallow classifier")
    if kind == BaselineKind.SHALLOW_NB and not compressed.scheme.is_canonical:
        raise InvalidParamsError("shallow_nb needs the canonical compression scheme")

    reps = np.atleast_2d(compressed.unlabeled_reps)
    n = reps.shape[0] if compressed.unlabeled_reps.size else 0
    classes = np.asarray(compressed.labels, dtype=np.int64)
    if classes.size == 0:
        return np.full(n, UNLABELED, dtype=np.int64)
    if n == 0:
        return np.empty(0, dtype=np.int64)

    out = []
    if compressed.scheme.is_canonical:
        k = len(compressed.scheme.subsets)
        table = _canonical_log_table(compressed, classes, k, alpha)
        positions = np.arange(k)
        for s in range(0, n, _BATCH_ROWS):
            batch = reps[s:s + _BATCH_ROWS].astype(np.int64)
            scores = table[:, positions[None, :], batch].sum(axis=2).T
            out.append(classes[np.argmax(scores, axis=1)])
    else:
        for s in range(0, n, _BATCH_ROWS):
            scores = _subset_scores(compressed, classes, reps[s:s + _BATCH_ROWS], alpha)
            out.append(classes[np.argmax(scores, axis=1)])
    return np.concatenate(out)


def trivial_classify(compressed: CompressedData) -> int:
    """Most frequent labeled label; ties to the smallest; UNLABELED if none"""
    if not compressed.label_counts:
        return UNLABELED
    return min(compressed.label_counts, key=lambda lab: (-compressed.label_counts[lab], lab))


def classify_dataset(data: Dataset, kind: BaselineKind, lam: Optional[float] = None, depth: int = 2,
                     s: int = 2, scheme: Optional[CompressionScheme] = None) -> np.ndarray:
    """
    Run one baseline over every unlabeled leaf of a dataset

    Args:
        data: Dataset
        kind: Baseline kind
        lam: Channel lambda (LOCAL_ML)
        depth: Channel depth for LOCAL_ML; 2(h - h1) under I(h0, h1)
        s: Block size of the default SHALLOW_S scheme
        scheme: Explicit SHALLOW_S scheme

    Returns:
        Label per unlabeled leaf, in data.unlabeled_nodes order
    """
    kind = BaselineKind(kind)
    n = len(data.unlabeled_nodes)
    if kind.is_local:
        classifier = LocalClassifier(data.labeled_reps, data.labels, kind, data.q, lam, depth)
        labels = classifier.classify(data.unlabeled_reps) if n else np.empty(0, dtype=np.int64)
    elif kind == BaselineKind.SHALLOW_NB:
        labels = shallow_classify(compress(data, CompressionScheme.canonical(data.k)), kind)
    elif kind == BaselineKind.SHALLOW_S:
        labels = shallow_classify(compress(data, scheme or CompressionScheme.blocks(data.k, s)), kind)
    else:
        compressed = compress(data, CompressionScheme.canonical(data.k))
        labels = np.full(n, trivial_classify(compressed), dtype=np.int64)
    logger.debug(f"{kind.value}: labeled {n} leaves")
    return labels
