"""
Compression
Histogram summaries of the labeled data that bound what shallow methods see

For a scheme A = (A_1, ..., A_j) the compressed data holds, for each subset
index i, tuple x over the positions of A_i and label l, the number of labeled
leaves with label l whose representation restricted to A_i equals x. Unlabeled
representations are passed through untouched.

Histograms are stored sparsely as parallel arrays (one row per non-zero cell)
and exported through pandas.
"""

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from .core import Dataset
from .errors import InvalidParamsError

logger = logging.getLogger("compression")


@dataclass(frozen=True)
class CompressionScheme:
    """Ordered subsets of coordinates; positions inside a subset are sorted"""
    subsets: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        normalized = tuple(tuple(sorted(int(p) for p in subset)) for subset in self.subsets)
        if not normalized:
            raise InvalidParamsError("A compression scheme needs at least one subset")
        for subset in normalized:
            if not subset:
                raise InvalidParamsError("Compression subsets must be non-empty")
            if len(set(subset)) != len(subset) or subset[0] < 0:
                raise InvalidParamsError(f"Invalid compression subset {subset}")
        object.__setattr__(self, "subsets", normalized)

    @classmethod
    def canonical(cls, k: int) -> "CompressionScheme":
        """One singleton subset per coordinate"""
        return cls(tuple((i,) for i in range(k)))

    @classmethod
    def full(cls, k: int) -> "CompressionScheme":
        """The whole string as one subset (lossless on labeled data)"""
        return cls((tuple(range(k)),))

    @classmethod
    def blocks(cls, k: int, s: int) -> "CompressionScheme":
        """Consecutive blocks of size s (the last block may be shorter)"""
        if s < 1:
            raise InvalidParamsError(f"Block size must be >= 1, got s={s}")
        return cls(tuple(tuple(range(i, min(i + s, k))) for i in range(0, k, s)))

    @property
    def s(self) -> int:
        return max(len(subset) for subset in self.subsets)

    @property
    def is_canonical(self) -> bool:
        return all(subset == (i,) for i, subset in enumerate(self.subsets))

    def validate_for(self, k: int) -> None:
        for subset in self.subsets:
            if subset[-1] >= k:
                raise InvalidParamsError(f"Compression subset {subset} references a position >= k={k}")


@dataclass(frozen=True, eq=False)
class CompressedData:
    """
    C_A(D): sparse per-label histograms plus the raw unlabeled data

    Row r of the parallel arrays is the cell (subset_index[r], tuples[r],
    label[r]) with count[r] > 0. Rows are sorted by (subset, label, tuple).
    """
    scheme: CompressionScheme
    q: int
    unlabeled_reps: np.ndarray
    subset_index: np.ndarray
    tuples: Tuple[Tuple[int, ...], ...]
    label: np.ndarray
    count: np.ndarray
    label_counts: Dict[int, int]

    @property
    def labels(self) -> List[int]:
        return sorted(self.label_counts)

    def histograms(self) -> Dict[Tuple[int, Tuple[int, ...], int], int]:
        """The histogram as a dict keyed by (subset index, tuple, label)"""
        return {
            (int(i), x, int(lab)): int(c)
            for i, x, lab, c in zip(self.subset_index, self.tuples, self.label, self.count)
        }

    def get(self, i: int, x: Sequence[int], label: int) -> int:
        return self.histograms().get((i, tuple(int(v) for v in x), label), 0)

    def to_frame(self) -> pd.DataFrame:
        """Histogram rows with the tuple written as dot-joined base-q digits"""
        return pd.DataFrame({
            "subset_index": self.subset_index.astype(int),
            "tuple": [".".join(str(v) for v in x) for x in self.tuples],
            "label": self.label.astype(int),
            "count": self.count.astype(int),
        })

    def write_histograms(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
        logger.info(f"Wrote {len(self.count)} histogram cells to {path}")
        return path


def compress(data: Dataset, scheme: CompressionScheme) -> CompressedData:
    """
    Compress the labeled part of a dataset according to a scheme

    Args:
        data: Dataset
        scheme: Subsets of coordinates

    Returns:
        CompressedData (histograms are independent of the labeled leaves' order)
    """
    scheme.validate_for(data.k)
    reps = data.labeled_reps.astype(np.int64)
    labels = data.labels

    subset_rows, tuple_rows, label_rows, count_rows = [], [], [], []
    for i, subset in enumerate(scheme.subsets):
        if reps.shape[0] == 0:
            break
        stacked = np.column_stack([labels, reps[:, list(subset)]])
        cells, counts = np.unique(stacked, axis=0, return_counts=True)
        subset_rows.append(np.full(len(counts), i, dtype=np.int64))
        label_rows.append(cells[:, 0])
        tuple_rows.extend(tuple(int(v) for v in row[1:]) for row in cells)
        count_rows.append(counts)

    def cat(parts):
        return np.concatenate(parts).astype(np.int64) if parts else np.empty(0, dtype=np.int64)

    label_counts = {int(lab): int(c) for lab, c in zip(*np.unique(labels, return_counts=True))}
    compressed = CompressedData(
        scheme=scheme, q=data.q, unlabeled_reps=data.unlabeled_reps,
        subset_index=cat(subset_rows), tuples=tuple(tuple_rows),
        label=cat(label_rows), count=cat(count_rows), label_counts=label_counts,
    )
    logger.debug(f"Compressed {reps.shape[0]} labeled leaves into {len(compressed.count)} cells "
                 f"({len(scheme.subsets)} subsets, s={scheme.s})")
    return compressed


def marginalize(compressed: CompressedData, position: int) -> Dict[Tuple[int, int], int]:
    """
    Per-(letter, label) counts at one coordinate

    Uses the first subset containing the position and sums out the others.

    Raises:
        InvalidParamsError: no subset covers the position
    """
    for i, subset in enumerate(compressed.scheme.subsets):
        if position in subset:
            slot = subset.index(position)
            out: Counter = Counter()
            for r in np.flatnonzero(compressed.subset_index == i):
                out[(compressed.tuples[r][slot], int(compressed.label[r]))] += int(compressed.count[r])
            return dict(out)
    raise InvalidParamsError(f"No subset of the scheme covers position {position}")


def expand_full(compressed: CompressedData) -> Counter:
    """
    Multiset of (representation tuple, label) from a full-string scheme

    Raises:
        InvalidParamsError: the scheme is not a single subset
    """
    if len(compressed.scheme.subsets) != 1:
        raise InvalidParamsError("Histogram expansion needs the single full-subset scheme")
    return Counter({(x, int(lab)): int(c) for x, lab, c in zip(compressed.tuples, compressed.label, compressed.count)})
