"""
Dataset Files
Reader and writer for the HTL1 text format

Dataset file:
  HTL1 d=<d> h=<h> q=<q> k=<k> model=<IIDM|VRM|FIM>
  <level>:<index> <comma-separated letters> <label-id or ->
  ...                                   (one line per leaf, index order)

Ground-truth file: the same header, one line per node in level order, then the
sections [labeled], [labels], [rewiring] and [edges].

Writers are deterministic, so reading and rewriting a file reproduces it byte
for byte.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .core import UNLABELED, Dataset, Model, NodeRef, letter_dtype
from .errors import DatasetFormatError
from .samplers import GroundTruth, true_leaf_labels

logger = logging.getLogger("dataset_io")

MAGIC = "HTL1"
HEADER_KEYS = ("d", "h", "q", "k", "model")
NO_LABEL = "-"

PathLike = Union[str, Path]


def format_header(d: int, h: int, q: int, k: int, model: Model) -> str:
    return f"{MAGIC} d={d} h={h} q={q} k={k} model={Model(model).value}"


def _format_node(node: NodeRef, rep: np.ndarray, label: int) -> str:
    letters = ",".join(str(int(x)) for x in rep)
    return f"{node} {letters} {NO_LABEL if label == UNLABELED else label}"


def parse_header(line: str) -> Dict[str, object]:
    """
    Parse and validate the HTL1 header line

    Raises:
        DatasetFormatError: wrong magic, missing, unknown or malformed fields
    """
    parts = line.strip().split()
    if not parts or parts[0] != MAGIC:
        raise DatasetFormatError(f"Expected header starting with {MAGIC!r}, got {line.strip()[:40]!r}")
    fields: Dict[str, object] = {}
    for token in parts[1:]:
        key, sep, value = token.partition("=")
        if not sep or key not in HEADER_KEYS:
            raise DatasetFormatError(f"Unknown header field {token!r}")
        if key in fields:
            raise DatasetFormatError(f"Duplicated header field {key!r}")
        fields[key] = value
    missing = [key for key in HEADER_KEYS if key not in fields]
    if missing:
        raise DatasetFormatError(f"Header missing fields: {', '.join(missing)}")
    try:
        parsed = {key: int(fields[key]) for key in ("d", "h", "q", "k")}
        parsed["model"] = Model(fields["model"])
    except ValueError as e:
        raise DatasetFormatError(f"Malformed header value: {e}") from e
    return parsed


def _parse_node_line(line: str, lineno: int, q: int, k: int) -> Tuple[NodeRef, np.ndarray, int]:
    parts = line.split()
    if len(parts) != 3:
        raise DatasetFormatError(f"Line {lineno}: expected '<level>:<index> <letters> <label>'")
    try:
        node = NodeRef.parse(parts[0])
        letters = [int(x) for x in parts[1].split(",")]
        label = UNLABELED if parts[2] == NO_LABEL else int(parts[2])
    except ValueError as e:
        raise DatasetFormatError(f"Line {lineno}: {e}") from e
    if len(letters) != k:
        raise DatasetFormatError(f"Line {lineno}: expected {k} letters, got {len(letters)}")
    if min(letters) < 0 or max(letters) >= q:
        raise DatasetFormatError(f"Line {lineno}: letters must lie in [0, {q})")
    if label != UNLABELED and label < 0:
        raise DatasetFormatError(f"Line {lineno}: label ids must be non-negative")
    return node, np.asarray(letters, dtype=letter_dtype(q)), label


# ============================================================================
# DATASET FILES
# ============================================================================

def format_dataset(dataset: Dataset) -> str:
    """Render a dataset as HTL1 text (leaves in index order)"""
    rows = [(n, dataset.labeled_reps[i], int(dataset.labels[i])) for i, n in enumerate(dataset.labeled_nodes)]
    rows += [(n, dataset.unlabeled_reps[i], UNLABELED) for i, n in enumerate(dataset.unlabeled_nodes)]
    rows.sort(key=lambda row: row[0])
    lines = [format_header(dataset.d, dataset.h, dataset.q, dataset.k, dataset.model)]
    lines += [_format_node(*row) for row in rows]
    return "\n".join(lines) + "\n"


def parse_dataset(text: str) -> Dataset:
    """
    Parse HTL1 dataset text

    Raises:
        DatasetFormatError: malformed header or lines, wrong k, letters >= q,
            non-leaf entries, duplicated or missing leaves
    """
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise DatasetFormatError("Empty dataset file")
    header = parse_header(lines[0])
    d, h, q, k = header["d"], header["h"], header["q"], header["k"]

    labeled: List[Tuple[NodeRef, np.ndarray, int]] = []
    unlabeled: List[Tuple[NodeRef, np.ndarray]] = []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        node, rep, label = _parse_node_line(line, lineno, q, k)
        if node.level != h or not 0 <= node.index < d ** h:
            raise DatasetFormatError(f"Line {lineno}: {node} is not a leaf of the d={d}, h={h} tree")
        if node in seen:
            raise DatasetFormatError(f"Line {lineno}: leaf {node} listed twice")
        seen.add(node)
        if label == UNLABELED:
            unlabeled.append((node, rep))
        else:
            labeled.append((node, rep, label))

    if len(seen) != d ** h:
        raise DatasetFormatError(f"Dataset lists {len(seen)} leaves, tree has {d ** h}")

    def stack(reps):
        return np.vstack(reps) if reps else np.empty((0, k), dtype=letter_dtype(q))

    return Dataset(
        d=d, h=h, q=q, k=k, model=header["model"],
        labeled_nodes=tuple(n for n, _, _ in labeled),
        labeled_reps=stack([r for _, r, _ in labeled]),
        labels=np.asarray([lab for _, _, lab in labeled], dtype=np.int64),
        unlabeled_nodes=tuple(n for n, _ in unlabeled),
        unlabeled_reps=stack([r for _, r in unlabeled]),
    )


def write_dataset(dataset: Dataset, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_dataset(dataset), encoding="utf-8")
    logger.info(f"Wrote dataset ({dataset.num_leaves} leaves) to {path}")
    return path


def read_dataset(path: PathLike) -> Dataset:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise DatasetFormatError(f"{path} is not UTF-8 text") from e
    dataset = parse_dataset(text)
    logger.info(f"Read dataset from {path}: {len(dataset.labeled_nodes)} labeled, "
                f"{len(dataset.unlabeled_nodes)} unlabeled")
    return dataset


# ============================================================================
# GROUND-TRUTH FILES
# ============================================================================

def format_ground_truth(truth: GroundTruth) -> str:
    """Render every node, the instance, rewiring and edge permutations"""
    tree, params = truth.tree, truth.params
    lines = [format_header(tree.d, tree.h, params.q, params.k, params.variant)]

    leaf_labels = true_leaf_labels(truth)
    for flat in range(tree.num_nodes):
        node = tree.node_at(flat)
        label = int(leaf_labels[node.index]) if node.level == tree.h else \
            truth.labels.leaf_label(tree, node, truth.label_roots)
        lines.append(_format_node(node, truth.representations[flat], label))

    lines.append("[labeled]")
    lines += [str(node) for node in sorted(truth.labeled_set)]
    lines.append("[labels]")
    lines += [f"{label} {node}" for label, node in sorted(truth.label_roots.items())]
    lines.append("[rewiring]")
    for level, perm in enumerate(params.rewiring or (), start=1):
        lines.append(f"{level} {','.join(str(p) for p in perm)}")
    lines.append("[edges]")
    if truth.edge_table is not None:
        for flat in range(1, tree.num_nodes):
            lines.append(f"{tree.node_at(flat)} {','.join(str(int(p)) for p in truth.edge_table[flat])}")
    return "\n".join(lines) + "\n"


def write_ground_truth(truth: GroundTruth, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_ground_truth(truth), encoding="utf-8")
    logger.info(f"Wrote ground truth ({truth.tree.num_nodes} nodes) to {path}")
    return path


def _sections(text: str) -> Dict[str, List[str]]:
    sections: Dict[str, List[str]] = {"": []}
    current = ""
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1]
            sections[current] = []
        else:
            sections[current].append(stripped)
    return sections


def parse_rewiring(text: str) -> Optional[Tuple[Tuple[int, ...], ...]]:
    """
    Rewiring permutations from ground-truth text

    Returns:
        Tuple of Sigma_1..Sigma_h, or None if the section is empty
    """
    sections = _sections(text)
    if "rewiring" not in sections:
        raise DatasetFormatError("Ground-truth file has no [rewiring] section")
    rows = []
    for expected, line in enumerate(sections["rewiring"], start=1):
        level, _, perm = line.partition(" ")
        try:
            if int(level) != expected:
                raise DatasetFormatError(f"Rewiring levels must be listed in order, got {level} at {expected}")
            rows.append(tuple(int(p) for p in perm.split(",")))
        except ValueError as e:
            raise DatasetFormatError(f"Malformed rewiring line {line!r}") from e
    return tuple(rows) or None


def read_rewiring(path: PathLike) -> Optional[Tuple[Tuple[int, ...], ...]]:
    return parse_rewiring(Path(path).read_text(encoding="utf-8"))


def parse_truth_labels(text: str) -> Dict[int, int]:
    """Leaf index -> true label from ground-truth node lines (labeled leaves included)"""
    sections = _sections(text)
    header = parse_header(sections[""][0])
    q, k, h = header["q"], header["k"], header["h"]
    out = {}
    for lineno, line in enumerate(sections[""][1:], start=2):
        node, _, label = _parse_node_line(line, lineno, q, k)
        if node.level == h:
            out[node.index] = label
    return out
