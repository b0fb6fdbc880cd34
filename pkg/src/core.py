"""
Core Types
Tree topology, node addressing, labels, model parameters and datasets

Key Design Decisions:
- The d-ary tree is implicit: node (level, index) has parent
  (level-1, index // d) and children (level+1, d*index ... d*index+d-1).
  Nothing is stored per node, so million-leaf trees cost nothing.
- Root is level 0, leaves are level h.
- Representations are numpy integer arrays of length k; whole levels are
  stored as 2-D arrays in level order (see TreeTopology.flat_index).
- Labels are opaque integers; UNLABELED (-1) is the "no label" sentinel.

All types are immutable after construction and safe to share between workers.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .config import get_settings
from .errors import InvalidParamsError, InvalidTreeError
from .utils.seeding import node_rng

logger = logging.getLogger("core")

UNLABELED = -1


def letter_dtype(q: int) -> np.dtype:
    """Smallest unsigned dtype holding letters of an alphabet of size q"""
    if q <= 256:
        return np.dtype(np.uint8)
    if q <= 65536:
        return np.dtype(np.uint16)
    return np.dtype(np.uint32)


# ============================================================================
# TREE TOPOLOGY
# ============================================================================

@dataclass(frozen=True, order=True)
class NodeRef:
    """Address of a node: (level, index within level)"""
    level: int
    index: int

    def __str__(self) -> str:
        return f"{self.level}:{self.index}"

    @classmethod
    def parse(cls, text: str) -> "NodeRef":
        """Parse the `<level>:<index>` form"""
        try:
            level, index = text.split(":")
            return cls(int(level), int(index))
        except ValueError as e:
            raise InvalidTreeError(f"Malformed node reference {text!r}") from e


@dataclass(frozen=True)
class TreeTopology:
    """
    Complete d-ary tree with h levels below the root

    Args:
        d: Arity (>= 2)
        h: Height (>= 1); leaves live at level h
    """
    d: int
    h: int

    def __post_init__(self):
        if self.d < 2:
            raise InvalidTreeError(f"Arity must be >= 2, got d={self.d}")
        if self.h < 1:
            raise InvalidTreeError(f"Height must be >= 1, got h={self.h}")
        cap = get_settings().max_nodes
        if self.num_nodes > cap:
            raise InvalidTreeError(
                f"Tree with d={self.d}, h={self.h} has {self.num_nodes:,} nodes, "
                f"above the configured cap of {cap:,} (TREELAB_MAX_NODES)"
            )

    # ------------------------------------------------------------------
    # Sizes and storage order
    # ------------------------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return (self.d ** (self.h + 1) - 1) // (self.d - 1)

    @property
    def num_leaves(self) -> int:
        return self.d ** self.h

    @property
    def root(self) -> NodeRef:
        return NodeRef(0, 0)

    def level_size(self, level: int) -> int:
        return self.d ** level

    def level_offset(self, level: int) -> int:
        """Flat index of the first node of a level in level-order storage"""
        return (self.d ** level - 1) // (self.d - 1)

    def flat_index(self, node: NodeRef) -> int:
        self.validate_node(node)
        return self.level_offset(node.level) + node.index

    def node_at(self, flat: int) -> NodeRef:
        if not 0 <= flat < self.num_nodes:
            raise InvalidTreeError(f"Flat index {flat} outside tree of {self.num_nodes} nodes")
        level = 0
        while self.level_offset(level + 1) <= flat:
            level += 1
        return NodeRef(level, flat - self.level_offset(level))

    # ------------------------------------------------------------------
    # Navigation
    # ------------------------------------------------------------------

    def contains(self, node: NodeRef) -> bool:
        return 0 <= node.level <= self.h and 0 <= node.index < self.d ** node.level

    def validate_node(self, node: NodeRef) -> None:
        if not self.contains(node):
            raise InvalidTreeError(f"Node {node} is not in the tree (d={self.d}, h={self.h})")

    def is_leaf(self, node: NodeRef) -> bool:
        self.validate_node(node)
        return node.level == self.h

    def parent(self, node: NodeRef) -> NodeRef:
        self.validate_node(node)
        if node.level == 0:
            raise InvalidTreeError("The root has no parent")
        return NodeRef(node.level - 1, node.index // self.d)

    def children(self, node: NodeRef) -> List[NodeRef]:
        self.validate_node(node)
        if node.level == self.h:
            return []
        first = node.index * self.d
        return [NodeRef(node.level + 1, first + j) for j in range(self.d)]

    def ancestor(self, node: NodeRef, level: int) -> NodeRef:
        """Ancestor of node at the given (shallower or equal) level"""
        self.validate_node(node)
        if not 0 <= level <= node.level:
            raise InvalidTreeError(f"Level {level} is not above node {node}")
        return NodeRef(level, node.index // self.d ** (node.level - level))

    def mca(self, u: NodeRef, v: NodeRef) -> NodeRef:
        """Most common (deepest shared) ancestor of two nodes"""
        level = min(u.level, v.level)
        a, b = self.ancestor(u, level), self.ancestor(v, level)
        while a != b:
            a, b = self.parent(a), self.parent(b)
        return a

    def nodes_at(self, level: int) -> Iterator[NodeRef]:
        if not 0 <= level <= self.h:
            raise InvalidTreeError(f"Level {level} outside [0, {self.h}]")
        for i in range(self.d ** level):
            yield NodeRef(level, i)

    def leaves(self) -> List[NodeRef]:
        return list(self.nodes_at(self.h))

    def descendants_at(self, node: NodeRef, level: int) -> range:
        """Indices (within `level`) of the descendants of node at that level"""
        self.validate_node(node)
        if not node.level <= level <= self.h:
            raise InvalidTreeError(f"Level {level} is not below node {node}")
        width = self.d ** (level - node.level)
        return range(node.index * width, (node.index + 1) * width)

    def leaf_span(self, node: NodeRef) -> range:
        return self.descendants_at(node, self.h)


def build_tree(d: int, h: int) -> TreeTopology:
    """Build the complete d-ary tree of height h"""
    tree = TreeTopology(d, h)
    logger.debug(f"Built tree d={d} h={h}: {tree.num_leaves:,} leaves, {tree.num_nodes:,} nodes")
    return tree


def graph_distance(tree: TreeTopology, u: NodeRef, v: NodeRef) -> int:
    """Number of edges on the unique path between u and v"""
    tree.validate_node(u)
    tree.validate_node(v)
    top = tree.mca(u, v)
    return (u.level - top.level) + (v.level - top.level)


# ============================================================================
# REPRESENTATIONS
# ============================================================================

def make_representation(letters: Sequence[int], q: int, k: int) -> np.ndarray:
    """
    Validate and pack letters into a representation array

    Raises:
        InvalidParamsError: wrong length or letter outside [0, q)
    """
    rep = np.asarray(letters, dtype=np.int64)
    if rep.ndim != 1 or rep.shape[0] != k:
        raise InvalidParamsError(f"Representation must have length k={k}, got shape {rep.shape}")
    if rep.size and (rep.min() < 0 or rep.max() >= q):
        raise InvalidParamsError(f"Representation letters must lie in [0, {q})")
    return rep.astype(letter_dtype(q))


# ============================================================================
# LABELS
# ============================================================================

@dataclass(frozen=True)
class LabelAssignment:
    """Map from node to the set of labels it carries"""
    node_labels: Mapping[NodeRef, FrozenSet[int]] = field(default_factory=dict)

    @classmethod
    def from_roots(cls, tree: TreeTopology, roots: Mapping[int, NodeRef]) -> "LabelAssignment":
        """Give each label to its root node and every descendant of it"""
        mapping: Dict[NodeRef, set] = {}
        for label, top in roots.items():
            tree.validate_node(top)
            for level in range(top.level, tree.h + 1):
                for index in tree.descendants_at(top, level):
                    mapping.setdefault(NodeRef(level, index), set()).add(int(label))
        return cls({node: frozenset(labels) for node, labels in mapping.items()})

    def labels_of(self, node: NodeRef) -> FrozenSet[int]:
        return self.node_labels.get(node, frozenset())

    def all_labels(self) -> List[int]:
        found = set()
        for labels in self.node_labels.values():
            found |= labels
        return sorted(found)

    def label_root(self, label: int) -> Optional[NodeRef]:
        """Highest node carrying the label (smallest level, then index)"""
        carriers = [node for node, labels in self.node_labels.items() if label in labels]
        return min(carriers) if carriers else None

    def label_roots(self) -> Dict[int, NodeRef]:
        roots: Dict[int, NodeRef] = {}
        for node, labels in self.node_labels.items():
            for label in labels:
                if label not in roots or node < roots[label]:
                    roots[label] = node
        return roots

    def leaf_label(self, tree: TreeTopology, leaf: NodeRef, roots: Optional[Dict[int, NodeRef]] = None) -> int:
        """
        Most specific label of a node: the one whose root is deepest

        Ties go to the smallest label id; nodes without labels give UNLABELED.
        """
        labels = self.labels_of(leaf)
        if not labels:
            return UNLABELED
        roots = roots if roots is not None else self.label_roots()
        return min(labels, key=lambda lab: (-roots[lab].level, lab))


@dataclass(frozen=True)
class LabelingReport:
    ok: bool
    label: Optional[int] = None
    nodes: Optional[Tuple[NodeRef, NodeRef]] = None
    reason: str = ""


def validate_labeling(tree: TreeTopology, labels: LabelAssignment) -> LabelingReport:
    """
    Check the nested-label invariants

    A label must be carried by every descendant of a carrier (monotone) and its
    carriers must form one subtree (single topmost carrier).

    Returns:
        LabelingReport; on failure it names the label and the offending pair
    """
    for node in sorted(labels.node_labels):
        if not tree.contains(node):
            return LabelingReport(False, None, (node, node), f"node {node} is not in the tree")

    for label in labels.all_labels():
        carriers = sorted(n for n, labs in labels.node_labels.items() if label in labs)
        carrier_set = set(carriers)

        for node in carriers:
            for child in tree.children(node):
                if child not in carrier_set:
                    return LabelingReport(False, label, (node, child),
                                          f"label {label} on {node} missing from descendant {child}")

        tops = [n for n in carriers if n.level == 0 or tree.parent(n) not in carrier_set]
        if len(tops) > 1:
            return LabelingReport(False, label, (tops[0], tops[1]),
                                  f"label {label} carried by disjoint subtrees at {tops[0]} and {tops[1]}")

    return LabelingReport(True)


# ============================================================================
# MODEL PARAMETERS
# ============================================================================

class Model(str, Enum):
    IIDM = "IIDM"
    VRM = "VRM"
    FIM = "FIM"


class PermutationRegime(str, Enum):
    ADVERSARIAL = "adversarial"
    RANDOM = "random"
    SHARED = "shared"


def check_rewiring(perm: Sequence[int], k: int) -> Optional[str]:
    """
    Validate one rewiring permutation of [k]

    Returns:
        None if valid, otherwise a description of the problem
    """
    perm = list(perm)
    if sorted(perm) != list(range(k)):
        return f"rewiring is not a permutation of range({k})"
    for i in range(k // 2):
        if {perm[2 * i], perm[2 * i + 1]} == {2 * i, 2 * i + 1}:
            return f"rewiring keeps pair ({2 * i}, {2 * i + 1}) in place"
    return None


def is_parity_preserving(perm: Sequence[int]) -> bool:
    """True if even positions map to even positions (and odd to odd)"""
    return all((p - i) % 2 == 0 for i, p in enumerate(perm))


def default_rewirings(k: int, h: int, seed: int, max_attempts: int = 1000) -> Tuple[Tuple[int, ...], ...]:
    """
    Random parity-preserving rewirings for levels 1..h

    Even positions are shuffled among even positions and odd among odd, then
    redrawn until no pair is mapped onto itself.

    Raises:
        InvalidParamsError: k odd or smaller than 4 (no valid rewiring exists)
    """
    if k % 2 or k < 4:
        raise InvalidParamsError(f"FIM rewiring needs an even k >= 4, got k={k}")
    evens = np.arange(0, k, 2)
    odds = np.arange(1, k, 2)
    perms = []
    for level in range(1, h + 1):
        rng = node_rng(seed, level, 0, "rewiring")
        for _ in range(max_attempts):
            perm = np.empty(k, dtype=np.int64)
            perm[0::2] = rng.permutation(evens)
            perm[1::2] = rng.permutation(odds)
            if check_rewiring(perm, k) is None:
                perms.append(tuple(int(p) for p in perm))
                break
        else:
            raise InvalidParamsError(f"Could not draw a valid rewiring for level {level}")
    return tuple(perms)


@dataclass(frozen=True)
class ModelParams:
    """
    Generative model parameters

    Args:
        variant: IIDM, VRM or FIM
        q: Alphabet size
        k: Representation length
        lam: Copy probability of the symmetric channel
        regime: How per-edge permutations are chosen (VRM/FIM)
        rewiring: Sigma_1..Sigma_h, FIM only; entry j-1 rewires into level j
        edge_permutations: Adversarial regime only; one permutation image per
            edge, edges listed by child node in level order
        seed: Master seed
    """
    variant: Model
    q: int
    k: int
    lam: float
    regime: PermutationRegime = PermutationRegime.RANDOM
    rewiring: Optional[Tuple[Tuple[int, ...], ...]] = None
    edge_permutations: Optional[Tuple[Tuple[int, ...], ...]] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Model(self.variant))
        object.__setattr__(self, "regime", PermutationRegime(self.regime))
        if self.q < 2:
            raise InvalidParamsError(f"Alphabet size must be >= 2, got q={self.q}")
        if self.k < 1:
            raise InvalidParamsError(f"Representation length must be >= 1, got k={self.k}")
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidParamsError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.variant == Model.FIM:
            if self.k % 2:
                raise InvalidParamsError(f"FIM needs an even k, got k={self.k}")
            if not self.rewiring:
                raise InvalidParamsError("FIM needs rewiring permutations (see default_rewirings)")
            for j, perm in enumerate(self.rewiring, start=1):
                problem = check_rewiring(perm, self.k)
                if problem:
                    raise InvalidParamsError(f"Sigma_{j}: {problem}")
        if self.regime == PermutationRegime.ADVERSARIAL and self.variant != Model.IIDM:
            if self.edge_permutations is None:
                raise InvalidParamsError("Adversarial regime needs caller-supplied edge_permutations")

    @property
    def edge_alphabet(self) -> int:
        """Size of the set each edge permutation acts on"""
        return self.q * self.q if self.variant == Model.FIM else self.q

    def rewiring_for(self, level: int) -> np.ndarray:
        """Sigma for edges into `level` (1-based)"""
        if not self.rewiring or not 1 <= level <= len(self.rewiring):
            raise InvalidParamsError(f"No rewiring for level {level}")
        return np.asarray(self.rewiring[level - 1], dtype=np.int64)


# ============================================================================
# DATASET
# ============================================================================

@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Inference input: labeled and unlabeled leaf representations

    Node references of unlabeled entries are kept for scoring only; inference
    code treats them as opaque identifiers.
    """
    d: int
    h: int
    q: int
    k: int
    model: Model
    labeled_nodes: Tuple[NodeRef, ...]
    labeled_reps: np.ndarray
    labels: np.ndarray
    unlabeled_nodes: Tuple[NodeRef, ...]
    unlabeled_reps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        dtype = letter_dtype(self.q)
        labeled = np.asarray(self.labeled_reps).reshape(len(self.labeled_nodes), self.k).astype(dtype)
        unlabeled = np.asarray(self.unlabeled_reps).reshape(len(self.unlabeled_nodes), self.k).astype(dtype)
        object.__setattr__(self, "labeled_reps", labeled)
        object.__setattr__(self, "unlabeled_reps", unlabeled)
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64).reshape(-1))
        if self.labels.shape[0] != len(self.labeled_nodes):
            raise InvalidParamsError("One label is required per labeled leaf")
        for block in (self.labeled_reps, self.unlabeled_reps):
            if block.size and int(block.max()) >= self.q:
                raise InvalidParamsError(f"Letters must lie in [0, {self.q})")

        nodes = list(self.labeled_nodes) + list(self.unlabeled_nodes)
        if len(set(nodes)) != len(nodes):
            raise InvalidParamsError("A leaf appears more than once in the dataset")
        leaves = self.d ** self.h
        if len(nodes) != leaves or any(n.level != self.h or not 0 <= n.index < leaves for n in nodes):
            raise InvalidParamsError("Labeled and unlabeled leaves must partition the leaf set")

    @property
    def labeled(self) -> List[Tuple[NodeRef, np.ndarray, int]]:
        return [(n, self.labeled_reps[i], int(self.labels[i])) for i, n in enumerate(self.labeled_nodes)]

    @property
    def unlabeled(self) -> List[Tuple[NodeRef, np.ndarray]]:
        return [(n, self.unlabeled_reps[i]) for i, n in enumerate(self.unlabeled_nodes)]

    @property
    def num_leaves(self) -> int:
        return len(self.labeled_nodes) + len(self.unlabeled_nodes)

    def all_reps(self) -> Tuple[List[NodeRef], np.ndarray]:
        """Labeled entries followed by unlabeled entries, in dataset order"""
        nodes = list(self.labeled_nodes) + list(self.unlabeled_nodes)
        return nodes, np.vstack([self.labeled_reps, self.unlabeled_reps])

    def tree(self) -> TreeTopology:
        return TreeTopology(self.d, self.h)
