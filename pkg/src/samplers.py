"""
Generative Samplers
IIDM, VRM and FIM representation samplers and the semi-supervised instance I(h0, h1)

Every edge applies the symmetric channel (copy with probability lambda, else a
uniform letter) coordinate-wise:
  IIDM: child = channel(parent)
  VRM:  child = sigma_e(channel(parent))            sigma_e permutes [q]
  FIM:  noisy = channel(parent)
        child[2i], child[2i+1] = sigma_e(noisy[S(2i)], noisy[S(2i+1)])
        where S is the level's rewiring and sigma_e permutes [q]^2

Pairs of letters are encoded as a*q + b throughout, so a FIM edge permutation is
just a permutation of range(q*q).

Sampling walks the tree level by level. Each node draws from its own seeded
stream (utils.seeding.node_rng) so outputs do not depend on the worker count.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from .config import get_settings
from .core import (
    UNLABELED, Dataset, LabelAssignment, Model, ModelParams, NodeRef,
    PermutationRegime, TreeTopology, letter_dtype, make_representation,
)
from .errors import InvalidParamsError
from .utils.seeding import node_rng

logger = logging.getLogger("samplers")

RootSpec = Union[str, Sequence[int], np.ndarray]

# Rows handed to one worker when a level is split across threads
_CHUNK_ROWS = 2048


# ============================================================================
# CHANNEL
# ============================================================================

def channel_step(parent_letter: int, lam: float, q: int, rand: float) -> int:
    """
    One use of the symmetric channel, driven by a single uniform draw

    Args:
        parent_letter: Letter in [0, q)
        lam: Copy probability
        q: Alphabet size
        rand: Uniform draw in [0, 1)

    Returns:
        parent_letter if rand < lam, otherwise a letter chosen uniformly from
        the remaining probability mass (which includes parent_letter)
    """
    if rand < lam:
        return int(parent_letter)
    return min(int((rand - lam) / (1.0 - lam) * q), q - 1)


def channel_array(letters: np.ndarray, lam: float, q: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized channel_step, one draw per entry of `letters`"""
    draws = rng.random(letters.shape)
    keep = draws < lam
    if lam >= 1.0:
        return letters.copy()
    fresh = np.minimum(((draws - lam) / (1.0 - lam) * q).astype(np.int64), q - 1)
    return np.where(keep, letters, fresh).astype(letters.dtype)


# ============================================================================
# EDGE PARAMETERS
# ============================================================================

@dataclass(frozen=True, eq=False)
class EdgeParams:
    """
    Relative representation on one edge

    `perm` is the image table of sigma_e: on [q] for VRM, on pair codes
    [q^2] for FIM. f and g are the two coordinates of the FIM bijection.
    """
    variant: Model
    q: int
    perm: np.ndarray

    @property
    def f(self) -> np.ndarray:
        """f[a, b]: first output letter of the FIM pair map"""
        return (self.perm // self.q).reshape(self.q, self.q)

    @property
    def g(self) -> np.ndarray:
        """g[a, b]: second output letter of the FIM pair map"""
        return (self.perm % self.q).reshape(self.q, self.q)

    def inverse(self) -> np.ndarray:
        return np.argsort(self.perm)

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.perm, np.arange(self.perm.shape[0])))


def _edge_row_count(tree: TreeTopology) -> int:
    return tree.num_nodes - 1


def draw_edge_params(tree: TreeTopology, params: ModelParams) -> Optional[np.ndarray]:
    """
    Realize the per-edge permutations for VRM/FIM

    Returns:
        Array of shape (num_nodes, Q) in level order; row 0 (the root, which
        has no incoming edge) is the identity. None for IIDM.

    Raises:
        InvalidParamsError: adversarial list has the wrong length or is not
            made of permutations
    """
    if params.variant == Model.IIDM:
        return None

    alphabet = params.edge_alphabet
    dtype = np.int64
    table = np.empty((tree.num_nodes, alphabet), dtype=dtype)
    table[0] = np.arange(alphabet)

    if params.regime == PermutationRegime.ADVERSARIAL:
        supplied = params.edge_permutations or ()
        if len(supplied) != _edge_row_count(tree):
            raise InvalidParamsError(
                f"Adversarial regime needs {_edge_row_count(tree)} edge permutations "
                f"(one per non-root node), got {len(supplied)}"
            )
        rows = np.asarray(supplied, dtype=dtype)
        if rows.shape != (_edge_row_count(tree), alphabet) or not np.all(
                np.sort(rows, axis=1) == np.arange(alphabet)):
            raise InvalidParamsError(f"Every adversarial edge entry must be a permutation of range({alphabet})")
        table[1:] = rows
        return table

    for level in range(1, tree.h + 1):
        offset = tree.level_offset(level)
        size = tree.level_size(level)
        if params.regime == PermutationRegime.SHARED:
            perm = node_rng(params.seed, level, 0, "shared-edge").permutation(alphabet)
            table[offset:offset + size] = perm
        else:
            for i in range(size):
                table[offset + i] = node_rng(params.seed, level, i, "edge").permutation(alphabet)

    logger.debug(f"Drew {params.regime.value} edge permutations for {tree.num_nodes - 1} edges")
    return table


# ============================================================================
# GROUND TRUTH AND INSTANCES
# ============================================================================

@dataclass(frozen=True)
class InstanceSpec:
    """Levels of the I(h0, h1) instance distribution"""
    h0: int
    h1: int

    def __post_init__(self):
        if not 0 < self.h0 < self.h1:
            raise InvalidParamsError(f"Instance needs 0 < h0 < h1, got h0={self.h0}, h1={self.h1}")

    def validate_for(self, tree: TreeTopology) -> None:
        if self.h1 >= tree.h:
            raise InvalidParamsError(f"Instance needs h1 < h, got h1={self.h1}, h={tree.h}")

    def num_labels(self, tree: TreeTopology) -> int:
        return tree.d ** self.h0

    def labeled_fraction(self, tree: TreeTopology) -> float:
        return 2.0 * tree.d ** (self.h0 - self.h1)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """
    Complete sample: every node's representation plus the realized edges

    representations has shape (num_nodes, k) in level order.
    edge_table has shape (num_nodes, Q) in level order (None for IIDM).
    """
    tree: TreeTopology
    params: ModelParams
    representations: np.ndarray
    edge_table: Optional[np.ndarray] = None
    labels: LabelAssignment = field(default_factory=LabelAssignment)
    labeled_set: FrozenSet[NodeRef] = frozenset()
    label_roots: Dict[int, NodeRef] = field(default_factory=dict)

    def rep(self, node: NodeRef) -> np.ndarray:
        return self.representations[self.tree.flat_index(node)]

    def level_reps(self, level: int) -> np.ndarray:
        offset = self.tree.level_offset(level)
        return self.representations[offset:offset + self.tree.level_size(level)]

    def edge_params(self, node: NodeRef) -> Optional[EdgeParams]:
        """Relative representation on the edge into `node`"""
        if self.edge_table is None:
            return None
        if node.level == 0:
            raise InvalidParamsError("The root has no incoming edge")
        return EdgeParams(self.params.variant, self.params.q, self.edge_table[self.tree.flat_index(node)])

    def with_instance(self, labels: LabelAssignment, labeled_set: FrozenSet[NodeRef]) -> "GroundTruth":
        return replace(self, labels=labels, labeled_set=frozenset(labeled_set),
                       label_roots=labels.label_roots())


def _root_representation(params: ModelParams, root_rep: RootSpec) -> np.ndarray:
    if isinstance(root_rep, str):
        if root_rep != "uniform":
            raise InvalidParamsError(f"Unknown root specification {root_rep!r}")
        rng = node_rng(params.seed, 0, 0, "root")
        return rng.integers(0, params.q, size=params.k).astype(letter_dtype(params.q))
    return make_representation(root_rep, params.q, params.k)


def _sample_rows(params: ModelParams, level: int, start: int, stop: int, parent_reps: np.ndarray,
                 edge_rows: Optional[np.ndarray], d: int) -> np.ndarray:
    """Sample rows [start, stop) of one level from the level above"""
    q, lam = params.q, params.lam
    out = np.empty((stop - start, params.k), dtype=parent_reps.dtype)
    if params.variant == Model.FIM:
        sigma = params.rewiring_for(level)
        first, second = sigma[0::2], sigma[1::2]

    for row, i in enumerate(range(start, stop)):
        noisy = channel_array(parent_reps[i // d], lam, q, node_rng(params.seed, level, i, "channel"))
        if params.variant == Model.IIDM:
            out[row] = noisy
        elif params.variant == Model.VRM:
            out[row] = edge_rows[row][noisy]
        else:
            codes = noisy[first].astype(np.int64) * q + noisy[second]
            mixed = edge_rows[row][codes]
            out[row, 0::2] = mixed // q
            out[row, 1::2] = mixed % q
    return out


def simulate(tree: TreeTopology, params: ModelParams, root_rep: RootSpec = "uniform",
             n_jobs: Optional[int] = None) -> GroundTruth:
    """
    Sample representations for every node of the tree

    Args:
        tree: Tree topology
        params: Model parameters (variant selects the kernel)
        root_rep: "uniform" or an explicit root representation
        n_jobs: Worker threads per level (defaults to TREELAB_N_JOBS)

    Returns:
        GroundTruth without an instance attached
    """
    if params.variant == Model.FIM and len(params.rewiring) < tree.h:
        raise InvalidParamsError(f"FIM needs {tree.h} rewiring permutations, got {len(params.rewiring)}")

    n_jobs = n_jobs if n_jobs is not None else get_settings().n_jobs
    edge_table = draw_edge_params(tree, params)
    root = _root_representation(params, root_rep)

    reps = np.empty((tree.num_nodes, params.k), dtype=letter_dtype(params.q))
    reps[0] = root

    for level in range(1, tree.h + 1):
        parent_offset = tree.level_offset(level - 1)
        parents = reps[parent_offset:parent_offset + tree.level_size(level - 1)]
        offset, size = tree.level_offset(level), tree.level_size(level)
        bounds = [(s, min(s + _CHUNK_ROWS, size)) for s in range(0, size, _CHUNK_ROWS)]

        def edge_slice(s, e):
            return None if edge_table is None else edge_table[offset + s:offset + e]

        if n_jobs == 1 or len(bounds) == 1:
            chunks = [_sample_rows(params, level, s, e, parents, edge_slice(s, e), tree.d) for s, e in bounds]
        else:
            chunks = Parallel(n_jobs=n_jobs, backend="threading")(
                delayed(_sample_rows)(params, level, s, e, parents, edge_slice(s, e), tree.d)
                for s, e in bounds
            )
        reps[offset:offset + size] = np.vstack(chunks)

    logger.info(f"Sampled {params.variant.value} on d={tree.d} h={tree.h} "
                f"(q={params.q}, k={params.k}, lambda={params.lam})")
    return GroundTruth(tree=tree, params=params, representations=reps, edge_table=edge_table)


def _require(params: ModelParams, variant: Model) -> None:
    if params.variant != variant:
        raise InvalidParamsError(f"Expected a {variant.value} model, got {params.variant.value}")


def sample_iidm(tree: TreeTopology, params: ModelParams, root_rep: RootSpec = "uniform",
                n_jobs: Optional[int] = None) -> GroundTruth:
    """Independent symmetric broadcast of every coordinate"""
    _require(params, Model.IIDM)
    return simulate(tree, params, root_rep, n_jobs)


def sample_vrm(tree: TreeTopology, params: ModelParams, root_rep: RootSpec = "uniform",
               n_jobs: Optional[int] = None) -> GroundTruth:
    """Broadcast followed by a per-edge relabeling of the alphabet"""
    _require(params, Model.VRM)
    return simulate(tree, params, root_rep, n_jobs)


def sample_fim(tree: TreeTopology, params: ModelParams, root_rep: RootSpec = "uniform",
               n_jobs: Optional[int] = None) -> GroundTruth:
    """Broadcast followed by level rewiring and a per-edge bijection of letter pairs"""
    _require(params, Model.FIM)
    return simulate(tree, params, root_rep, n_jobs)


def invert_fim_edge(child: np.ndarray, edge: EdgeParams, sigma: np.ndarray) -> np.ndarray:
    """
    Undo one FIM edge: recover the noisy intermediate from the child

    Args:
        child: Child representation
        edge: Edge parameters (pair-code permutation)
        sigma: Rewiring of the child's level

    Returns:
        The intermediate representation the mixing step was applied to
    """
    q = edge.q
    codes = edge.inverse()[child[0::2].astype(np.int64) * q + child[1::2]]
    noisy = np.empty_like(child)
    noisy[sigma[0::2]] = codes // q
    noisy[sigma[1::2]] = codes % q
    return noisy


def generate_instance(tree: TreeTopology, spec: InstanceSpec, seed: int) -> Tuple[LabelAssignment, FrozenSet[NodeRef]]:
    """
    Draw a labeling instance from I(h0, h1)

    Level-h0 nodes receive the labels 0..d^h0-1 in random order. Under each of
    them two distinct children are picked, and below each a uniform level-h1
    descendant; S is every leaf under those two nodes.

    Returns:
        (LabelAssignment, S)
    """
    spec.validate_for(tree)
    d, h0, h1 = tree.d, spec.h0, spec.h1
    order = node_rng(seed, h0, 0, "labels").permutation(tree.level_size(h0))
    roots = {int(order[i]): NodeRef(h0, i) for i in range(tree.level_size(h0))}

    width = d ** (h1 - h0 - 1)
    labeled = set()
    for i in range(tree.level_size(h0)):
        rng = node_rng(seed, h0, i, "instance")
        picks = rng.choice(d, size=2, replace=False)
        for child in sorted(int(c) for c in picks):
            index = (i * d + child) * width + int(rng.integers(width))
            for leaf in tree.leaf_span(NodeRef(h1, index)):
                labeled.add(NodeRef(tree.h, leaf))

    logger.debug(f"Instance I({h0},{h1}): {len(roots)} labels, {len(labeled)} labeled leaves")
    return LabelAssignment.from_roots(tree, roots), frozenset(labeled)


def _leaf_labels(tree: TreeTopology, roots: Dict[int, NodeRef]) -> np.ndarray:
    """Most specific true label per leaf; deeper roots overwrite shallower ones"""
    out = np.full(tree.num_leaves, UNLABELED, dtype=np.int64)
    for label, top in sorted(roots.items(), key=lambda item: (item[1].level, -item[0])):
        span = tree.leaf_span(top)
        out[span.start:span.stop] = label
    return out


def make_dataset(ground_truth: GroundTruth, tree: Optional[TreeTopology] = None) -> Dataset:
    """
    Withhold internal nodes and unlabeled leaves' labels

    Leaves appear in index order within the labeled and unlabeled lists.
    """
    tree = tree or ground_truth.tree
    params = ground_truth.params
    leaf_reps = ground_truth.level_reps(tree.h)
    leaf_labels = _leaf_labels(tree, ground_truth.label_roots)

    in_s = np.zeros(tree.num_leaves, dtype=bool)
    for node in ground_truth.labeled_set:
        in_s[node.index] = True
    labeled_idx = np.flatnonzero(in_s)
    unlabeled_idx = np.flatnonzero(~in_s)

    return Dataset(
        d=tree.d, h=tree.h, q=params.q, k=params.k, model=params.variant,
        labeled_nodes=tuple(NodeRef(tree.h, int(i)) for i in labeled_idx),
        labeled_reps=leaf_reps[labeled_idx],
        labels=leaf_labels[labeled_idx],
        unlabeled_nodes=tuple(NodeRef(tree.h, int(i)) for i in unlabeled_idx),
        unlabeled_reps=leaf_reps[unlabeled_idx],
    )


def true_leaf_labels(ground_truth: GroundTruth) -> np.ndarray:
    """Ground-truth label of every leaf (index order), for scoring"""
    return _leaf_labels(ground_truth.tree, ground_truth.label_roots)
