"""
Deep Reconstruction
Recover the tree from leaf representations and propagate labels along it

Loop (starting at the leaves, h' = h):
  LS    estimate pairwise similarities among the current level's estimates and
        join them, closest first, into complete d-ary subtrees of r levels;
        the quality of reconstructed estimates is measured from their
        inferred siblings
  Cond  h' := h' - r; stop once h' <= 0 (the last window may be shorter)
  AR    reconstruct each subtree root by belief propagation; VRM members are
        first relabeled onto one member, FIM groups go through pair-map
        recovery, alignment, rewiring inversion and flip resolution

The inferred tree is a hierarchy over dataset rows (labeled rows first, then
unlabeled rows). Leaf NodeRefs are carried along for scoring and output only.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy import sparse

from .ancestral import Hierarchy, ancestral_bp, calibrate_quality
from .config import get_settings
from .core import UNLABELED, Dataset, LabelAssignment, Model, ModelParams, NodeRef, TreeTopology, is_parity_preserving
from .distances import (
    estimate_distance_matrix, pair_codes, pairwise_hamming, pairwise_relative_hamming, relative_hamming,
)
from .errors import CorruptInputError, InvalidParamsError, ReconstructionError, UnsupportedConfigurationError
from .fim_recovery import align_to_reference, decode_letters, fim_recover_pairperm, fim_resolve_flip, unrewire

logger = logging.getLogger("reconstruct")


# ============================================================================
# INFERRED TOPOLOGY
# ============================================================================

@dataclass(frozen=True, eq=False)
class InferredNode:
    """Node of the inferred hierarchy; `leaves` are sorted dataset rows"""
    level: int
    leaves: Tuple[int, ...]
    children: Tuple["InferredNode", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True, eq=False)
class InferredTree:
    """
    Rooted hierarchy over dataset rows

    Args:
        root: Root node
        leaf_refs: Dataset NodeRef of every row, for output and scoring
        height: Level of the leaves
    """
    root: InferredNode
    leaf_refs: Tuple[NodeRef, ...]
    height: int
    _paths: Dict[int, Tuple[InferredNode, ...]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        paths: Dict[int, Tuple[InferredNode, ...]] = {}
        stack = [(self.root, (self.root,))]
        while stack:
            node, path = stack.pop()
            if node.is_leaf:
                paths[node.leaves[0]] = path
            for child in node.children:
                stack.append((child, path + (child,)))
        object.__setattr__(self, "_paths", paths)

    @classmethod
    def from_hierarchy(cls, hierarchy: Hierarchy, leaf_refs: Sequence[NodeRef], height: int) -> "InferredTree":
        """Build from a nested tuple over rows whose depth is `height`"""
        leaves = [InferredNode(height, (row,)) for row in range(len(leaf_refs))]
        return cls(_build_nodes(hierarchy, leaves, 0), tuple(leaf_refs), height)

    @classmethod
    def from_topology(cls, tree: TreeTopology, leaf_refs: Sequence[NodeRef]) -> "InferredTree":
        """The true tree over dataset rows (leaf_refs[row] is the row's leaf)"""
        row_of = {ref.index: row for row, ref in enumerate(leaf_refs)}

        def build(node: NodeRef) -> Hierarchy:
            if node.level == tree.h:
                return row_of[node.index]
            return tuple(build(child) for child in tree.children(node))

        return cls.from_hierarchy(build(tree.root), leaf_refs, tree.h)

    @property
    def num_leaves(self) -> int:
        return len(self._paths)

    def path(self, row: int) -> Tuple[InferredNode, ...]:
        return self._paths[row]

    def clades(self) -> Set[frozenset]:
        """Leaf sets of all internal nodes"""
        out, stack = set(), [self.root]
        while stack:
            node = stack.pop()
            if not node.is_leaf:
                out.add(frozenset(node.leaves))
                stack.extend(node.children)
        return out

    def mca(self, rows: Sequence[int]) -> InferredNode:
        """Deepest node whose leaves include every row"""
        rows = list(rows)
        wanted = set(rows)
        for node in reversed(self._paths[rows[0]]):
            if wanted.issubset(node.leaves):
                return node
        return self.root

    def graph_distance(self, a: int, b: int) -> int:
        top = self.mca([a, b])
        return 2 * (self.height - top.level)

    def matches(self, tree: TreeTopology) -> bool:
        """True if the clades equal those of the true tree (via leaf_refs)"""
        row_of = {ref.index: row for row, ref in enumerate(self.leaf_refs)}
        truth = set()
        for level in range(tree.h):
            for node in tree.nodes_at(level):
                span = tree.leaf_span(node)
                truth.add(frozenset(row_of[i] for i in span))
        return truth == self.clades()

    def to_nested(self):
        """Nested lists of leaf indices (leaf id = index of the leaf NodeRef)"""
        def walk(node):
            if node.is_leaf:
                return self.leaf_refs[node.leaves[0]].index
            return [walk(child) for child in node.children]
        return walk(self.root)


def _flatten(hierarchy: Hierarchy) -> List[int]:
    if isinstance(hierarchy, (int, np.integer)):
        return [int(hierarchy)]
    out = []
    for child in hierarchy:
        out.extend(_flatten(child))
    return out


def _reindex(hierarchy: Hierarchy, mapping: Dict[int, int]) -> Hierarchy:
    if isinstance(hierarchy, (int, np.integer)):
        return mapping[int(hierarchy)]
    return tuple(_reindex(child, mapping) for child in hierarchy)


def _build_nodes(hierarchy: Hierarchy, current: Sequence[InferredNode], level: int) -> InferredNode:
    """Turn a group over current-level indices into an InferredNode at `level`"""
    if isinstance(hierarchy, (int, np.integer)):
        return current[int(hierarchy)]
    children = tuple(_build_nodes(child, current, level + 1) for child in hierarchy)
    leaves = tuple(sorted(row for child in children for row in child.leaves))
    return InferredNode(level, leaves, children)


# ============================================================================
# RESULTS
# ============================================================================

@dataclass
class Diagnostics:
    """Per-level statistics of one reconstruction"""
    r: int = 0
    margins: List[Dict[str, float]] = field(default_factory=list)
    quality_trace: List[Dict[str, float]] = field(default_factory=list)
    failure_reason: Optional[str] = None
    k_over_log_n: float = 0.0
    calibration_samples: int = 0
    sibling_permutations: List[Tuple[int, int, List[int]]] = field(default_factory=list)
    fim_groups: List[Dict] = field(default_factory=list)

    def min_margin(self) -> Optional[float]:
        return min((m["margin"] for m in self.margins), default=None)

    def to_dict(self) -> Dict:
        return {
            "r": self.r,
            "min_margin": self.min_margin(),
            "margins": self.margins,
            "quality_trace": self.quality_trace,
            "failure_reason": self.failure_reason,
            "k_over_log_n": round(self.k_over_log_n, 6),
            "calibration_samples": self.calibration_samples,
        }


@dataclass
class ReconstructionResult:
    """Inferred topology, inferred leaf labels (dataset row order) and diagnostics"""
    tree: Optional[InferredTree]
    leaf_labels: np.ndarray
    leaf_refs: Tuple[NodeRef, ...]
    diagnostics: Diagnostics

    @property
    def success(self) -> bool:
        return self.tree is not None and self.diagnostics.failure_reason is None

    def label_map(self) -> Dict[str, int]:
        return {str(ref): int(label) for ref, label in zip(self.leaf_refs, self.leaf_labels)}

    def to_dict(self) -> Dict:
        return {
            "tree": self.tree.to_nested() if self.tree is not None else None,
            "labels": self.label_map(),
            "diagnostics": self.diagnostics.to_dict(),
        }


@dataclass
class ReconState:
    """Working state between iterations"""
    level: int
    r: int
    reps: np.ndarray
    quality: float
    nodes: List[InferredNode]


# ============================================================================
# LOCAL STRUCTURE
# ============================================================================

# A joined group's mean linkage may lie at most this far past its radius
LINKAGE_SLACK = 1.0
# Half-gap between sibling and cousin distances with exact statistics
NOISELESS_MARGIN = 1.0


@dataclass(frozen=True, eq=False)
class LocalStructure:
    """
    Grouping of one level into r-level subtrees

    margin is half the smallest gap, in tree-distance units, between the
    loosest join inside a group and the closest pair across groups.
    quality is the value the distances were inverted with (measured from
    inferred siblings unless given).
    """
    groups: List[Hierarchy]
    margin: float
    distances: np.ndarray
    sigmas: Optional[np.ndarray] = None
    quality: float = 1.0


def _raw_distances(reps: np.ndarray, params: ModelParams) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    q = params.q
    if params.variant == Model.IIDM:
        return pairwise_hamming(reps, q), None
    if params.variant == Model.VRM:
        return pairwise_relative_hamming(reps, q)

    # FIM: relative over letter pairs, converted back to a per-letter value
    codes = pair_codes(reps, q)
    n = reps.shape[0]
    raw = np.zeros((n, n))
    for u in range(n):
        for v in range(u + 1, n):
            pair_raw, _ = relative_hamming(codes[u], codes[v], q * q)
            raw[u, v] = raw[v, u] = 1.0 - math.sqrt(max(1.0 - pair_raw, 0.0))
    return raw, None


def _to_distance(lam_power, lam: float, cap: float) -> np.ndarray:
    """log(lam_power) / log(lambda), capped; non-positive powers map to the cap"""
    lam_power = np.asarray(lam_power, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.where(lam_power > 0, np.log(np.maximum(lam_power, 1e-300)) / math.log(lam), np.inf)
    return np.minimum(dist, cap)


def _linkage(similarity: np.ndarray, cluster_of_row: np.ndarray, m: int) -> np.ndarray:
    """Average similarity between every pair of clusters"""
    n = similarity.shape[0]
    member = sparse.csr_matrix((np.ones(n), (cluster_of_row, np.arange(n))), shape=(m, n))
    sizes = np.asarray(member.sum(axis=1)).ravel()
    total = np.asarray(member @ np.asarray(member @ similarity).T)
    return total / np.outer(sizes, sizes)


def _partition(linkage: np.ndarray, arity: int, level: Optional[int]) -> List[List[int]]:
    """
    Split clusters into groups of `arity`, most similar first

    Every open cluster proposes itself with its arity-1 most similar open
    clusters. Proposals are accepted by decreasing mean similarity while they
    stay disjoint; clusters left over are partitioned again among themselves.
    """
    m = linkage.shape[0]
    if m % arity:
        raise ReconstructionError(f"{m} nodes cannot be split into groups of {arity}",
                                  stage="local_structure", level=level)
    pairs_inside = ~np.eye(arity, dtype=bool)
    open_items = np.arange(m)
    groups: List[List[int]] = []
    while open_items.size:
        if open_items.size == arity:
            groups.append(open_items.tolist())
            break
        sub = linkage[np.ix_(open_items, open_items)].copy()
        np.fill_diagonal(sub, -np.inf)
        nearest = np.argpartition(-sub, arity - 2, axis=1)[:, :arity - 1]
        proposals = np.hstack([np.arange(open_items.size)[:, None], nearest])
        block = sub[proposals[:, :, None], proposals[:, None, :]]
        tightness = block[:, pairs_inside].mean(axis=1)

        taken = np.zeros(open_items.size, dtype=bool)
        for i in np.argsort(-tightness, kind="stable"):
            members = proposals[i]
            if taken[members].any():
                continue
            taken[members] = True
            groups.append(sorted(open_items[members].tolist()))
        open_items = open_items[~taken]
    return sorted(groups)


def _measure_quality(similarity: np.ndarray, groups: List[List[int]], lam: float,
                     level: Optional[int]) -> float:
    """Quality from inferred sibling pairs, whose similarity is quality^2 * lambda^2"""
    values = [similarity[u, v] for members in groups for i, u in enumerate(members) for v in members[i + 1:]]
    mean = float(np.mean(values))
    if mean <= 0:
        raise ReconstructionError("Inferred siblings share no signal", stage="local_structure", level=level)
    return float(min(max(math.sqrt(mean) / lam, 1e-3), 1.0))


def _check_groups(linkage: np.ndarray, groups: List[List[int]], quality: float, lam: float,
                  radius: int, cap: float, level: Optional[int]) -> Optional[float]:
    """
    Reject groups whose members are not related at `radius`

    Returns:
        Smallest half-gap between inner and outer linkage, None for a single group
    """
    scale = quality * quality
    dist = _to_distance(linkage / scale, lam, cap)
    m = linkage.shape[0]
    group_of = np.empty(m, dtype=np.int64)
    for g, members in enumerate(groups):
        group_of[members] = g
    outer = group_of[:, None] != group_of[None, :]
    nearest_outside = np.where(outer, dist, np.inf).min(axis=1)

    margin = None
    off = ~np.eye(len(groups[0]), dtype=bool)
    for members in groups:
        inner = linkage[np.ix_(members, members)][off]
        mean_dist = float(_to_distance(inner.mean() / scale, lam, cap))
        if not mean_dist < radius + LINKAGE_SLACK:
            raise ReconstructionError(f"Group at radius {radius} has mean distance {mean_dist:.2f}",
                                      stage="local_structure", level=level)
        if m > len(members):
            loosest = float(dist[np.ix_(members, members)][off].max())
            gap = 0.5 * (float(nearest_outside[members].min()) - loosest)
            margin = gap if margin is None else min(margin, gap)
    return margin


def local_structure(reps: np.ndarray, quality: Optional[float], params: ModelParams, r: int, arity: int,
                    level: Optional[int] = None) -> LocalStructure:
    """
    Group current-level nodes into complete arity-ary subtrees of r levels

    Joins one level at a time, neighbor-joining style: at step j the current
    clusters are split into groups of `arity` by average similarity, then each
    group's mean linkage is inverted into a distance that must stay near 2j.
    The grouping itself only ranks similarities, so it does not depend on the
    quality; the quality enters the consistency check and the margins.

    Args:
        reps: (n, k) current estimates
        quality: Quality of the estimates; None measures it from the inferred siblings
        params: Model parameters
        r: Levels to join
        arity: d

    Returns:
        LocalStructure whose groups are nested tuples over row indices

    Raises:
        ReconstructionError: a group is not related at its radius, or the raw
            statistics are impossible under the model
    """
    n = reps.shape[0]
    raw, sigmas = _raw_distances(reps, params)
    similarity = 1.0 - raw * params.q / (params.q - 1)
    cap = 2 * r + 2

    clusters: List[Hierarchy] = list(range(n))
    cluster_of_row = np.arange(n)
    gaps = []
    for j in range(1, r + 1):
        linkage = similarity if j == 1 else _linkage(similarity, cluster_of_row, len(clusters))
        groups = _partition(linkage, arity, level)
        if quality is None:
            quality = _measure_quality(linkage, groups, params.lam, level)
        gap = _check_groups(linkage, groups, quality, params.lam, 2 * j, cap, level)
        if gap is not None:
            gaps.append(gap)

        group_of = np.empty(len(clusters), dtype=np.int64)
        for g, members in enumerate(groups):
            group_of[members] = g
        clusters = [tuple(clusters[c] for c in members) for members in groups]
        cluster_of_row = group_of[cluster_of_row]

    try:
        dist, _, _ = estimate_distance_matrix(raw, params.lam, quality, quality, params.q, r)
    except CorruptInputError as e:
        raise ReconstructionError(str(e), stage="local_structure", level=level) from e

    margin = min(gaps) if gaps else NOISELESS_MARGIN
    logger.debug(f"Local structure at level {level}: {len(clusters)} groups, margin {margin:.3f}, "
                 f"quality {quality:.4f}")
    return LocalStructure(clusters, margin, dist, sigmas, quality)


# ============================================================================
# RECONSTRUCTION
# ============================================================================

def _check_inputs(data: Dataset, params: ModelParams) -> None:
    if (data.q, data.k, data.model) != (params.q, params.k, params.variant):
        raise InvalidParamsError(
            f"Dataset (q={data.q}, k={data.k}, {data.model.value}) does not match model "
            f"(q={params.q}, k={params.k}, {params.variant.value})")
    if not 0.0 < params.lam < 1.0:
        raise UnsupportedConfigurationError(
            f"Reconstruction needs lambda in (0, 1), got {params.lam}", stage="configure")
    if params.variant == Model.FIM:
        if data.d < 3:
            raise UnsupportedConfigurationError("FIM reconstruction needs d >= 3", stage="configure")
        if len(params.rewiring) < data.h or not all(is_parity_preserving(s) for s in params.rewiring):
            raise UnsupportedConfigurationError(
                "FIM reconstruction needs one parity-preserving rewiring per level", stage="configure")


def _reconstruct_group(group: Hierarchy, state: ReconState, params: ModelParams,
                       sigmas: Optional[np.ndarray]) -> np.ndarray:
    """BP estimate of one IIDM/VRM subtree root"""
    members = _flatten(group)
    local = _reindex(group, {row: i for i, row in enumerate(members)})
    letters = state.reps[members]
    if params.variant == Model.VRM:
        anchor = members[0]
        letters = np.vstack([sigmas[row, anchor][state.reps[row]] for row in members])
    return ancestral_bp(local, letters, state.quality, params.lam, params.q).root_letters


def _reconstruct_fim_level(groups: List[Hierarchy], state: ReconState, params: ModelParams,
                           diagnostics: Diagnostics, record: bool) -> np.ndarray:
    q, level = params.q, state.level
    sigma = params.rewiring_for(level)
    candidates = []
    records = []
    for group in groups:
        members = _flatten(group)
        siblings = [state.reps[row] for row in members]
        recoveries = fim_recover_pairperm(siblings, q)
        decoded = [decode_letters(s, rec) for s, rec in zip(siblings, recoveries)]
        aligned = [decoded[0]] + [align_to_reference(x, decoded[0], q)[0] for x in decoded[1:]]
        estimate = ancestral_bp(tuple(range(len(members))), np.vstack(aligned),
                                state.quality, params.lam, q).root_letters
        candidates.append(unrewire(estimate, sigma))
        records.append({"members": members, "decodes": [rec.decode.tolist() for rec in recoveries]})

    if len(candidates) >= 2:
        flips = fim_resolve_flip(candidates, q).flips
    else:
        flips = [False] * len(candidates)

    if record:
        for rec, flipped in zip(records, flips):
            rec["flipped"] = flipped
            diagnostics.fim_groups.append(rec)
    return np.vstack([pair[int(f)] for pair, f in zip(candidates, flips)])


def _join_levels(data: Dataset, params: ModelParams, r: int, reps: np.ndarray,
                 diagnostics: Diagnostics) -> InferredNode:
    """LS, Cond and AR from the leaves up; returns the root of the inferred hierarchy"""
    settings = get_settings()
    n = reps.shape[0]
    state = ReconState(level=data.h, r=r, reps=reps, quality=1.0,
                       nodes=[InferredNode(data.h, (row,)) for row in range(n)])
    calibrated = 1.0

    while True:
        window = min(r, state.level)
        # leaves are exact; reconstructed levels are measured from their inferred siblings
        known = 1.0 if state.level == data.h else None
        structure = local_structure(state.reps, known, params, window, data.d, state.level)
        state.quality = structure.quality
        diagnostics.margins.append({"level": state.level, "margin": round(structure.margin, 6)})
        diagnostics.quality_trace.append({"level": state.level, "quality": round(structure.quality, 6),
                                          "calibrated": round(calibrated, 6)})
        new_level = state.level - window
        new_nodes = [_build_nodes(group, state.nodes, new_level) for group in structure.groups]

        if params.variant == Model.VRM and state.level == data.h:
            for group in structure.groups:
                members = _flatten(group)
                for i in range(0, len(members), data.d):
                    first = members[i]
                    for other in members[i + 1:i + data.d]:
                        diagnostics.sibling_permutations.append(
                            (first, other, structure.sigmas[first, other].tolist()))

        if new_level <= 0:
            if len(new_nodes) != 1:
                raise ReconstructionError(f"{len(new_nodes)} subtrees left at the root",
                                          stage="local_structure", level=state.level)
            return new_nodes[0]

        calibrated = calibrate_quality(data.d, window, params.lam, params.q, state.quality,
                                       settings.calibration_samples, settings.calibration_seed)
        if params.variant == Model.FIM:
            estimates = _reconstruct_fim_level(structure.groups, state, params, diagnostics,
                                               record=state.level == data.h)
        else:
            estimates = np.vstack([_reconstruct_group(g, state, params, structure.sigmas)
                                   for g in structure.groups])

        logger.info(f"Level {state.level} -> {new_level}: {len(new_nodes)} nodes, "
                    f"quality {state.quality:.4f}, calibrated next {calibrated:.4f}")
        state = ReconState(level=new_level, r=r, reps=estimates.astype(reps.dtype), quality=calibrated,
                           nodes=new_nodes)


def reconstruct_tree(data: Dataset, params: ModelParams, r: Optional[int] = None) -> ReconstructionResult:
    """
    Reconstruct the tree and label every leaf

    Args:
        data: Dataset (inference reads representations and labels only)
        params: Model parameters; FIM needs the known rewiring
        r: Levels joined per iteration (FIM always uses 1)

    Returns:
        ReconstructionResult

    Raises:
        ReconstructionError: some stage failed; `reason` names stage and level and
            `diagnostics` holds the margins and quality trace gathered so far
    """
    settings = get_settings()
    r = settings.default_r if r is None else int(r)
    if r < 1:
        raise InvalidParamsError(f"Window r must be >= 1, got {r}")
    if params.variant == Model.FIM and r != 1:
        logger.info(f"FIM reconstruction joins one level at a time (requested r={r})")
        r = 1

    refs, reps = data.all_reps()
    n = len(refs)
    k_ratio = params.k / math.log(n) if n > 1 else float("inf")
    diagnostics = Diagnostics(r=r, k_over_log_n=k_ratio, calibration_samples=settings.calibration_samples)
    try:
        _check_inputs(data, params)
        if k_ratio < settings.min_k_factor:
            logger.warning(f"k={params.k} is below {settings.min_k_factor} * log(n) for n={n}; "
                           f"reconstruction is likely to fail")
        root = _join_levels(data, params, r, reps, diagnostics)
    except ReconstructionError as e:
        diagnostics.failure_reason = e.reason
        e.diagnostics = diagnostics
        raise

    tree = InferredTree(root, tuple(refs), data.h)
    labeled_rows = list(range(len(data.labeled_nodes)))
    leaf_labels = propagate_labels(tree, labeled_rows, data.labels)
    logger.info(f"Reconstructed tree over {n} leaves ({params.variant.value}, r={r})")
    return ReconstructionResult(tree, leaf_labels, tuple(refs), diagnostics)


# ============================================================================
# LABELS
# ============================================================================

def is_well_represented(label: int, labeled_set, labels: LabelAssignment, tree: TreeTopology) -> bool:
    """
    True if the label's highest node has two edge-disjoint paths into S

    That holds when the node itself is in S, or when S-leaves sit below at
    least two different children of it.
    """
    top = labels.label_root(label)
    if top is None:
        return False
    if top in labeled_set:
        return True
    children = set()
    for node in labeled_set:
        if node.level > top.level and tree.ancestor(node, top.level) == top:
            children.add(tree.ancestor(node, top.level + 1))
            if len(children) >= 2:
                return True
    return False


def propagate_labels(tree: InferredTree, rows: Sequence[int], labels: Sequence[int]) -> np.ndarray:
    """
    Label every leaf of an inferred tree from its labeled rows

    For each label the MCA of its labeled rows receives it along with all
    leaves below. Overlaps go to the deepest such ancestor; equally deep
    competing labels leave the leaf UNLABELED.

    Returns:
        Label per dataset row
    """
    n = tree.num_leaves
    best_level = np.full(n, -1, dtype=np.int64)
    out = np.full(n, UNLABELED, dtype=np.int64)
    tied = np.zeros(n, dtype=bool)

    by_label: Dict[int, List[int]] = {}
    for row, label in zip(rows, labels):
        by_label.setdefault(int(label), []).append(int(row))

    for label in sorted(by_label):
        w = tree.mca(by_label[label])
        idx = np.asarray(w.leaves, dtype=np.int64)
        deeper = w.level > best_level[idx]
        same = (w.level == best_level[idx]) & (out[idx] != label)
        out[idx[deeper]] = label
        tied[idx[deeper]] = False
        best_level[idx[deeper]] = w.level
        tied[idx[same]] = True

    out[tied] = UNLABELED
    return out


class DeepLabeler:
    """
    Deep pipeline as a labeler: reconstruct, then propagate

    Failures are recorded in the result instead of raised, together with the
    margins and quality trace gathered before the failing stage.
    """

    def __init__(self, params: ModelParams, r: Optional[int] = None):
        self.params = params
        self.r = r
        self.logger = logger

    def run(self, data: Dataset) -> ReconstructionResult:
        try:
            return reconstruct_tree(data, self.params, self.r)
        except ReconstructionError as e:
            self.logger.warning(f"Deep reconstruction failed: {e.reason}")
            refs, _ = data.all_reps()
            diagnostics = e.diagnostics
            if diagnostics is None:
                diagnostics = Diagnostics(r=self.r or get_settings().default_r, failure_reason=e.reason)
            return ReconstructionResult(None, np.full(len(refs), UNLABELED, dtype=np.int64),
                                        tuple(refs), diagnostics)
