"""Per-entity aggregation of encoded paths: prefix frequency trees,
generic subpath selection by iterative leaf pruning, specific subpath
selection by tf-idf over subpaths, and aspect/rating reweighting.

Trees are stored columnar: sentences are sorted lexicographically by
path, so every prefix node covers a contiguous range of that order and
member sets are slices rather than per-node copies. This keeps build and
selection linear in the number of sentences for a fixed depth.
"""

from __future__ import annotations

import heapq
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Entity


class AggregateError(ValueError):
    """Raised for inconsistent paths, unknown entities, or bad selections."""


class PathTree:
    """Prefix tree over equal-depth code paths for one entity."""

    def __init__(self, entity_id: str, sentence_ids: list[str], paths: np.ndarray):
        paths = np.asarray(paths, dtype=np.int32)
        if paths.ndim != 2 or paths.shape[0] == 0 or paths.shape[1] == 0:
            raise AggregateError("need a non-empty (n, depth) path matrix")
        if paths.shape[0] != len(sentence_ids):
            raise AggregateError("one path per sentence id required")
        if paths.min() < 0:
            raise AggregateError("codes must be non-negative")
        self.entity_id = entity_id
        self.depth = paths.shape[1]
        self.n = paths.shape[0]

        order = np.lexsort(tuple(paths[:, d] for d in range(self.depth - 1, -1, -1)))
        self.sorted_paths = np.ascontiguousarray(paths[order])
        self.sorted_ids = [sentence_ids[i] for i in order]

        depths = [np.array([0])]
        codes = [np.array([-1])]
        parents = [np.array([-1])]
        starts = [np.array([0])]
        ends = [np.array([self.n])]
        self.level_offset = [0]  # node index where each depth's block begins
        prev_offset, prev_starts = 0, np.array([0])
        offset = 1
        for d in range(1, self.depth + 1):
            cols = self.sorted_paths[:, :d]
            changed = np.empty(self.n, dtype=bool)
            changed[0] = True
            if self.n > 1:
                changed[1:] = (cols[1:] != cols[:-1]).any(axis=1)
            node_starts = np.flatnonzero(changed)
            node_ends = np.append(node_starts[1:], self.n)
            parent_pos = np.searchsorted(prev_starts, node_starts, side="right") - 1
            depths.append(np.full(node_starts.size, d))
            codes.append(self.sorted_paths[node_starts, d - 1].astype(np.int64))
            parents.append(prev_offset + parent_pos)
            starts.append(node_starts)
            ends.append(node_ends)
            self.level_offset.append(offset)
            prev_offset, prev_starts = offset, node_starts
            offset += node_starts.size
        self.level_offset.append(offset)
        self.node_depth = np.concatenate(depths)
        self.node_code = np.concatenate(codes)
        self.node_parent = np.concatenate(parents)
        self.node_start = np.concatenate(starts)
        self.node_end = np.concatenate(ends)

    @property
    def n_nodes(self) -> int:
        return self.node_depth.size

    def count(self, node: int) -> int:
        return int(self.node_end[node] - self.node_start[node])

    def prob(self, node: int) -> float:
        return self.count(node) / self.n

    def path_of(self, node: int) -> tuple[int, ...]:
        d = int(self.node_depth[node])
        return tuple(int(c) for c in self.sorted_paths[self.node_start[node], :d])

    def members(self, node: int) -> tuple[str, ...]:
        return tuple(self.sorted_ids[int(self.node_start[node]):int(self.node_end[node])])

    def children(self, node: int) -> list[int]:
        d = int(self.node_depth[node])
        if d >= self.depth:
            return []
        lo_off, hi_off = self.level_offset[d + 1], self.level_offset[d + 2]
        child_starts = self.node_start[lo_off:hi_off]
        lo = lo_off + np.searchsorted(child_starts, self.node_start[node], side="left")
        hi = lo_off + np.searchsorted(child_starts, self.node_end[node], side="left")
        return list(range(int(lo), int(hi)))

    def node_for(self, subpath) -> int | None:
        codes = tuple(int(c) for c in subpath)
        if not 1 <= len(codes) <= self.depth:
            return None
        lo, hi = 0, self.n
        for d, code in enumerate(codes):
            col = self.sorted_paths[lo:hi, d]
            lo, hi = (lo + np.searchsorted(col, code, side="left"),
                      lo + np.searchsorted(col, code, side="right"))
            if lo >= hi:
                return None
        off = self.level_offset[len(codes)]
        block = self.node_start[off:self.level_offset[len(codes) + 1]]
        pos = int(np.searchsorted(block, lo))
        return off + pos

    def node_keys(self) -> list[bytes]:
        """One fixed-width byte key per non-root node (depth-padded path)."""
        keys: list[bytes] = []
        for d in range(1, self.depth + 1):
            off, nxt = self.level_offset[d], self.level_offset[d + 1]
            block_starts = self.node_start[off:nxt]
            padded = np.full((block_starts.size, self.depth), -1, dtype=np.int32)
            padded[:, :d] = self.sorted_paths[np.asarray(block_starts), :d]
            keys.extend(row.tobytes() for row in padded)
        return keys

    def to_nested(self) -> dict:
        def walk(node: int) -> dict:
            code = int(self.node_code[node])
            return {
                "code": None if code < 0 else code,
                "count": self.count(node),
                "prob": self.prob(node),
                "children": [walk(c) for c in self.children(node)],
            }

        return walk(0)


def build_tree(entity: Entity, paths: dict[str, tuple[int, ...]]) -> PathTree:
    """Build the prefix frequency tree for an entity from its sentences'
    encoded paths. Every entity sentence must have a path; all paths must
    share one depth."""
    ids = [s.id for s in entity.sentences()]
    if not ids:
        raise AggregateError(f"entity {entity.entity_id!r} has no sentences")
    rows = []
    depth = None
    for sid in ids:
        if sid not in paths:
            raise AggregateError(f"no path for sentence {sid!r}")
        codes = tuple(int(c) for c in paths[sid])
        if depth is None:
            depth = len(codes)
        elif len(codes) != depth:
            raise AggregateError(f"path depth mismatch at sentence {sid!r}")
        rows.append(codes)
    return PathTree(entity.entity_id, ids, np.asarray(rows, dtype=np.int32))


@dataclass(frozen=True)
class ScoredSubpath:
    path: tuple[int, ...]
    score: float
    kind: str  # "generic" | "specific"
    evidence: tuple[str, ...]
    tf: float | None = None
    idf: float | None = None


def prune_generic(tree: PathTree, threshold: float) -> tuple[list[int], list[tuple[int, ...]]]:
    """Iteratively remove the lowest-probability leaf (ties: deepest, then
    lexicographically smallest path) until every remaining leaf's
    probability exceeds the threshold. A node whose children are all
    removed becomes a leaf at its marginal probability.

    Returns (surviving leaf node indices, removal order as paths).
    """
    if not 0.0 <= threshold < 1.0:
        raise AggregateError("threshold must be in [0, 1)")
    n_nodes = tree.n_nodes
    n_children = np.zeros(n_nodes, dtype=np.int64)
    np.add.at(n_children, tree.node_parent[1:], 1)
    removed = np.zeros(n_nodes, dtype=bool)
    is_leaf = n_children == 0

    # Within one depth block node index order is path-lexicographic, and
    # entries with equal count compare depth first, so plain int keys give
    # the full tie rule.
    heap = [(tree.count(i), -int(tree.node_depth[i]), i)
            for i in np.flatnonzero(is_leaf)]
    heapq.heapify(heap)
    removal_order: list[tuple[int, ...]] = []
    while heap:
        count, _, node = heap[0]
        if count / tree.n > threshold:
            break
        heapq.heappop(heap)
        removed[node] = True
        removal_order.append(tree.path_of(node))
        parent = int(tree.node_parent[node])
        if parent >= 0:
            n_children[parent] -= 1
            if n_children[parent] == 0:
                is_leaf[parent] = True
                heapq.heappush(heap, (tree.count(parent),
                                      -int(tree.node_depth[parent]), parent))
    leaves = [int(i) for i in np.flatnonzero(is_leaf & ~removed)]
    return leaves, removal_order


def select_generic(tree: PathTree, k: int, threshold: float = 0.01) -> list[ScoredSubpath]:
    """Top-k surviving leaves of the pruned tree, by probability
    (ties: lexicographically smaller path first)."""
    if k < 1:
        raise AggregateError("k must be >= 1")
    leaves, _ = prune_generic(tree, threshold)
    ranked = sorted(leaves, key=lambda i: (-tree.count(i), tree.path_of(i)))
    return [
        ScoredSubpath(path=tree.path_of(i), score=tree.prob(i), kind="generic",
                      evidence=tree.members(i), tf=float(tree.count(i)))
        for i in ranked[:k]
    ]


@dataclass
class ControlModel:
    """Smoothed label distribution conditioned on each full-depth path."""

    kind: str  # "aspect" | "rating"
    labels: tuple
    conditional: dict[tuple[int, ...], np.ndarray]
    smoothing: float

    def label_position(self, target) -> int:
        try:
            return self.labels.index(target)
        except ValueError:
            raise AggregateError(
                f"unknown {self.kind} target {target!r}; known: {list(self.labels)}"
            ) from None

    def distribution(self, path: tuple[int, ...]) -> np.ndarray:
        dist = self.conditional.get(tuple(int(c) for c in path))
        if dist is None:
            return np.full(len(self.labels), 1.0 / len(self.labels))
        return dist


def fit_control(corpus: Corpus, paths: dict[str, tuple[int, ...]], kind: str,
                smoothing: float = 1.0) -> ControlModel:
    """Laplace-smoothed empirical label distribution per full-depth path.

    kind="aspect" uses sentence aspect labels (label_aspects must have run);
    kind="rating" uses review ratings. Paths with no labeled member get the
    smoothed uniform."""
    if kind not in ("aspect", "rating"):
        raise AggregateError(f"unknown control kind {kind!r}")
    per_path: dict[tuple[int, ...], Counter] = {}
    observed: set = set()
    depth = None
    for sent in corpus.sentences():
        if sent.id not in paths:
            raise AggregateError(f"no path for sentence {sent.id!r}")
        path = tuple(int(c) for c in paths[sent.id])
        if depth is None:
            depth = len(path)
        elif len(path) != depth:
            raise AggregateError(f"path depth mismatch at sentence {sent.id!r}")
        labels = sorted(sent.aspects) if kind == "aspect" else (
            [sent.rating] if sent.rating is not None else [])
        counts = per_path.setdefault(path, Counter())
        for label in labels:
            counts[label] += 1
            observed.add(label)
    if not observed:
        raise AggregateError(f"no {kind}-labeled sentences in corpus")
    labels = tuple(sorted(observed))
    a = len(labels)
    conditional = {}
    for path, counts in per_path.items():
        total = sum(counts.values())
        conditional[path] = np.array(
            [(counts.get(label, 0) + smoothing) / (total + smoothing * a)
             for label in labels])
    return ControlModel(kind=kind, labels=labels, conditional=conditional,
                        smoothing=smoothing)


def _as_tree_map(trees) -> dict[str, PathTree]:
    if isinstance(trees, dict):
        return trees
    return {t.entity_id: t for t in trees}


def select_specific(trees, entity_id: str, k: int,
                    control: tuple[ControlModel, object] | None = None) -> list[ScoredSubpath]:
    """Top-k subpaths of the target entity by tf * log(idf), where tf is
    the within-entity count and idf = n_entities / n_entities_containing.
    Ties rank deeper paths first, then lexicographically smaller. With
    control=(model, target), scores are multiplied by the mean target
    likelihood over each subpath's member sentences' full paths."""
    if k < 1:
        raise AggregateError("k must be >= 1")
    tree_map = _as_tree_map(trees)
    if entity_id not in tree_map:
        raise AggregateError(f"unknown entity {entity_id!r}")
    depths = {t.depth for t in tree_map.values()}
    if len(depths) > 1:
        raise AggregateError(f"trees disagree on path depth: {sorted(depths)}")
    n_entities = len(tree_map)
    df: Counter = Counter()
    for tree in tree_map.values():
        df.update(tree.node_keys())

    target_tree = tree_map[entity_id]
    keys = target_tree.node_keys()
    m = len(keys)
    counts = (target_tree.node_end[1:] - target_tree.node_start[1:]).astype(np.float64)
    df_arr = np.array([df[key] for key in keys], dtype=np.float64)
    idf = n_entities / df_arr
    scores = counts * np.log(idf)

    if control is not None:
        model, target = control
        pos = model.label_position(target)
        per_sentence = np.array([
            model.distribution(tuple(int(c) for c in row))[pos]
            for row in target_tree.sorted_paths])
        prefix = np.concatenate([[0.0], np.cumsum(per_sentence)])
        starts = target_tree.node_start[1:]
        ends = target_tree.node_end[1:]
        factors = (prefix[ends] - prefix[starts]) / (ends - starts)
        scores = scores * factors

    depth_arr = target_tree.node_depth[1:].astype(np.int64)
    padded = np.full((m, target_tree.depth), -1, dtype=np.int64)
    row = 0
    for d in range(1, target_tree.depth + 1):
        off, nxt = target_tree.level_offset[d], target_tree.level_offset[d + 1]
        block = target_tree.node_start[off:nxt]
        padded[row:row + block.size, :d] = target_tree.sorted_paths[np.asarray(block), :d]
        row += block.size
    sort_keys = tuple(padded[:, d] for d in range(target_tree.depth - 1, -1, -1))
    order = np.lexsort(sort_keys + (-depth_arr, -scores))

    selected = []
    for i in order[:k]:
        node = 1 + int(i)
        selected.append(ScoredSubpath(
            path=target_tree.path_of(node), score=float(scores[i]),
            kind="specific", evidence=target_tree.members(node),
            tf=float(counts[i]), idf=float(idf[i])))
    return selected
