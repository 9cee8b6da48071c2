"""Read-only queries over a finished tree."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, StateError
from .metric import _euclid, pairwise_distances
from .tree_core import NEG_INF, POS_INF, NetTree, NodeKey

__all__ = ["AnnResult", "ann", "ann_many", "center_scan", "net_at_level"]


@dataclass(frozen=True)
class AnnResult:
    point: int
    distance: float
    bound_factor: float
    center: NodeKey


class _Index:
    """Flattened node arrays plus subtree radii, built once per tree state."""

    def __init__(self, tree: NetTree):
        a = tree.arrays()
        prm = tree.params
        self.stamp = _stamp(tree)
        self.a = a
        self.coords = [p.coords for p in tree.space]
        self.dim = tree.space.dim
        self.cr = prm.cr
        self.tau = prm.tau
        span = prm.cc * prm.tau / (prm.tau - 1) * (1 + 1e-9)
        lv = a.level.tolist()
        self.levels = lv
        self.points = a.point.tolist()
        self.children = a.children
        # eligibility radius and subtree radius per node
        self.reach = [math.inf if l == POS_INF else (0.0 if l == NEG_INF else prm.cr * prm.tau ** l)
                      for l in lv]
        self.span = [math.inf if l == POS_INF else (0.0 if l == NEG_INF else span * prm.tau ** l)
                     for l in lv]


def _stamp(tree: NetTree):
    s = tree.engine.stats()
    return (s["nodes_created"], s["nodes_removed"], s["rel_writes"])


def _index(tree: NetTree) -> _Index:
    idx = getattr(tree, "_query_index", None)
    if idx is None or idx.stamp != _stamp(tree):
        idx = _Index(tree)
        tree._query_index = idx
    return idx


def _coords_of(tree: NetTree, q) -> tuple[float, ...]:
    c = getattr(q, "coords", q)
    c = tuple(float(v) for v in c)
    if len(c) != tree.space.dim:
        raise InputError(f"query has {len(c)} coordinates, expected {tree.space.dim}")
    return c


def ann(tree: NetTree, q) -> AnnResult:
    """Center of ``q`` in the tree; its point is an approximate nearest neighbour.

    Searches for the exact minimiser of ``(d(q, p), level, p)`` over nodes
    whose ball ``d(q, p) <= cr * tau**level`` contains ``q``.  Subtrees are
    visited best-first and pruned with the covering radius of their root.
    """
    if tree.root is None:
        raise StateError("tree is empty")
    ix = _index(tree)
    qc = _coords_of(tree, q)
    coords, pts, lv = ix.coords, ix.points, ix.levels
    reach, span, children = ix.reach, ix.span, ix.children

    best = (math.inf, POS_INF, -1)
    best_node = -1
    dcache: dict[int, float] = {}

    def dist(p):
        d = dcache.get(p)
        if d is None:
            d = dcache[p] = _euclid(coords[p], qc)
        return d

    root = ix.a.root
    heap = [(0.0, root)]
    while heap:
        lb, x = heapq.heappop(heap)
        if lb > best[0]:
            break
        p = pts[x]
        d = dist(p)
        if d <= reach[x]:
            cand = (d, lv[x], p)
            if cand < best:
                best, best_node = cand, x
        for c in children[x]:
            pc = pts[c]
            if pc == p:
                # same point one step down: its distance is known
                clb = max(0.0, d - span[c])
            else:
                clb = max(0.0, dist(pc) - span[c])
            if clb <= best[0]:
                heapq.heappush(heap, (clb, c))
    d, level, p = best
    return AnnResult(p, d, tree.params.ann_factor, NodeKey(p, level))


def ann_many(tree: NetTree, queries) -> list[AnnResult]:
    return [ann(tree, q) for q in queries]


def center_scan(tree: NetTree, q) -> NodeKey:
    """Full-scan minimiser of the center function, for testing :func:`ann`."""
    if tree.root is None:
        raise StateError("tree is empty")
    ix = _index(tree)
    qc = np.asarray(_coords_of(tree, q))
    a = ix.a
    d = pairwise_distances(tree.space.coords[a.point], qc[None, :])
    ok = d <= np.asarray(ix.reach)
    idx = np.nonzero(ok)[0]
    order = np.lexsort((a.point[idx], a.level[idx], d[idx]))
    k = idx[order[0]]
    return NodeKey(int(a.point[k]), int(a.level[k]))


def net_at_level(tree: NetTree, level: int) -> set[int]:
    """Points owning a node at some level ``>= level``."""
    a = tree.arrays()
    return {int(p) for p in np.unique(a.point[a.level >= level])}
