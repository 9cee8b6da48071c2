"""Point location: centers of uninserted points and their cells.

The incremental maintenance itself runs inside the engine; this module
exposes the center function, the brute-force oracle used by tests, and thin
wrappers around the engine's cell-update hooks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StateError
from .metric import pairwise_distances
from .tree_core import NEG_INF, POS_INF, NetTree, NodeKey

__all__ = [
    "CellAssignment",
    "center_function",
    "brute_force_center",
    "brute_force_centers",
    "on_node_added_split",
    "on_node_added_child",
    "on_node_removed",
    "take_center",
]

_INF_PAIR = (math.inf, POS_INF)


@dataclass(frozen=True)
class CellAssignment:
    point_id: int
    center: NodeKey
    ring: str  # "inner" or "outer"


def center_function(tree: NetTree, x, node) -> tuple[float, int]:
    """``(d(x, p), level)`` if ``x`` lies within ``cr*tau**level`` of ``p``, else ``(inf, POS_INF)``.

    ``x`` may be a point id or a :class:`~nettree.metric.Point`.
    """
    p, level = node
    xi = getattr(x, "id", x)
    d = tree.space.distance(int(xi), int(p))
    if level == POS_INF:
        return (d, POS_INF)
    if level == NEG_INF:
        return (d, NEG_INF) if d == 0.0 else _INF_PAIR
    return (d, level) if d <= tree.params.cr * tree.params.tau ** level else _INF_PAIR


def _node_table(tree: NetTree):
    a = tree.arrays()
    return a, a.point, a.level


def brute_force_centers(tree: NetTree, xs=None) -> dict[int, tuple[NodeKey, str]]:
    """Oracle centers and rings for ``xs`` (all uninserted points by default).

    Scans every node; the minimiser of ``(distance, level, point id)`` wins.
    """
    if xs is None:
        xs = tree.uninserted
    xs = list(xs)
    if not xs:
        return {}
    a, pts, lvls = _node_table(tree)
    finite = (lvls != NEG_INF) & (lvls != POS_INF)
    tau, cp, cr = tree.params.tau, tree.params.cp, tree.params.cr
    # same expressions as the engine, element by element
    thr = np.array([cr * tau ** int(l) if f else (math.inf if l == POS_INF else 0.0)
                    for l, f in zip(lvls, finite)])
    coords = tree.space.coords
    P = coords[pts]
    out = {}
    for x in xs:
        d = pairwise_distances(P, coords[x][None, :])
        ok = d <= thr
        ok &= lvls != NEG_INF  # leaves are inserted points, never within 0 of an uninserted one
        idx = np.nonzero(ok)[0]
        order = np.lexsort((pts[idx], lvls[idx], d[idx]))
        best = idx[order[0]]
        level = int(lvls[best])
        dd = float(d[best])
        if level == POS_INF:
            ring = "outer"
        else:
            ring = "inner" if dd <= cp * tau ** (level - 1) / 2.0 else "outer"
        out[int(x)] = (NodeKey(int(pts[best]), level), ring)
    return out


def brute_force_center(tree: NetTree, x) -> NodeKey:
    xi = int(getattr(x, "id", x))
    if tree.is_inserted(xi):
        raise StateError(f"point {xi} is already inserted")
    return brute_force_centers(tree, [xi])[xi][0]


def on_node_added_split(tree: NetTree, new_node, jump_top) -> None:
    tree.engine.on_split(tree._nid(new_node), tree._nid(jump_top))


def on_node_added_child(tree: NetTree, new_node, parent) -> None:
    tree.engine.on_child_added(tree._nid(new_node), tree._nid(parent))


def on_node_removed(tree: NetTree, dying, parent) -> None:
    tree.engine.on_removed(tree._nid(dying), tree._nid(parent))


def take_center(tree: NetTree, p) -> NodeKey:
    """Pop ``p`` out of its cell and return its center."""
    pid = int(getattr(p, "id", p))
    if not 0 <= pid < len(tree.space):
        raise StateError(f"unknown point {pid}")
    return tree._key(tree.engine.take_center(pid))
