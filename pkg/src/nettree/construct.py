"""Randomized incremental construction.

Points are inserted in a seeded random order.  Each insertion places the new
point at the lowest level where it gains a relative, then promotes it upward
until its parent edge satisfies local covering.  Point location (the centers
of uninserted points) is maintained eagerly by the engine throughout.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

from .errors import InputError, ParameterError, StateError
from .metric import MetricSpace
from .tree_core import NodeKey, NetTree, Params, new_tree

__all__ = [
    "SHUFFLE_ALGORITHM",
    "InsertOutcome",
    "insertion_level",
    "insert_point",
    "propagate",
    "permutation",
    "build",
]

SHUFFLE_ALGORITHM = "fisher-yates/splitmix64"

_MASK = (1 << 64) - 1


def _splitmix64(seed: int):
    state = seed & _MASK
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        yield z ^ (z >> 31)


def permutation(n: int, seed: int) -> list[int]:
    """Portable seeded permutation of ``range(n)``.

    Fisher-Yates from the top index down; index ``i`` swaps with ``j`` drawn
    uniformly from ``[0, i]`` by rejection sampling on splitmix64 outputs.
    """
    perm = list(range(n))
    rng = _splitmix64(seed)
    for i in range(n - 1, 0, -1):
        bound = i + 1
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            r = next(rng)
            if r < limit:
                break
        j = r % bound
        perm[i], perm[j] = perm[j], perm[i]
    return perm


@dataclass(frozen=True)
class InsertOutcome:
    inserted_node: NodeKey
    promotions: int
    nodes_created: int
    nodes_removed: int


def insertion_level(d: float, params: Params) -> int:
    """Smallest integer ``h`` with ``d <= cr * tau**h`` (so ``cr*tau**(h-1) < d``)."""
    if not (isinstance(d, (int, float)) and d > 0 and math.isfinite(d)):
        raise InputError(f"insertion distance must be positive and finite, got {d!r}")
    cr, tau = params.cr, params.tau
    h = math.ceil(math.log(d / cr) / math.log(tau))
    while cr * tau ** (h - 1) >= d:
        h -= 1
    while d > cr * tau ** h:
        h += 1
    return h


def _point_id(p) -> int:
    return int(getattr(p, "id", p))


def insert_point(tree: NetTree, p) -> InsertOutcome:
    """Insert an uninserted point, including any promotions it triggers."""
    pid = _point_id(p)
    if not 0 <= pid < len(tree.space):
        raise StateError(f"unknown point {pid}")
    if tree.root is None:
        raise StateError("tree has no root; start it with new_tree")
    v, promos, created, removed = tree.engine.insert(pid)
    top = tree.engine.chain_of(pid)[0]
    return InsertOutcome(tree._key(top), promos, created, removed)


def propagate(tree: NetTree, violating) -> int:
    """Promote ``violating`` until its parent edge satisfies local covering."""
    return tree.engine.propagate(tree._nid(violating))


def build(
    space: MetricSpace,
    params: Params,
    seed: int = 42,
    *,
    engine_cls=None,
    after_insert: Callable[[NetTree, int], None] | None = None,
) -> NetTree:
    """Build a tree over ``space`` from a seeded random insertion order.

    ``after_insert(tree, point_id)`` runs after the bootstrap and after every
    insertion; the oracle checks hook in here.
    """
    if params.validation_only:
        raise ParameterError("validation-only parameters cannot be used to build a tree")
    t0 = time.perf_counter()
    n = len(space)
    if n == 0:
        tree = NetTree(params, space, engine_cls)
        order: list[int] = []
    else:
        order = permutation(n, seed)
        tree = new_tree(params, space, order[0], engine_cls)
        if after_insert is not None:
            after_insert(tree, order[0])
        eng = tree.engine
        if after_insert is None:
            for p in order[1:]:
                eng.insert(p)
        else:
            for p in order[1:]:
                eng.insert(p)
                after_insert(tree, p)
    tree.build_info = {
        "seed": seed,
        "shuffle_algorithm": SHUFFLE_ALGORITHM,
        "order": order,
        "build_wall_time_ms": (time.perf_counter() - t0) * 1000.0,
    }
    return tree
