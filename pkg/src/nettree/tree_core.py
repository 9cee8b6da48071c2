"""Semi-compressed local net-tree representation.

A node is identified by ``(point, level)``.  Levels are Python ints, with the
two sentinels :data:`NEG_INF` (leaves) and :data:`POS_INF` (the root).  The
mutable state lives in an engine object (pure Python or compiled, see
``_backend``); :class:`NetTree` wraps it with key-based accessors, JSON
snapshots and the structural edit primitives.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _backend
from ._engine import NEG_INF, POS_INF
from .errors import InputError, ParameterError, StateError, StructureError
from .metric import MetricSpace

__all__ = [
    "NEG_INF",
    "POS_INF",
    "Params",
    "NodeKey",
    "NodeRecord",
    "TouchCounters",
    "NetTree",
    "TreeArrays",
    "new_tree",
    "radius",
    "split_jump",
    "try_remove_node",
    "to_compressed",
    "uncompressed_size",
    "level_str",
]

SNAPSHOT_FORMAT = "nettree-snapshot/1"


def level_str(level: int) -> str:
    if level == NEG_INF:
        return "-inf"
    if level == POS_INF:
        return "+inf"
    return str(level)


def _level_to_json(level: int):
    if level == NEG_INF:
        return "-inf"
    if level == POS_INF:
        return "+inf"
    return int(level)


def _level_from_json(v) -> int:
    if v == "-inf":
        return NEG_INF
    if v == "+inf":
        return POS_INF
    if isinstance(v, bool) or not isinstance(v, int):
        raise InputError(f"bad level {v!r}")
    if not NEG_INF < v < POS_INF:
        raise InputError(f"level {v} out of range")
    return v


@dataclass(frozen=True)
class Params:
    """Scale factor and packing/covering/relative constants.

    ``Params.for_construction`` derives ``cr`` and enforces the constraints
    needed by the incremental build.  ``Params.for_validation`` only asks for
    ``tau > 1`` and positive constants, for auditing external trees.
    """

    tau: float
    cp: float
    cc: float
    cr: float
    validation_only: bool = False

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ParameterError("; ".join(problems))

    def violations(self) -> list[str]:
        tau, cp, cc, cr = self.tau, self.cp, self.cc, self.cr
        out = []
        if not all(math.isfinite(v) for v in (tau, cp, cc, cr)):
            return ["parameters must be finite"]
        if not tau > 1:
            out.append(f"tau must exceed 1 (got {tau})")
        if not cp > 0:
            out.append(f"cp must be positive (got {cp})")
        if not cr > 0:
            out.append(f"cr must be positive (got {cr})")
        if self.validation_only or out:
            return out
        if not cc >= cp:
            out.append(f"cc must be at least cp (cc={cc}, cp={cp})")
        if not tau >= 5:
            out.append(f"tau must be at least 5 (got {tau})")
        if not tau >= 2 * cc / cp + 2:
            out.append(f"tau must be at least 2*cc/cp + 2 = {2 * cc / cp + 2:g} (got {tau})")
        if not cc < cp * (tau - 1) / 2:
            out.append(f"cc must be below cp*(tau-1)/2 = {cp * (tau - 1) / 2:g} (got {cc})")
        if tau > 4 and not cr >= 2 * cc * tau / (tau - 4):
            out.append(f"cr must be at least 2*cc*tau/(tau-4) = {2 * cc * tau / (tau - 4):g} (got {cr})")
        return out

    @classmethod
    def for_construction(cls, tau: float = 6.0, cp: float = 1.0, cc: float = 1.0) -> "Params":
        tau, cp, cc = float(tau), float(cp), float(cc)
        if tau > 4:
            cr = 2 * cc * tau / (tau - 4)
        else:
            cr = math.inf  # rejected below with the tau constraint
            problems = Params(tau, cp, cc, 1.0, validation_only=True).violations()
            problems.append(f"tau must be at least 5 (got {tau})")
            raise ParameterError("; ".join(problems))
        return cls(tau, cp, cc, cr)

    @classmethod
    def for_validation(cls, tau: float, cp: float, cc: float, cr: float) -> "Params":
        return cls(float(tau), float(cp), float(cc), float(cr), validation_only=True)

    def to_dict(self) -> dict:
        return {"tau": self.tau, "cp": self.cp, "cc": self.cc, "cr": self.cr}

    @property
    def ann_factor(self) -> float:
        """Approximation factor guaranteed for a center (requires cr > cc*tau/(tau-1))."""
        t, cc, cr = self.tau, self.cc, self.cr
        return cr * t * (t - 1) / (cr * (t - 1) - cc * t)

    @property
    def global_constants(self) -> tuple[float, float]:
        """(packing, covering) constants of the equivalent global net-tree."""
        t, cp, cc = self.tau, self.cp, self.cc
        return (cp * (t - 1) - 2 * cc) / (2 * (t - 1)), cc * t / (t - 1)


def radius(params: Params, level: int, constant: float) -> float:
    """``constant * tau**level`` with 0 at NEG_INF and +inf at POS_INF."""
    if level == NEG_INF:
        return 0.0
    if level == POS_INF:
        return math.inf
    return constant * params.tau ** level


class NodeKey(NamedTuple):
    point: int
    level: int

    def __str__(self):
        return f"{self.point}^{level_str(self.level)}"


@dataclass
class NodeRecord:
    key: NodeKey
    parent: NodeKey | None
    children: set = field(default_factory=set)
    relatives: set = field(default_factory=set)
    cell_in: set = field(default_factory=set)
    cell_out: set = field(default_factory=set)


@dataclass
class TouchCounters:
    basic: int = 0
    split: int = 0
    merge: int = 0
    distance_total: int = 0

    @property
    def total(self) -> int:
        return self.basic + self.split + self.merge

    def to_dict(self) -> dict:
        return {"basic": self.basic, "split": self.split, "merge": self.merge,
                "distance_total": self.distance_total}


@dataclass
class TreeArrays:
    """Flat read-only export of the live nodes, indexed ``0..m-1``."""

    point: np.ndarray
    level: np.ndarray
    parent: np.ndarray          # index into the arrays, -1 for the root
    children: list[list[int]]
    relatives: list[list[int]]
    root: int

    def __len__(self):
        return len(self.point)

    def key(self, i: int) -> NodeKey:
        return NodeKey(int(self.point[i]), int(self.level[i]))


class NetTree:
    """A semi-compressed local net-tree over a :class:`MetricSpace`."""

    def __init__(self, params: Params, space: MetricSpace, engine_cls=None):
        self.params = params
        self.space = space
        cls = engine_cls or _backend.Engine
        self._eng = cls(space.coords.tolist() if len(space) else [], params.tau,
                        params.cp, params.cc, params.cr)
        self.build_info: dict = {}
        # inconsistencies tolerated while loading a snapshot; reported by validation
        self.load_issues: list[str] = []

    # -- keys and lookups -------------------------------------------------

    @property
    def engine(self):
        return self._eng

    @property
    def backend(self) -> str:
        return "compiled" if self._eng.compiled else "python"

    def _nid(self, key) -> int:
        p, level = key
        if not 0 <= p < len(self.space):
            raise StructureError(f"no point {p}")
        nid = self._eng.find(p, level)
        if nid < 0:
            raise StructureError(f"no node {NodeKey(p, level)}")
        return nid

    def _key(self, nid: int) -> NodeKey:
        return NodeKey(*self._eng.key_of(nid))

    def __contains__(self, key) -> bool:
        p, level = key
        return 0 <= p < len(self.space) and self._eng.find(p, level) >= 0

    @property
    def root(self) -> NodeKey | None:
        r = self._eng.root
        return None if r < 0 else self._key(r)

    def node_keys(self) -> list[NodeKey]:
        pt, lv, _, alive, _, _ = self._eng.export()
        return sorted(NodeKey(p, l) for p, l, a in zip(pt, lv, alive) if a)

    def __len__(self) -> int:
        return sum(1 for a in self._eng.export()[3] if a)

    def record(self, key) -> NodeRecord:
        e = self._eng
        nid = self._nid(key)
        par = e.parent_of(nid)
        cin, cout = e.cell(nid)
        return NodeRecord(
            key=self._key(nid),
            parent=None if par < 0 else self._key(par),
            children={self._key(c) for c in e.children_of(nid)},
            relatives={self._key(r) for r in e.relatives_of(nid)},
            cell_in=set(cin),
            cell_out=set(cout),
        )

    @property
    def nodes(self) -> dict[NodeKey, NodeRecord]:
        """Materialised ``NodeKey -> NodeRecord`` view (a fresh copy each call)."""
        return {k: self.record(k) for k in self.node_keys()}

    def parent(self, key) -> NodeKey | None:
        par = self._eng.parent_of(self._nid(key))
        return None if par < 0 else self._key(par)

    def children(self, key) -> list[NodeKey]:
        return sorted(self._key(c) for c in self._eng.children_of(self._nid(key)))

    def relatives(self, key) -> list[NodeKey]:
        return sorted(self._key(r) for r in self._eng.relatives_of(self._nid(key)))

    def point_nodes(self, p: int) -> list[NodeKey]:
        """All nodes of point ``p``, highest level first."""
        return [self._key(x) for x in self._eng.chain_of(p)]

    def leaf_of(self, p: int) -> NodeKey | None:
        key = NodeKey(p, NEG_INF)
        return key if key in self else None

    def level_range(self, p: int) -> tuple[int, int] | None:
        """(lowest, highest) finite level among ``p``'s nodes."""
        return self._eng.real_levels(p)

    def top_level(self, p: int) -> int:
        return self._eng.top_level(p)

    def is_inserted(self, p: int) -> bool:
        return bool(self._eng.is_inserted(p))

    @property
    def inserted(self) -> list[int]:
        return [p for p, f in enumerate(self._eng.inserted_flags()) if f]

    @property
    def uninserted(self) -> list[int]:
        return [p for p, f in enumerate(self._eng.inserted_flags()) if not f]

    def center_of(self, p: int) -> NodeKey | None:
        c, _ = self._eng.center_of(p)
        return None if c < 0 else self._key(c)

    def ring_of(self, p: int) -> str | None:
        c, ring = self._eng.center_of(p)
        if c < 0:
            return None
        return "outer" if ring else "inner"

    @property
    def counters(self) -> TouchCounters:
        s = self._eng.stats()
        return TouchCounters(s["basic"], s["split"], s["merge"], s["distance_total"])

    def stats(self) -> dict:
        return self._eng.stats()

    # -- export ------------------------------------------------------------

    def arrays(self) -> TreeArrays:
        pt, lv, par, alive, ch, rel = self._eng.export()
        live = [i for i, a in enumerate(alive) if a]
        index = {nid: i for i, nid in enumerate(live)}
        return TreeArrays(
            point=np.array([pt[i] for i in live], dtype=np.int64),
            level=np.array([lv[i] for i in live], dtype=np.int64),
            parent=np.array([index.get(par[i], -1) for i in live], dtype=np.int64),
            children=[[index[c] for c in ch[i]] for i in live],
            relatives=[[index[r] for r in rel[i]] for i in live],
            root=index.get(self._eng.root, -1),
        )

    def to_json(self) -> str:
        pt, lv, par, alive, ch, rel = self._eng.export()

        def ref(i):
            return [pt[i], _level_to_json(lv[i])]

        def refs(ids):
            return [ref(i) for i in sorted(ids, key=lambda i: (pt[i], lv[i]))]

        live = sorted((i for i, a in enumerate(alive) if a), key=lambda i: (pt[i], lv[i]))
        recs = [{
            "point": pt[i],
            "level": _level_to_json(lv[i]),
            "parent": None if par[i] < 0 else ref(par[i]),
            "children": refs(ch[i]),
            "relatives": refs(rel[i]),
        } for i in live]
        doc = {
            "format": SNAPSHOT_FORMAT,
            "params": self.params.to_dict(),
            "validation_only": self.params.validation_only,
            "n": len(self.space),
            "dim": self.space.dim,
            "points": [list(p.coords) for p in self.space],
            "nodes": recs,
        }
        return json.dumps(doc, indent=1) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_json(cls, text: str, engine_cls=None, params: Params | None = None) -> "NetTree":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"snapshot is not valid JSON: {exc}") from None
        try:
            if params is None:
                pr = doc["params"]
                params = Params(float(pr["tau"]), float(pr["cp"]), float(pr["cc"]), float(pr["cr"]),
                                validation_only=bool(doc.get("validation_only", True)))
            dim = int(doc["dim"])
            points = doc["points"]
            if len(points) != int(doc["n"]):
                raise InputError("snapshot point count does not match n")
            space = MetricSpace(points, dim)
            tree = cls(params, space, engine_cls)
            e = tree._eng
            recs = doc["nodes"]
            keys = []
            for r in recs:
                p = int(r["point"])
                if not 0 <= p < len(space):
                    raise InputError(f"node refers to unknown point {p}")
                level = _level_from_json(r["level"])
                e.new_node(p, level)
                keys.append((p, level))

            def ref(v):
                p, level = int(v[0]), _level_from_json(v[1])
                if not 0 <= p < len(space):
                    raise InputError(f"reference to unknown point {p}")
                nid = e.find(p, level)
                if nid < 0:
                    raise InputError(f"reference to missing node {NodeKey(p, level)}")
                return nid

            roots = []
            for (p, level), r in zip(keys, recs):
                nid = e.find(p, level)
                if r["parent"] is None:
                    roots.append(nid)
                else:
                    e.set_parent(nid, ref(r["parent"]))
                for v in r["relatives"]:
                    e.add_relative(nid, ref(v))
            for (p, level), r in zip(keys, recs):
                nid = e.find(p, level)
                listed = sorted(ref(v) for v in r["children"])
                if listed != sorted(e.children_of(nid)):
                    tree.load_issues.append(
                        f"children listed for {NodeKey(p, level)} disagree with the children's parent fields")
            if len(roots) != 1 and recs:
                tree.load_issues.append(f"snapshot has {len(roots)} parentless nodes, expected 1")
            if roots:
                tops = [x for x in roots if e.key_of(x)[1] == POS_INF] or roots
                e.set_root(tops[0])
            for p in range(len(space)):
                if e.find(p, NEG_INF) >= 0:
                    e.mark_inserted(p)
        except StructureError as exc:
            raise InputError(f"bad snapshot: {exc}") from None
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"malformed snapshot: {exc!r}") from None
        return tree

    @classmethod
    def load(cls, path: str | Path, engine_cls=None) -> "NetTree":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc.strerror}") from exc
        return cls.from_json(text, engine_cls)


def new_tree(params: Params, space: MetricSpace, first_point, engine_cls=None) -> NetTree:
    """Root at +inf and a leaf for ``first_point``; every other point centred at the root."""
    if params.validation_only:
        raise ParameterError("validation-only parameters cannot be used to build a tree")
    if len(space) == 0:
        raise StateError("cannot start a tree on an empty space")
    p0 = getattr(first_point, "id", first_point)
    tree = NetTree(params, space, engine_cls)
    tree._eng.bootstrap(int(p0))
    return tree


def split_jump(tree: NetTree, point_id: int, at_level: int) -> NodeKey:
    """Create ``point_id``'s node at ``at_level`` inside the jump spanning it.

    While construction state is live the engine also runs the split
    point-location update for the new node.
    """
    nid = tree._eng.split_jump(int(point_id), int(at_level))
    return tree._key(nid)


def try_remove_node(tree: NetTree, key) -> bool:
    """Remove ``key`` iff it is an only child, has one child, and no relatives."""
    if key not in tree:
        raise StructureError(f"no node {NodeKey(*key)}")
    return bool(tree._eng.try_remove(tree._nid(key)))


def _removable_ignoring_relatives(a: TreeArrays) -> np.ndarray:
    nchild = np.array([len(c) for c in a.children], dtype=np.int64)
    par = a.parent
    has_par = par >= 0
    only_child = np.zeros(len(a), dtype=bool)
    only_child[has_par] = nchild[par[has_par]] == 1
    return has_par & only_child & (nchild == 1) & (a.level != NEG_INF)


def to_compressed(tree: NetTree) -> int:
    """Node count of the fully compressed tree (relatives ignored)."""
    a = tree.arrays()
    return int(len(a) - _removable_ignoring_relatives(a).sum())


def uncompressed_size(tree: NetTree) -> int:
    """Node count of the uncompressed tree with the same nets.

    Every point gets a node on every level from the lowest finite level in
    the tree up to its highest node; the root point's chain stops at the
    highest finite level.  Root and leaves are counted once each.
    """
    a = tree.arrays()
    finite = a.level[(a.level != NEG_INF) & (a.level != POS_INF)]
    n_leaves = int((a.level == NEG_INF).sum())
    if finite.size == 0:
        return len(a)
    lo, hi = int(finite.min()), int(finite.max())
    total = 1 + n_leaves
    for p in range(len(tree.space)):
        top = tree.top_level(p)
        if top == NEG_INF and tree.leaf_of(p) is None:
            continue
        top = hi if top == POS_INF else top
        if top != NEG_INF:
            total += top - lo + 1
    return total
