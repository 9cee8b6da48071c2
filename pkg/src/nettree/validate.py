"""Invariant checkers and brute-force oracles.

Every checker is a pure function of the tree (or snapshot) it receives and
returns a :class:`ValidationReport`.  Threshold values ``c * tau**level`` are
evaluated with Python floats exactly as construction does, so boundary cases
are judged identically.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .metric import MetricSpace, _euclid, pairwise_distances
from .tree_core import NEG_INF, POS_INF, NetTree, NodeKey, TreeArrays, level_str, to_compressed

__all__ = [
    "Check",
    "ValidationReport",
    "GLOBAL_CAP",
    "check_local",
    "check_global",
    "check_nets",
    "check_centers",
    "brute_force_nn",
    "size_stats",
    "validate_all",
]

GLOBAL_CAP = 2000
MAX_LISTED = 50


@dataclass
class Check:
    name: str
    passed: bool = True
    violations: list[str] = field(default_factory=list)
    counts: dict = field(default_factory=dict)
    _n_violations: int = 0

    def fail(self, msg: str) -> None:
        self.passed = False
        self._n_violations += 1
        if len(self.violations) < MAX_LISTED:
            self.violations.append(msg)

    def to_dict(self) -> dict:
        counts = dict(self.counts)
        counts["violations"] = self._n_violations
        return {"name": self.name, "passed": self.passed,
                "violations": list(self.violations), "counts": counts}


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self) -> list[str]:
        return [c.name for c in self.checks]

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def extend(self, other: "ValidationReport") -> "ValidationReport":
        self.checks.extend(other.checks)
        return self

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


# -- shared helpers ---------------------------------------------------------


def _k(a: TreeArrays, i: int) -> str:
    return f"{int(a.point[i])}^{level_str(int(a.level[i]))}"


def _is_finite(level: int) -> bool:
    return level != NEG_INF and level != POS_INF


class _Thresholds:
    """Memoised ``c * tau**level`` with the sentinel convention."""

    def __init__(self, tau: float, c: float):
        self.tau, self.c = tau, c
        self._memo: dict[int, float] = {}

    def __call__(self, level: int) -> float:
        v = self._memo.get(level)
        if v is None:
            if level == NEG_INF:
                v = 0.0
            elif level == POS_INF:
                v = math.inf
            else:
                v = self.c * self.tau ** level
            self._memo[level] = v
        return v


def _top_levels(a: TreeArrays, n: int) -> np.ndarray:
    """Highest level of any node per point (NEG_INF when the point has none)."""
    top = np.full(n, NEG_INF, dtype=np.int64)
    np.maximum.at(top, a.point, a.level)
    return top


def _inserted_mask(a: TreeArrays, n: int) -> np.ndarray:
    m = np.zeros(n, dtype=bool)
    m[a.point[a.level == NEG_INF]] = True
    return m


def _materialized_levels(a: TreeArrays) -> list[int]:
    lv = a.level
    return sorted({int(x) for x in lv[(lv != NEG_INF) & (lv != POS_INF)]})


def _net(top: np.ndarray, level: int) -> np.ndarray:
    return np.nonzero(top >= level)[0]


def _close_pairs(coords: np.ndarray, ids: np.ndarray, r: float) -> list[tuple[int, int]]:
    """Pairs among ``ids`` at distance <= r, judged with the package's distance."""
    if len(ids) < 2:
        return []
    sub = coords[ids]
    kd = cKDTree(sub)
    cand = kd.query_pairs(r * (1 + 1e-9) + 1e-300, output_type="ndarray")
    if len(cand) == 0:
        return []
    d = pairwise_distances(sub[cand[:, 0]], sub[cand[:, 1]])
    keep = cand[d <= r]
    return [(int(ids[i]), int(ids[j])) for i, j in keep]


def _csr(lists: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    lens = np.fromiter((len(x) for x in lists), dtype=np.int64, count=len(lists))
    ptr = np.zeros(len(lists) + 1, dtype=np.int64)
    np.cumsum(lens, out=ptr[1:])
    idx = np.fromiter(itertools.chain.from_iterable(lists), dtype=np.int64, count=int(ptr[-1]))
    return ptr, idx


def _contains(sorted_codes: np.ndarray, q: np.ndarray) -> np.ndarray:
    if len(sorted_codes) == 0:
        return np.zeros(len(q), dtype=bool)
    pos = np.searchsorted(sorted_codes, q)
    pos = np.minimum(pos, len(sorted_codes) - 1)
    return sorted_codes[pos] == q


def _level_values(levels: np.ndarray, fn) -> np.ndarray:
    """Apply a per-level threshold function elementwise (Python floats, exact)."""
    if len(levels) == 0:
        return np.zeros(0)
    uniq, inv = np.unique(levels, return_inverse=True)
    vals = np.array([fn(int(u)) for u in uniq], dtype=np.float64)
    return vals[inv]


# -- local invariants -------------------------------------------------------


def check_local(tree: NetTree, oracle: bool = False) -> ValidationReport:
    """Structural and local net-tree invariants.

    With ``oracle=True`` also checks the full-net local parent property and
    relative completeness (quadratic; meant for small trees).
    """
    a = tree.arrays()
    n = len(tree.space)
    coords = tree.space.coords
    pts_tuple = [p.coords for p in tree.space]
    prm = tree.params
    rad_r = _Thresholds(prm.tau, prm.cr)
    rad_c = _Thresholds(prm.tau, prm.cc)
    rad_p = _Thresholds(prm.tau, prm.cp)
    m = len(a)
    pt, lv, par = a.point, a.level, a.parent

    rep = ValidationReport()
    cptr, cidx = _csr(a.children)
    cdeg = np.diff(cptr)
    csrc = np.repeat(np.arange(m, dtype=np.int64), cdeg)

    # structure
    st = Check("structure", counts={"nodes": m})
    for msg in getattr(tree, "load_issues", ()):
        st.fail(msg)
    roots = np.nonzero(par < 0)[0]
    if m and len(roots) != 1:
        st.fail(f"expected one parentless node, found {len(roots)}")
    if m and a.root >= 0 and lv[a.root] != POS_INF:
        st.fail(f"root {_k(a, a.root)} is not at level +inf")
    for i in np.nonzero(lv == POS_INF)[0]:
        if i != a.root:
            st.fail(f"non-root node {_k(a, int(i))} at level +inf")
    kids = np.nonzero(par >= 0)[0]
    for i in kids[~(lv[par[kids]] > lv[kids])]:
        st.fail(f"parent {_k(a, int(par[i]))} of {_k(a, int(i))} is not above it")
    for k in np.nonzero(par[cidx] != csrc)[0]:
        st.fail(f"child {_k(a, int(cidx[k]))} of {_k(a, int(csrc[k]))} has another parent")
    listed = np.bincount(cidx, minlength=m) if m else np.zeros(0, dtype=np.int64)
    for i in kids[listed[kids] == 0]:
        st.fail(f"{_k(a, int(i))} missing from its parent's children")
    for i in np.nonzero(listed > 1)[0]:
        st.fail(f"{_k(a, int(i))} is listed as a child {int(listed[i])} times")
    for i in np.nonzero((lv == NEG_INF) & (cdeg > 0))[0]:
        st.fail(f"leaf {_k(a, int(i))} has children")
    # reachability
    if m and a.root >= 0:
        seen = np.zeros(m, dtype=bool)
        stack = [a.root]
        while stack:
            x = stack.pop()
            if seen[x]:
                st.fail(f"cycle through {_k(a, x)}")
                break
            seen[x] = True
            stack.extend(a.children[x])
        for i in np.nonzero(~seen)[0][:MAX_LISTED]:
            st.fail(f"node {_k(a, int(i))} unreachable from the root")
    leaves_per_point = np.bincount(pt[lv == NEG_INF], minlength=n)
    for p in np.nonzero(leaves_per_point > 1)[0]:
        st.fail(f"point {p} has {leaves_per_point[p]} leaves")
    has_nodes = np.zeros(n, dtype=bool)
    has_nodes[pt] = True
    for p in np.nonzero(has_nodes & (leaves_per_point == 0))[0]:
        st.fail(f"point {p} has nodes but no leaf")
    rep.checks.append(st)

    # nesting
    ne = Check("nesting")
    own = np.bincount(csrc[pt[cidx] == pt[csrc]], minlength=m) if m else np.zeros(0, dtype=np.int64)
    for i in np.nonzero((lv != NEG_INF) & (own == 0))[0]:
        ne.fail(f"{_k(a, int(i))} has no child of its own point")
    rep.checks.append(ne)

    # relatives, vectorised over the directed edge list
    sym = Check("relative_symmetry")
    rlev = Check("relative_level")
    rdist = Check("relative_distance")
    fun = Check("functoriality")
    rptr, ridx = _csr(a.relatives)
    src = np.repeat(np.arange(m, dtype=np.int64), np.diff(rptr))
    dst = ridx
    codes = src * m + dst
    code_sorted = np.sort(codes)
    for k in np.nonzero(src == dst)[0]:
        sym.fail(f"{_k(a, int(src[k]))} lists itself as a relative")
    dup = code_sorted[1:][code_sorted[1:] == code_sorted[:-1]]
    for c in np.unique(dup):
        sym.fail(f"{_k(a, int(c // m))} lists relative {_k(a, int(c % m))} twice")
    rev_sorted = np.sort(dst * m + src)
    if np.array_equal(rev_sorted, code_sorted):
        has_rev = np.ones(len(src), dtype=bool)
    else:
        has_rev = _contains(code_sorted, dst * m + src)
    for k in np.nonzero(~has_rev)[0]:
        sym.fail(f"{_k(a, int(src[k]))} -> {_k(a, int(dst[k]))} has no reverse link")
    und = src < dst
    ui, uj = src[und], dst[und]
    sym.counts["relative_edges"] = int(len(ui))
    same = lv[ui] == lv[uj]
    for k in np.nonzero(~same)[0]:
        rlev.fail(f"relatives {_k(a, int(ui[k]))} and {_k(a, int(uj[k]))} are on different levels")
    ui, uj = ui[same], uj[same]
    dd = pairwise_distances(coords[pt[ui]], coords[pt[uj]])
    thr = _level_values(lv[ui], rad_r)
    for k in np.nonzero(~(dd <= thr))[0]:
        rdist.fail(f"relatives {_k(a, int(ui[k]))} and {_k(a, int(uj[k]))} at distance {dd[k]!r} > {thr[k]!r}")
    pi, pj = par[ui], par[uj]
    ok = (pi >= 0) & (pj >= 0)
    ok[ok] &= (lv[pi[ok]] == lv[ui[ok]] + 1) & (lv[pj[ok]] == lv[ui[ok]] + 1)
    ok &= pi != pj
    linked = _contains(code_sorted, pi[ok] * m + pj[ok])
    for k in np.nonzero(~linked)[0]:
        x, y = int(ui[ok][k]), int(uj[ok][k])
        fun.fail(f"parents {_k(a, int(par[x]))}, {_k(a, int(par[y]))} of relatives {_k(a, x)}, {_k(a, y)} are not related")
    rep.checks.extend([sym, rlev, rdist, fun])

    # semi-compression
    sc = Check("semi_compression")
    rdeg = np.diff(rptr)
    cand = kids[(lv[kids] != NEG_INF) & (kids != a.root)]
    bad = cand[(cdeg[cand] == 1) & (cdeg[par[cand]] == 1) & (rdeg[cand] == 0)]
    for i in bad:
        sc.fail(f"{_k(a, int(i))} is a removable single-child node")
    rep.checks.append(sc)

    # local packing on every materialized level
    top = _top_levels(a, n)
    levels = _materialized_levels(a)
    pk = Check("local_packing", counts={"levels": len(levels)})
    for level in levels:
        r = rad_p(level)
        for p, q in _close_pairs(coords, _net(top, level), r):
            pk.fail(f"points {p} and {q} in N_{level} at distance {_euclid(pts_tuple[p], pts_tuple[q])!r} <= {r!r}")
    rep.checks.append(pk)

    # local covering on every edge
    cv = Check("local_covering", counts={"edges": max(m - 1, 0)})
    dk = pairwise_distances(coords[pt[kids]], coords[pt[par[kids]]])
    cl = lv[kids]
    thr = _level_values(np.where((cl != NEG_INF) & (cl != POS_INF), cl + 1, cl), rad_c)
    for k in np.nonzero(~(dk <= thr))[0]:
        i = int(kids[k])
        cv.fail(f"edge {_k(a, int(par[i]))} -> {_k(a, i)} has length {dk[k]!r} > {thr[k]!r}")
    rep.checks.append(cv)

    # local parent, algorithmic form: no relative of the parent is strictly closer
    lp = Check("local_parent")
    other = pt[par[kids]] != pt[kids]
    ci = kids[other]
    cd = dk[other]
    deg = np.diff(rptr)
    flagged = set()
    for lo in range(0, len(ci), 4096):
        i_blk, d_blk = ci[lo:lo + 4096], cd[lo:lo + 4096]
        s_blk = par[i_blk]
        cnt = deg[s_blk]
        total = int(cnt.sum())
        if total == 0:
            continue
        owner = np.repeat(np.arange(len(i_blk)), cnt)
        offs = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        ys = ridx[np.repeat(rptr[s_blk], cnt) + offs]
        dy = pairwise_distances(coords[pt[i_blk[owner]]], coords[pt[ys]])
        bad = (dy < d_blk[owner]) & (lv[ys] == lv[s_blk[owner]])
        for k in np.nonzero(bad)[0]:
            i = int(i_blk[owner[k]])
            if i in flagged:
                continue
            flagged.add(i)
            lp.fail(f"{_k(a, i)}: relative {_k(a, int(ys[k]))} of parent {_k(a, int(par[i]))} is closer")
    rep.checks.append(lp)

    if oracle:
        rep.checks.extend(_oracle_local(tree, a, top, levels, rad_r).checks)
    return rep


def _oracle_local(tree, a, top, levels, rad_r) -> ValidationReport:
    coords = tree.space.coords
    pt, lv, par = a.point, a.level, a.parent
    rep = ValidationReport()

    full = Check("local_parent_full")
    for i in range(len(a)):
        s = par[i]
        if s < 0 or pt[s] == pt[i] or not _is_finite(int(lv[i])):
            continue
        net = _net(top, int(lv[i]) + 1)
        dn = pairwise_distances(coords[net], coords[pt[i]][None, :])
        ds = pairwise_distances(coords[pt[s]], coords[pt[i]])
        if dn.min() < ds:
            j = int(net[np.argmin(dn)])
            full.fail(f"{_k(a, i)}: point {j} of N_{int(lv[i]) + 1} is closer than parent {_k(a, s)}")
    rep.checks.append(full)

    comp = Check("relative_completeness")
    by_level = defaultdict(list)
    for i in range(len(a)):
        if _is_finite(int(lv[i])):
            by_level[int(lv[i])].append(i)
    relsets = [set(r) for r in a.relatives]
    for level, nodes in by_level.items():
        nodes = np.array(nodes)
        r = rad_r(level)
        ids = pt[nodes]
        node_of = {int(p): int(x) for p, x in zip(ids, nodes)}
        for p, q in _close_pairs(coords, ids, r):
            x, y = node_of[p], node_of[q]
            if y not in relsets[x]:
                comp.fail(f"{_k(a, x)} and {_k(a, y)} are within {r!r} but not linked")
    rep.checks.append(comp)
    return rep


# -- global invariants ------------------------------------------------------


def check_global(tree: NetTree, cap: int | None = GLOBAL_CAP, force: bool = False) -> ValidationReport:
    """Subtree covering and packing with the global constants.

    Raises ``ValueError`` when the tree has more than ``cap`` points and
    ``force`` is not set.
    """
    n = len(tree.space)
    if cap is not None and n > cap and not force:
        raise ValueError(f"global check on {n} points exceeds the cap of {cap}; use force")
    a = tree.arrays()
    coords = tree.space.coords
    cp2, cc2 = tree.params.global_constants
    tau = tree.params.tau
    rep = ValidationReport()
    cov = Check("global_covering", counts={"cp": cp2, "cc": cc2})
    pack = Check("global_packing", counts={"cp": cp2, "cc": cc2})
    rep.checks.extend([cov, pack])
    if len(a) == 0 or a.root < 0:
        return rep

    # DFS order of leaves; every node owns a contiguous range
    m = len(a)
    lo = np.zeros(m, dtype=np.int64)
    hi = np.zeros(m, dtype=np.int64)
    leaf_pts: list[int] = []
    stack = [(a.root, False)]
    while stack:
        x, done = stack.pop()
        if done:
            hi[x] = len(leaf_pts)
            continue
        lo[x] = len(leaf_pts)
        if a.level[x] == NEG_INF:
            leaf_pts.append(int(a.point[x]))
        stack.append((x, True))
        for c in sorted(a.children[x], reverse=True):
            stack.append((c, False))
    order = np.array(leaf_pts, dtype=np.int64)
    P = coords[order]
    for x in range(m):
        level = int(a.level[x])
        if not _is_finite(level):
            continue
        d = pairwise_distances(P, coords[a.point[x]][None, :])
        inside = np.zeros(len(order), dtype=bool)
        inside[lo[x]:hi[x]] = True
        rc = cc2 * tau ** level
        far = inside & ~(d <= rc)
        if far.any():
            j = int(np.argmax(np.where(far, d, -1)))
            cov.fail(f"leaf {order[j]} under {_k(a, x)} at distance {d[j]!r} > {rc!r}")
        rp = cp2 * tau ** level
        near = ~inside & (d <= rp)
        if near.any():
            j = int(np.argmax(near))
            pack.fail(f"point {order[j]} at distance {d[j]!r} <= {rp!r} from {_k(a, x)} is outside its subtree")
    return rep


# -- per-level nets ---------------------------------------------------------


def check_nets(tree: NetTree) -> ValidationReport:
    """Every materialized level: packing over N_l and covering radius of N_l over P."""
    a = tree.arrays()
    n = len(tree.space)
    coords = tree.space.coords
    pts_tuple = [p.coords for p in tree.space]
    prm = tree.params
    beta_c = prm.cc * prm.tau / (prm.tau - 1)
    top = _top_levels(a, n)
    P = np.nonzero(_inserted_mask(a, n))[0]
    levels = _materialized_levels(a)
    rep = ValidationReport()
    pk = Check("net_packing", counts={"levels": len(levels)})
    cv = Check("net_covering", counts={"levels": len(levels)})
    rep.checks.extend([pk, cv])
    worst = 0.0
    for level in levels:
        net = _net(top, level)
        alpha = prm.cp * prm.tau ** level
        beta = beta_c * prm.tau ** level
        for p, q in _close_pairs(coords, net, alpha):
            pk.fail(f"N_{level}: points {p}, {q} within {alpha!r}")
        kd = cKDTree(coords[net])
        _, idx = kd.query(coords[P], k=1)
        d = pairwise_distances(coords[P], coords[net[idx]])
        for k in np.nonzero(~(d <= beta))[0]:
            x = int(P[k])
            exact = pairwise_distances(coords[net], coords[x][None, :]).min()
            d[k] = exact
            if not exact <= beta:
                cv.fail(f"N_{level}: point {x} at distance {exact!r} > {beta!r} from the net")
        if len(d):
            worst = max(worst, float((d / beta).max()))
    cv.counts["max_ratio"] = worst
    return rep


# -- centers ----------------------------------------------------------------


def check_centers(tree: NetTree, uninserted=None) -> ValidationReport:
    """Maintained centers and rings against the brute-force oracle."""
    from .ploc import brute_force_centers

    if uninserted is None:
        uninserted = tree.uninserted
    uninserted = sorted(int(x) for x in uninserted)
    rep = ValidationReport()
    cen = Check("centers", counts={"points": len(uninserted)})
    ring = Check("rings")
    cells = Check("cells")
    rep.checks.extend([cen, ring, cells])
    eng = tree.engine
    oracle = brute_force_centers(tree, uninserted)
    prm = tree.params
    for x in uninserted:
        have = tree.center_of(x)
        want, want_ring = oracle[x]
        if have != want:
            cen.fail(f"point {x}: maintained center {have} but brute force gives {want}")
        have_ring = tree.ring_of(x)
        if have is not None:
            level = have.level
            dd = tree.space.distance(x, have.point)
            if level == POS_INF:
                expect = "outer"
            else:
                expect = "inner" if dd <= prm.cp * prm.tau ** (level - 1) / 2.0 else "outer"
            if have_ring != expect:
                ring.fail(f"point {x} is in the {have_ring} cell of {have}, expected {expect}")
    # conservation: cells and center map are inverse
    seen: dict[int, NodeKey] = {}
    pt_, lv_, _, alive, _, _ = eng.export()
    for nid in range(len(pt_)):
        cin, cout = eng.cell(nid)
        key = NodeKey(pt_[nid], lv_[nid])
        if not alive[nid] and (cin or cout):
            cells.fail(f"removed node {key} still holds points")
        for ringname, lst in (("inner", cin), ("outer", cout)):
            for x in lst:
                if x in seen:
                    cells.fail(f"point {x} appears in two cells ({seen[x]} and {key})")
                seen[x] = key
                if tree.is_inserted(x):
                    cells.fail(f"inserted point {x} is in the cell of {key}")
                elif tree.center_of(x) != key or tree.ring_of(x) != ringname:
                    cells.fail(f"point {x} sits in the {ringname} cell of {key} but maps elsewhere")
    for x in uninserted:
        if x not in seen:
            cells.fail(f"uninserted point {x} is in no cell")
    return rep


# -- oracles and statistics -------------------------------------------------


def brute_force_nn(space: MetricSpace, subset, q) -> tuple[int, float]:
    """Linear-scan nearest neighbour of location ``q`` among ``subset``; ties go to the smaller id."""
    ids = np.asarray(sorted(int(i) for i in subset), dtype=np.int64)
    if len(ids) == 0:
        raise ValueError("subset is empty")
    qc = np.asarray(getattr(q, "coords", q), dtype=np.float64)
    d = pairwise_distances(space.coords[ids], qc[None, :])
    k = int(np.argmin(d))  # first minimum, i.e. smallest id
    return int(ids[k]), float(d[k])


def size_stats(tree: NetTree) -> dict:
    a = tree.arrays()
    n = len(tree.space)
    per_point = np.bincount(a.point, minlength=n) if len(a) else np.zeros(n, dtype=np.int64)
    return {
        "nodes": len(a),
        "relative_edges": sum(len(r) for r in a.relatives) // 2,
        "compressed_nodes": to_compressed(tree),
        "max_children": max((len(c) for c in a.children), default=0),
        "max_relatives": max((len(r) for r in a.relatives), default=0),
        "per_point_node_counts": per_point.tolist(),
    }


def validate_all(tree: NetTree, mode: str = "all", oracle: bool = False,
                 cap: int | None = GLOBAL_CAP, force: bool = False) -> ValidationReport:
    rep = ValidationReport()
    if mode in ("local", "all"):
        rep.extend(check_local(tree, oracle=oracle))
        rep.extend(check_nets(tree))
    if mode in ("global", "all"):
        rep.extend(check_global(tree, cap=cap, force=force))
    return rep
