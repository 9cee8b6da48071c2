# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
# distutils: language = c++
"""Compiled construction engine.

A statement-by-statement port of ``_engine.py`` onto C++ vectors.  Node ids,
iteration orders, counters and floating-point expressions match the Python
engine exactly, so both produce byte-identical snapshots.
"""

from libc.math cimport sqrt, pow, log, ceil, INFINITY
from libcpp.vector cimport vector

from .errors import InvariantError, StateError, StructureError

ctypedef long long lvl_t

cdef lvl_t NEG_INF = -(1LL << 62)
cdef lvl_t POS_INF = 1LL << 62

cdef enum:
    BASIC = 0
    SPLIT = 1
    MERGE = 2


cdef inline void vremove(vector[int]& v, int x) except *:
    cdef size_t i
    for i in range(v.size()):
        if v[i] == x:
            v.erase(v.begin() + i)
            return
    raise ValueError("value not in list")


cdef inline int vindex(vector[int]& v, int x) except -1:
    cdef size_t i
    for i in range(v.size()):
        if v[i] == x:
            return <int>i
    raise ValueError("value not in list")


cdef class Engine:
    """Mutable semi-compressed net-tree with eager point location."""

    compiled = True

    cdef vector[double] X
    cdef public int n
    cdef public int dim
    cdef public double tau, cp, cc, cr

    cdef vector[int] pt
    cdef vector[lvl_t] lv
    cdef vector[int] par
    cdef vector[vector[int]] ch
    cdef vector[vector[int]] rel
    cdef vector[char] alive
    cdef vector[double] pdist
    cdef vector[vector[int]] cin
    cdef vector[vector[int]] cout
    cdef public int root

    cdef vector[vector[int]] chain
    cdef vector[char] inserted
    cdef vector[int] center
    cdef vector[char] ring
    cdef vector[int] cpos
    cdef vector[double] cdist
    cdef bint pl_active

    cdef long long touches[3]
    cdef long long dist_total, nodes_created, nodes_removed, rel_writes, promotions
    cdef int cur
    cdef vector[int] _stamp
    cdef vector[int] _pair
    cdef long long max_pair

    # scratch: per-point distance cache and per-node visit marks
    cdef vector[int] dstamp
    cdef vector[double] dval
    cdef int dgen
    cdef vector[int] seen
    cdef int sgen

    def __init__(self, coords, tau, cp, cc, cr):
        cdef int i, k
        rows = [tuple(float(v) for v in c) for c in coords]
        self.n = len(rows)
        self.dim = len(rows[0]) if self.n else 0
        self.X.resize(self.n * self.dim)
        for i in range(self.n):
            for k in range(self.dim):
                self.X[i * self.dim + k] = rows[i][k]
        self.tau = float(tau)
        self.cp = float(cp)
        self.cc = float(cc)
        self.cr = float(cr)
        self.root = -1
        self.chain.resize(self.n)
        self.inserted.assign(self.n, 0)
        self.center.assign(self.n, -1)
        self.ring.assign(self.n, 0)
        self.cpos.assign(self.n, 0)
        self.cdist.assign(self.n, 0.0)
        self.pl_active = False
        self.touches[0] = self.touches[1] = self.touches[2] = 0
        self.dist_total = 0
        self.nodes_created = 0
        self.nodes_removed = 0
        self.rel_writes = 0
        self.promotions = 0
        self.cur = -1
        self._stamp.assign(self.n, -1)
        self._pair.assign(self.n, 0)
        self.max_pair = 0
        self.dstamp.assign(self.n, 0)
        self.dval.assign(self.n, 0.0)
        self.dgen = 0
        self.sgen = 0

    # -- primitives -----------------------------------------------------

    cdef inline double _d(self, int i, int j) noexcept:
        cdef double s = 0.0, t
        cdef int k
        cdef const double* a = &self.X[i * self.dim]
        cdef const double* b = &self.X[j * self.dim]
        for k in range(self.dim):
            t = a[k] - b[k]
            s += t * t
        return sqrt(s)

    cdef inline double _dist(self, int i, int j) noexcept:
        self.dist_total += 1
        return self._d(i, j)

    def dist(self, int i, int j):
        return self._dist(i, j)

    cdef inline double _rad(self, double c, lvl_t level) noexcept:
        if level == NEG_INF:
            return 0.0
        if level == POS_INF:
            return INFINITY
        return c * pow(self.tau, <double>level)

    def rad(self, double c, lvl_t level):
        return self._rad(c, level)

    cdef inline double _inner_radius(self, lvl_t level) noexcept:
        if level == POS_INF:
            return -1.0
        if level == NEG_INF:
            return 0.0
        return self.cp * pow(self.tau, <double>(level - 1)) / 2.0

    def inner_radius(self, lvl_t level):
        return self._inner_radius(level)

    cdef lvl_t _insertion_level(self, double d) except? -1:
        if not d > 0.0:
            raise ValueError(f"insertion distance must be positive, got {d!r}")
        cdef double cr = self.cr, tau = self.tau
        cdef lvl_t h = <lvl_t>ceil(log(d / cr) / log(tau))
        while cr * pow(tau, <double>(h - 1)) >= d:
            h -= 1
        while d > cr * pow(tau, <double>h):
            h += 1
        return h

    def insertion_level(self, double d):
        return self._insertion_level(d)

    cdef int _new_node(self, int p, lvl_t level) except -1:
        cdef int nid = <int>self.pt.size()
        self.pt.push_back(p)
        self.lv.push_back(level)
        self.par.push_back(-1)
        self.ch.push_back(vector[int]())
        self.rel.push_back(vector[int]())
        self.alive.push_back(1)
        self.pdist.push_back(0.0)
        self.cin.push_back(vector[int]())
        self.cout.push_back(vector[int]())
        self.seen.push_back(0)
        cdef vector[int]* chain = &self.chain[p]
        cdef size_t i = 0
        while i < chain.size() and self.lv[chain[0][i]] > level:
            i += 1
        if i < chain.size() and self.lv[chain[0][i]] == level:
            # roll back the half-made node before reporting
            self.pt.pop_back(); self.lv.pop_back(); self.par.pop_back()
            self.ch.pop_back(); self.rel.pop_back(); self.alive.pop_back()
            self.pdist.pop_back(); self.cin.pop_back(); self.cout.pop_back()
            self.seen.pop_back()
            raise StructureError(f"node ({p}, {level}) already exists")
        chain.insert(chain.begin() + i, nid)
        self.nodes_created += 1
        return nid

    def new_node(self, int p, lvl_t level):
        self._check_point(p)
        return self._new_node(p, level)

    cdef int _find(self, int p, lvl_t level) noexcept:
        cdef int nid
        for nid in self.chain[p]:
            if self.lv[nid] == level:
                return nid
        return -1

    def find(self, int p, lvl_t level):
        self._check_point(p)
        return self._find(p, level)

    cdef int _check_point(self, int p) except -1:
        if p < 0 or p >= self.n:
            raise StructureError(f"no point {p}")
        return 0

    cdef int _check_node(self, int x) except -1:
        if x < 0 or x >= <int>self.pt.size():
            raise StructureError(f"no node id {x}")
        return 0

    def set_parent(self, int c, int p):
        self._check_node(c)
        cdef int old = self.par[c]
        if old >= 0:
            vremove(self.ch[old], c)
        self.par[c] = p
        if p >= 0:
            self._check_node(p)
            self.ch[p].push_back(c)
            self.pdist[c] = self._d(self.pt[c], self.pt[p])

    cdef inline void _link(self, int a, int b):
        self.rel[a].push_back(b)
        self.rel[b].push_back(a)
        self.rel_writes += 2

    def link(self, int a, int b):
        self._check_node(a)
        self._check_node(b)
        self._link(a, b)

    def add_relative(self, int a, int b):
        self._check_node(a)
        self._check_node(b)
        self.rel[a].push_back(b)

    def set_root(self, int nid):
        self.root = nid

    def mark_inserted(self, int p):
        self._check_point(p)
        self.inserted[p] = 1

    def top_level(self, int p):
        self._check_point(p)
        if self.chain[p].empty():
            return NEG_INF
        return self.lv[self.chain[p][0]]

    def real_levels(self, int p):
        """(lowest, highest) finite level of p's nodes, or None."""
        self._check_point(p)
        levels = [self.lv[x] for x in self.chain[p] if self.lv[x] != NEG_INF and self.lv[x] != POS_INF]
        if not levels:
            return None
        return (min(levels), max(levels))

    # -- structural edits -----------------------------------------------

    cdef int _split_jump(self, int p, lvl_t level) except -1:
        cdef vector[int]* chain = &self.chain[p]
        cdef int upper = -1, lower = -1, a, b, x
        cdef size_t i
        if chain.size() > 0:
            for i in range(chain.size() - 1):
                a = chain[0][i]
                b = chain[0][i + 1]
                if self.lv[a] > level > self.lv[b]:
                    upper = a
                    lower = b
                    break
                if self.lv[a] == level or self.lv[b] == level:
                    raise StructureError(f"point {p} already has a node at level {level}")
        if upper < 0 or self.par[lower] != upper:
            raise StructureError(f"no jump of point {p} spans level {level}")
        x = self._new_node(p, level)
        self.par[x] = upper
        cdef vector[int]* kids = &self.ch[upper]
        kids[0][vindex(kids[0], lower)] = x
        self.ch[x].push_back(lower)
        self.par[lower] = x
        if self.pl_active:
            self._on_split(x, upper)
        return x

    def split_jump(self, int p, lvl_t level):
        self._check_point(p)
        return self._split_jump(p, level)

    cdef int _ensure_node(self, int p, lvl_t level) except -1:
        cdef int x = self._find(p, level)
        if x >= 0:
            return x
        return self._split_jump(p, level)

    def ensure_node(self, int p, lvl_t level):
        self._check_point(p)
        return self._ensure_node(p, level)

    cdef bint _try_remove(self, int x) except -1:
        if x == self.root or not self.alive[x] or self.lv[x] == NEG_INF:
            return False
        cdef int p = self.par[x]
        if p < 0 or self.ch[p].size() != 1 or self.ch[x].size() != 1 or not self.rel[x].empty():
            return False
        if self.pl_active:
            self._on_removed(x, p)
        cdef int c = self.ch[x][0]
        self.ch[p][0] = c
        self.par[c] = p
        self.pdist[c] = self._d(self.pt[c], self.pt[p])
        self.alive[x] = 0
        self.par[x] = -1
        self.ch[x].clear()
        vremove(self.chain[self.pt[x]], x)
        self.nodes_removed += 1
        return True

    def try_remove(self, int x):
        self._check_node(x)
        return self._try_remove(x)

    # -- point location ---------------------------------------------------

    cdef inline void _touch(self, int x, int kind) noexcept:
        self.touches[kind] += 1
        if self._stamp[x] != self.cur:
            self._stamp[x] = self.cur
            self._pair[x] = 0
        cdef int k = self._pair[x] + 1
        self._pair[x] = k
        if k > self.max_pair:
            self.max_pair = k

    cdef inline void _cell_add(self, int x, int node, int ring) noexcept:
        cdef vector[int]* lst = &self.cout[node] if ring else &self.cin[node]
        self.cpos[x] = <int>lst.size()
        lst.push_back(x)
        self.center[x] = node
        self.ring[x] = ring

    cdef inline void _cell_remove(self, int x) noexcept:
        cdef int node = self.center[x]
        cdef vector[int]* lst = &self.cout[node] if self.ring[x] else &self.cin[node]
        cdef int i = self.cpos[x]
        cdef int last = lst.back()
        lst.pop_back()
        if last != x:
            lst[0][i] = last
            self.cpos[last] = i
        self.center[x] = -1

    def bootstrap(self, int p0):
        self._check_point(p0)
        self.cur = p0
        cdef int root = self._new_node(p0, POS_INF)
        cdef int leaf = self._new_node(p0, NEG_INF)
        self.par[leaf] = root
        self.ch[root].push_back(leaf)
        self.root = root
        self.inserted[p0] = 1
        cdef int x
        for x in range(self.n):
            if x != p0:
                self.cdist[x] = self._dist(x, p0)
                self._cell_add(x, root, 1)
        self.pl_active = True
        return root

    cdef int _take_center(self, int p) except -1:
        if p < 0 or p >= self.n:
            raise StateError(f"unknown point {p}")
        cdef int c = self.center[p]
        if self.inserted[p] or c < 0:
            raise StateError(f"point {p} has no center (already inserted?)")
        self._cell_remove(p)
        return c

    def take_center(self, int p):
        return self._take_center(p)

    cdef void _on_split(self, int new, int top) noexcept:
        cdef lvl_t level = self.lv[new]
        cdef int p = self.pt[new]
        cdef double r = self._rad(self.cr, level)
        cdef double rin = self._inner_radius(level)
        cdef vector[int] lst
        cdef int x, w
        cdef double d
        for w in range(2):
            lst = self.cin[top] if w == 0 else self.cout[top]
            for x in lst:
                self._touch(x, SPLIT)
                d = self._dist(x, p)
                if d <= r:
                    self._cell_remove(x)
                    self.cdist[x] = d
                    self._cell_add(x, new, 0 if d <= rin else 1)

    def on_split(self, int new, int top):
        self._check_node(new)
        self._check_node(top)
        self._on_split(new, top)

    cdef void _on_child_added(self, int new, int s) noexcept:
        cdef lvl_t level = self.lv[new]
        cdef int p = self.pt[new]
        cdef double r = self._rad(self.cr, level)
        cdef double rin = self._inner_radius(level)
        cdef vector[int] group
        cdef vector[int] scan
        cdef vector[int] out
        cdef int y, x, z
        cdef double d, cd
        cdef lvl_t ly
        group.push_back(s)
        for y in self.rel[s]:
            group.push_back(y)
        scan = group
        for y in group:
            for z in self.ch[y]:
                scan.push_back(z)
        for y in self.rel[new]:
            for z in self.ch[y]:
                scan.push_back(z)
        for z in self.ch[new]:
            scan.push_back(z)
        self.sgen += 1
        cdef int gen = self.sgen
        self.seen[new] = gen
        for y in scan:
            if self.seen[y] == gen:
                continue
            self.seen[y] = gen
            if self.cout[y].empty():
                continue
            out = self.cout[y]
            ly = self.lv[y]
            for x in out:
                self._touch(x, BASIC)
                d = self._dist(x, p)
                if d > r:
                    continue
                cd = self.cdist[x]
                if d < cd or (d == cd and (level < ly or (level == ly and p < self.pt[y]))):
                    self._cell_remove(x)
                    self.cdist[x] = d
                    self._cell_add(x, new, 0 if d <= rin else 1)

    def on_child_added(self, int new, int s):
        self._check_node(new)
        self._check_node(s)
        self._on_child_added(new, s)

    cdef void _on_removed(self, int dying, int parent) noexcept:
        cdef lvl_t plevel = self.lv[parent]
        cdef int q = self.pt[parent]
        cdef double rin = self._inner_radius(plevel)
        cdef vector[int] lst = self.cin[dying]
        cdef int x
        cdef double d
        for x in lst:
            self._cell_remove(x)
            self._cell_add(x, parent, 0 if plevel != POS_INF else 1)
        lst = self.cout[dying]
        for x in lst:
            self._touch(x, MERGE)
            d = self._dist(x, q)
            self._cell_remove(x)
            self.cdist[x] = d
            self._cell_add(x, parent, 0 if d <= rin else 1)

    def on_removed(self, int dying, int parent):
        self._check_node(dying)
        self._check_node(parent)
        self._on_removed(dying, parent)

    # -- construction -----------------------------------------------------

    cdef inline double _dp(self, int p, int q) noexcept:
        # distance from p, cached per point for the current update
        if self.dstamp[q] != self.dgen:
            self.dstamp[q] = self.dgen
            self.dval[q] = self._dist(p, q)
        return self.dval[q]

    cdef int _update(self, int v, int s0, vector[int]& lost) except -1:
        """Choose v's parent among rel(s0), then its relatives and children."""
        cdef int p = self.pt[v]
        cdef lvl_t level = self.lv[v]
        cdef int best, y, c, z, zp, x
        cdef double bd, dy, dn, do_, r
        cdef lvl_t lc, below
        cdef vector[int] group, kids, rels
        self.dgen += 1

        best = s0
        bd = self._dp(p, self.pt[s0])
        for y in self.rel[s0]:
            dy = self._dp(p, self.pt[y])
            if dy < bd or (dy == bd and self.pt[y] < self.pt[best]):
                best = y
                bd = dy
        if best != s0:
            vremove(self.ch[s0], v)
            self.ch[best].push_back(v)
            self.par[v] = best
            lost.push_back(s0)
        self.pdist[v] = bd

        r = self._rad(self.cr, level)
        group.push_back(best)
        for y in self.rel[best]:
            group.push_back(y)
        for y in group:
            kids = self.ch[y]
            for c in kids:
                if c == v:
                    continue
                lc = self.lv[c]
                if lc == level:
                    if self._dp(p, self.pt[c]) <= r:
                        self._link(v, c)
                elif lc < level and self.pt[c] == self.pt[y]:
                    # jump of y spanning this level: the point needs a node here now
                    if self._dp(p, self.pt[c]) <= r:
                        x = self._split_jump(self.pt[c], level)
                        self._link(v, x)

        below = level - 1
        rels = self.rel[v]
        for z in rels:
            zp = self.pt[z]
            kids = self.ch[z]
            for c in kids:
                if self.lv[c] != below or self.pt[c] == zp:
                    continue
                dn = self._dp(p, self.pt[c])
                do_ = self.pdist[c]
                if dn < do_ or (dn == do_ and p < zp):
                    vremove(self.ch[z], c)
                    self.ch[v].push_back(c)
                    self.par[c] = v
                    self.pdist[c] = dn
                    lost.push_back(z)
        return 0

    cdef int _cleanup(self, vector[int]& lost) except -1:
        cdef int z
        cdef size_t i, j
        cdef bint dup
        for i in range(lost.size()):
            z = lost[i]
            dup = False
            for j in range(i):
                if lost[j] == z:
                    dup = True
                    break
            if not dup:
                if not self._try_remove(z) and self.alive[z] and self.ch[z].size() == 1:
                    # the remaining child just became an only child
                    self._try_remove(self.ch[z][0])
        return 0

    def insert(self, int p):
        if p < 0 or p >= self.n:
            raise StateError(f"unknown point {p}")
        if self.inserted[p]:
            raise StateError(f"point {p} is already inserted")
        cdef long long created0 = self.nodes_created, removed0 = self.nodes_removed
        self.cur = p
        cdef int c = self._take_center(p)
        cdef int q = self.pt[c]
        cdef double d = self._dist(p, q)
        if not d <= self._rad(self.cr, self.lv[c]):
            raise InvariantError(f"stale center for point {p}: node ({q}, {self.lv[c]})")
        cdef lvl_t h = self._insertion_level(d)
        if d <= self.cp * pow(self.tau, <double>h):
            h -= 1
        self.inserted[p] = 1

        cdef int qh = self._ensure_node(q, h)
        cdef int s0 = self.par[qh]
        if self.lv[s0] != h + 1:
            if self.pt[s0] != q:
                raise InvariantError(f"node ({q}, {h}) has a non-adjacent parent of another point")
            s0 = self._split_jump(q, h + 1)

        cdef int v = self._new_node(p, h)
        cdef int leaf = self._new_node(p, NEG_INF)
        self.par[leaf] = v
        self.ch[v].push_back(leaf)
        self.par[v] = s0
        self.ch[s0].push_back(v)

        cdef vector[int] lost
        self._update(v, s0, lost)
        self._on_child_added(v, self.par[v])
        self._cleanup(lost)

        cdef long long promos = 0
        if self.pdist[v] > self.cc * pow(self.tau, <double>(h + 1)):
            promos = self._propagate(v)
        return v, promos, self.nodes_created - created0, self.nodes_removed - removed0

    cdef long long _propagate(self, int v) except -1:
        cdef long long promos = 0
        cdef int s, p, q, s0, w
        cdef lvl_t level
        cdef vector[int] lost
        while True:
            s = self.par[v]
            level = self.lv[v]
            if self.lv[s] == POS_INF or self.pdist[v] <= self._rad(self.cc, level + 1):
                break
            if self.pdist[v] > self._rad(self.cc + self.cr / self.tau, level + 1):
                raise InvariantError(f"node ({self.pt[v]}, {level}) is too far from its parent to promote")
            p = self.pt[v]
            q = self.pt[s]
            s0 = self.par[s]
            if self.lv[s0] != level + 2:
                if self.pt[s0] != q:
                    raise InvariantError(f"node ({q}, {level + 1}) has a non-adjacent parent of another point")
                s0 = self._split_jump(q, level + 2)
            w = self._new_node(p, level + 1)
            vremove(self.ch[s], v)
            self.par[v] = w
            self.ch[w].push_back(v)
            self.pdist[v] = 0.0
            self.par[w] = s0
            self.ch[s0].push_back(w)
            lost.clear()
            lost.push_back(s)
            self._update(w, s0, lost)
            self._on_child_added(w, self.par[w])
            self._cleanup(lost)
            v = w
            promos += 1
        self.promotions += promos
        return promos

    def propagate(self, int v):
        self._check_node(v)
        return self._propagate(v)

    # -- export -----------------------------------------------------------

    def export(self):
        return (list(self.pt), list(self.lv), list(self.par), [bool(a) for a in self.alive],
                [list(c) for c in self.ch], [list(r) for r in self.rel])

    def stats(self):
        return {
            "basic": self.touches[BASIC],
            "split": self.touches[SPLIT],
            "merge": self.touches[MERGE],
            "distance_total": self.dist_total,
            "nodes_created": self.nodes_created,
            "nodes_removed": self.nodes_removed,
            "rel_writes": self.rel_writes,
            "promotions": self.promotions,
            "max_pair": self.max_pair,
        }

    def key_of(self, int nid):
        self._check_node(nid)
        return self.pt[nid], self.lv[nid]

    def parent_of(self, int nid):
        self._check_node(nid)
        return self.par[nid]

    def children_of(self, int nid):
        self._check_node(nid)
        return list(self.ch[nid])

    def relatives_of(self, int nid):
        self._check_node(nid)
        return list(self.rel[nid])

    def chain_of(self, int p):
        self._check_point(p)
        return list(self.chain[p])

    def is_inserted(self, int p):
        self._check_point(p)
        return bool(self.inserted[p])

    def inserted_flags(self):
        return [bool(f) for f in self.inserted]

    def cell(self, int node):
        self._check_node(node)
        return list(self.cin[node]), list(self.cout[node])

    def center_of(self, int p):
        self._check_point(p)
        return self.center[p], self.ring[p]

    def set_center(self, int p, int node, int ring):
        """Raw reassignment, for fault injection only."""
        self._check_point(p)
        self._check_node(node)
        if self.center[p] >= 0:
            self._cell_remove(p)
        self._cell_add(p, node, ring)
