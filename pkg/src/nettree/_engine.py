"""Pure-Python construction engine.

Nodes are integer ids into parallel lists; points are integer ids into the
coordinate table.  The compiled engine in ``_cengine.pyx`` mirrors this file
method for method and must stay behaviourally identical (same node ids, same
counters, same floating-point expressions).
"""

import math

from .errors import InvariantError, StateError, StructureError

NEG_INF = -(1 << 62)
POS_INF = 1 << 62

BASIC, SPLIT, MERGE = 0, 1, 2


def make_distance(dim):
    """Euclidean distance summed in coordinate order, then one sqrt."""
    sqrt = math.sqrt
    if dim == 1:
        def dist(a, b):
            t = a[0] - b[0]
            return sqrt(t * t)
    elif dim == 2:
        def dist(a, b):
            t0 = a[0] - b[0]
            t1 = a[1] - b[1]
            return sqrt(t0 * t0 + t1 * t1)
    elif dim == 3:
        def dist(a, b):
            t0 = a[0] - b[0]
            t1 = a[1] - b[1]
            t2 = a[2] - b[2]
            return sqrt(t0 * t0 + t1 * t1 + t2 * t2)
    else:
        def dist(a, b):
            s = 0.0
            for x, y in zip(a, b):
                t = x - y
                s += t * t
            return sqrt(s)
    return dist


class Engine:
    """Mutable semi-compressed net-tree with eager point location."""

    compiled = False

    def __init__(self, coords, tau, cp, cc, cr):
        self.coords = [tuple(float(v) for v in c) for c in coords]
        self.n = len(self.coords)
        self.dim = len(self.coords[0]) if self.n else 0
        self._d = make_distance(max(self.dim, 1))
        self.tau = float(tau)
        self.cp = float(cp)
        self.cc = float(cc)
        self.cr = float(cr)

        self.pt = []
        self.lv = []
        self.par = []
        self.ch = []
        self.rel = []
        self.alive = []
        self.pdist = []
        self.cin = []
        self.cout = []
        self.root = -1

        n = self.n
        self.chain = [[] for _ in range(n)]
        self.inserted = [False] * n
        self.center = [-1] * n
        self.ring = [0] * n
        self.cpos = [0] * n
        self.cdist = [0.0] * n
        self.pl_active = False

        self.touches = [0, 0, 0]
        self.dist_total = 0
        self.nodes_created = 0
        self.nodes_removed = 0
        self.rel_writes = 0
        self.promotions = 0
        self.cur = -1
        self._stamp = [-1] * n
        self._pair = [0] * n
        self.max_pair = 0

    # -- primitives -----------------------------------------------------

    def dist(self, i, j):
        self.dist_total += 1
        return self._d(self.coords[i], self.coords[j])

    def rad(self, c, level):
        if level == NEG_INF:
            return 0.0
        if level == POS_INF:
            return math.inf
        return c * self.tau ** level

    def inner_radius(self, level):
        if level == POS_INF:
            return -1.0
        if level == NEG_INF:
            return 0.0
        return self.cp * self.tau ** (level - 1) / 2.0

    def insertion_level(self, d):
        if not d > 0.0:
            raise ValueError(f"insertion distance must be positive, got {d!r}")
        cr, tau = self.cr, self.tau
        h = math.ceil(math.log(d / cr) / math.log(tau))
        while cr * tau ** (h - 1) >= d:
            h -= 1
        while d > cr * tau ** h:
            h += 1
        return h

    def new_node(self, p, level):
        # chain is kept sorted by decreasing level
        chain = self.chain[p]
        lv = self.lv
        i = 0
        while i < len(chain) and lv[chain[i]] > level:
            i += 1
        if i < len(chain) and lv[chain[i]] == level:
            raise StructureError(f"node ({p}, {level}) already exists")
        nid = len(self.pt)
        self.pt.append(p)
        self.lv.append(level)
        self.par.append(-1)
        self.ch.append([])
        self.rel.append([])
        self.alive.append(True)
        self.pdist.append(0.0)
        self.cin.append([])
        self.cout.append([])
        chain.insert(i, nid)
        self.nodes_created += 1
        return nid

    def find(self, p, level):
        lv = self.lv
        for nid in self.chain[p]:
            if lv[nid] == level:
                return nid
        return -1

    def set_parent(self, c, p):
        old = self.par[c]
        if old >= 0:
            self.ch[old].remove(c)
        self.par[c] = p
        if p >= 0:
            self.ch[p].append(c)
            self.pdist[c] = self._d(self.coords[self.pt[c]], self.coords[self.pt[p]])

    def link(self, a, b):
        self.rel[a].append(b)
        self.rel[b].append(a)
        self.rel_writes += 2

    def add_relative(self, a, b):
        self.rel[a].append(b)

    def set_root(self, nid):
        self.root = nid

    def mark_inserted(self, p):
        self.inserted[p] = True

    def top_level(self, p):
        chain = self.chain[p]
        return self.lv[chain[0]] if chain else NEG_INF

    def real_levels(self, p):
        """(lowest, highest) finite level of p's nodes, or None."""
        levels = [self.lv[x] for x in self.chain[p] if self.lv[x] not in (NEG_INF, POS_INF)]
        if not levels:
            return None
        return (min(levels), max(levels))

    # -- structural edits -----------------------------------------------

    def split_jump(self, p, level):
        chain = self.chain[p]
        lv = self.lv
        upper = lower = -1
        for i in range(len(chain) - 1):
            a, b = chain[i], chain[i + 1]
            if lv[a] > level > lv[b]:
                upper, lower = a, b
                break
            if lv[a] == level or lv[b] == level:
                raise StructureError(f"point {p} already has a node at level {level}")
        if upper < 0 or self.par[lower] != upper:
            raise StructureError(f"no jump of point {p} spans level {level}")
        x = self.new_node(p, level)
        self.par[x] = upper
        kids = self.ch[upper]
        kids[kids.index(lower)] = x
        self.ch[x] = [lower]
        self.par[lower] = x
        if self.pl_active:
            self.on_split(x, upper)
        return x

    def ensure_node(self, p, level):
        x = self.find(p, level)
        if x >= 0:
            return x
        return self.split_jump(p, level)

    def try_remove(self, x):
        if x == self.root or not self.alive[x] or self.lv[x] == NEG_INF:
            return False
        p = self.par[x]
        if p < 0 or len(self.ch[p]) != 1 or len(self.ch[x]) != 1 or self.rel[x]:
            return False
        if self.pl_active:
            self.on_removed(x, p)
        c = self.ch[x][0]
        self.ch[p][0] = c
        self.par[c] = p
        self.pdist[c] = self._d(self.coords[self.pt[c]], self.coords[self.pt[p]])
        self.alive[x] = False
        self.par[x] = -1
        self.ch[x] = []
        self.chain[self.pt[x]].remove(x)
        self.nodes_removed += 1
        return True

    # -- point location ---------------------------------------------------

    def _touch(self, x, kind):
        self.touches[kind] += 1
        if self._stamp[x] != self.cur:
            self._stamp[x] = self.cur
            self._pair[x] = 0
        k = self._pair[x] + 1
        self._pair[x] = k
        if k > self.max_pair:
            self.max_pair = k

    def cell_add(self, x, node, ring):
        lst = self.cout[node] if ring else self.cin[node]
        self.cpos[x] = len(lst)
        lst.append(x)
        self.center[x] = node
        self.ring[x] = ring

    def cell_remove(self, x):
        node = self.center[x]
        lst = self.cout[node] if self.ring[x] else self.cin[node]
        i = self.cpos[x]
        last = lst.pop()
        if last != x:
            lst[i] = last
            self.cpos[last] = i
        self.center[x] = -1

    def bootstrap(self, p0):
        self.cur = p0
        root = self.new_node(p0, POS_INF)
        leaf = self.new_node(p0, NEG_INF)
        self.par[leaf] = root
        self.ch[root].append(leaf)
        self.root = root
        self.inserted[p0] = True
        for x in range(self.n):
            if x != p0:
                self.cdist[x] = self.dist(x, p0)
                self.cell_add(x, root, 1)
        self.pl_active = True
        return root

    def take_center(self, p):
        if p < 0 or p >= self.n:
            raise StateError(f"unknown point {p}")
        c = self.center[p]
        if self.inserted[p] or c < 0:
            raise StateError(f"point {p} has no center (already inserted?)")
        self.cell_remove(p)
        return c

    def on_split(self, new, top):
        level = self.lv[new]
        p = self.pt[new]
        r = self.rad(self.cr, level)
        rin = self.inner_radius(level)
        for lst in (self.cin[top], self.cout[top]):
            for x in list(lst):
                self._touch(x, SPLIT)
                d = self.dist(x, p)
                if d <= r:
                    self.cell_remove(x)
                    self.cdist[x] = d
                    self.cell_add(x, new, 0 if d <= rin else 1)

    def on_child_added(self, new, s):
        level = self.lv[new]
        p = self.pt[new]
        r = self.rad(self.cr, level)
        rin = self.inner_radius(level)
        ch, rel = self.ch, self.rel
        group = [s]
        group.extend(rel[s])
        scan = list(group)
        for y in group:
            scan.extend(ch[y])
        for y in rel[new]:
            scan.extend(ch[y])
        scan.extend(ch[new])
        seen = {new}
        lv, pt, cdist, center = self.lv, self.pt, self.cdist, self.center
        for y in scan:
            if y in seen:
                continue
            seen.add(y)
            out = self.cout[y]
            if not out:
                continue
            for x in list(out):
                self._touch(x, BASIC)
                d = self.dist(x, p)
                if d > r:
                    continue
                cd = cdist[x]
                if d < cd or (d == cd and (level < lv[y] or (level == lv[y] and p < pt[y]))):
                    self.cell_remove(x)
                    cdist[x] = d
                    self.cell_add(x, new, 0 if d <= rin else 1)

    def on_removed(self, dying, parent):
        plevel = self.lv[parent]
        q = self.pt[parent]
        rin = self.inner_radius(plevel)
        for x in list(self.cin[dying]):
            self.cell_remove(x)
            self.cell_add(x, parent, 0 if plevel != POS_INF else 1)
        for x in list(self.cout[dying]):
            self._touch(x, MERGE)
            d = self.dist(x, q)
            self.cell_remove(x)
            self.cdist[x] = d
            self.cell_add(x, parent, 0 if d <= rin else 1)

    # -- construction -----------------------------------------------------

    def _update(self, v, s0, lost):
        """Choose v's parent among rel(s0), then its relatives and children."""
        p = self.pt[v]
        level = self.lv[v]
        pt, lv, ch, rel, par = self.pt, self.lv, self.ch, self.rel, self.par
        cache = {}

        def dp(q):
            d = cache.get(q)
            if d is None:
                d = cache[q] = self.dist(p, q)
            return d

        best = s0
        bd = dp(pt[s0])
        for y in rel[s0]:
            dy = dp(pt[y])
            if dy < bd or (dy == bd and pt[y] < pt[best]):
                best, bd = y, dy
        if best != s0:
            ch[s0].remove(v)
            ch[best].append(v)
            par[v] = best
            lost.append(s0)
        self.pdist[v] = bd

        r = self.rad(self.cr, level)
        group = [best]
        group.extend(rel[best])
        for y in group:
            for c in list(ch[y]):
                if c == v:
                    continue
                lc = lv[c]
                if lc == level:
                    if dp(pt[c]) <= r:
                        self.link(v, c)
                elif lc < level and pt[c] == pt[y]:
                    # jump of y spanning this level: the point needs a node here now
                    if dp(pt[c]) <= r:
                        x = self.split_jump(pt[c], level)
                        self.link(v, x)

        below = level - 1
        for z in list(rel[v]):
            zp = pt[z]
            for c in list(ch[z]):
                if lv[c] != below or pt[c] == zp:
                    continue
                dn = dp(pt[c])
                do = self.pdist[c]
                if dn < do or (dn == do and p < zp):
                    ch[z].remove(c)
                    ch[v].append(c)
                    par[c] = v
                    self.pdist[c] = dn
                    lost.append(z)

    def _cleanup(self, lost):
        seen = set()
        for z in lost:
            if z not in seen:
                seen.add(z)
                if not self.try_remove(z) and self.alive[z] and len(self.ch[z]) == 1:
                    # the remaining child just became an only child
                    self.try_remove(self.ch[z][0])

    def insert(self, p):
        if self.inserted[p]:
            raise StateError(f"point {p} is already inserted")
        created0, removed0 = self.nodes_created, self.nodes_removed
        self.cur = p
        c = self.take_center(p)
        q = self.pt[c]
        d = self.dist(p, q)
        if not d <= self.rad(self.cr, self.lv[c]):
            raise InvariantError(f"stale center for point {p}: node ({q}, {self.lv[c]})")
        h = self.insertion_level(d)
        if d <= self.cp * self.tau ** h:
            h -= 1
        self.inserted[p] = True

        qh = self.ensure_node(q, h)
        s0 = self.par[qh]
        if self.lv[s0] != h + 1:
            if self.pt[s0] != q:
                raise InvariantError(f"node ({q}, {h}) has a non-adjacent parent of another point")
            s0 = self.split_jump(q, h + 1)

        v = self.new_node(p, h)
        leaf = self.new_node(p, NEG_INF)
        self.par[leaf] = v
        self.ch[v].append(leaf)
        self.par[v] = s0
        self.ch[s0].append(v)

        lost = []
        self._update(v, s0, lost)
        self.on_child_added(v, self.par[v])
        self._cleanup(lost)

        promos = 0
        if self.pdist[v] > self.cc * self.tau ** (h + 1):
            promos = self.propagate(v)
        return v, promos, self.nodes_created - created0, self.nodes_removed - removed0

    def propagate(self, v):
        promos = 0
        lv, pt, par, ch = self.lv, self.pt, self.par, self.ch
        while True:
            s = par[v]
            level = lv[v]
            if lv[s] == POS_INF or self.pdist[v] <= self.rad(self.cc, level + 1):
                break
            if self.pdist[v] > self.rad(self.cc + self.cr / self.tau, level + 1):
                raise InvariantError(f"node ({pt[v]}, {level}) is too far from its parent to promote")
            p = pt[v]
            q = pt[s]
            s0 = par[s]
            if lv[s0] != level + 2:
                if pt[s0] != q:
                    raise InvariantError(f"node ({q}, {level + 1}) has a non-adjacent parent of another point")
                s0 = self.split_jump(q, level + 2)
            w = self.new_node(p, level + 1)
            ch[s].remove(v)
            par[v] = w
            ch[w].append(v)
            self.pdist[v] = 0.0
            par[w] = s0
            ch[s0].append(w)
            lost = [s]
            self._update(w, s0, lost)
            self.on_child_added(w, par[w])
            self._cleanup(lost)
            v = w
            promos += 1
        self.promotions += promos
        return promos

    # -- export -----------------------------------------------------------

    def export(self):
        return (list(self.pt), list(self.lv), list(self.par), list(self.alive),
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

    def key_of(self, nid):
        return self.pt[nid], self.lv[nid]

    def parent_of(self, nid):
        return self.par[nid]

    def children_of(self, nid):
        return list(self.ch[nid])

    def relatives_of(self, nid):
        return list(self.rel[nid])

    def chain_of(self, p):
        return list(self.chain[p])

    def is_inserted(self, p):
        return self.inserted[p]

    def inserted_flags(self):
        return list(self.inserted)

    def cell(self, node):
        return list(self.cin[node]), list(self.cout[node])

    def center_of(self, p):
        return self.center[p], self.ring[p]

    def set_center(self, p, node, ring):
        """Raw reassignment, for fault injection only."""
        if self.center[p] >= 0:
            self.cell_remove(p)
        self.cell_add(p, node, ring)
