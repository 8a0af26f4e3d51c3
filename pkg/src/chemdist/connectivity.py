"""Components, vertex-disjoint open paths and minimum-defect circuits."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .lattice import BoxGeometry, Config, RegionMask
from .paths import LatticePath, dual_path, primal_path

OPEN = "open"
CLOSED_DUAL = "closed-dual"
OPEN_PRIMAL = "open-primal"

_COLOR_ALIASES = {
    "open": OPEN, "open-primal": OPEN, "primal": OPEN,
    "closed": CLOSED_DUAL, "closed-dual": CLOSED_DUAL, "dual": CLOSED_DUAL,
}


def _color(color: str) -> str:
    try:
        return _COLOR_ALIASES[color]
    except KeyError:
        raise ValueError(f"unknown color {color!r}") from None


def tables(geom: BoxGeometry, color: str):
    """(nbr, eid, want) for walking the open primal or the closed dual graph."""
    if _color(color) == OPEN:
        nbr, eid = geom.adjacency
        return nbr, eid, 1
    nbr, eid = geom.dual_adjacency
    return nbr, eid, 0


def allowed_mask(geom: BoxGeometry, color: str, mask) -> np.ndarray:
    """Boolean site mask from a RegionMask, a boolean array, or None (everything)."""
    size = geom.num_vertices if _color(color) == OPEN else geom.num_dual_vertices
    if mask is None:
        return np.ones(size, dtype=bool)
    if isinstance(mask, RegionMask):
        m = mask.vertex_mask(geom) if _color(color) == OPEN else mask.dual_mask(geom)
    else:
        m = np.asarray(mask, dtype=bool)
        if m.shape != (size,):
            raise ValueError(f"site mask has shape {m.shape}, expected ({size},)")
    return np.ascontiguousarray(m)


# ---------------------------------------------------------------------------
# components


@dataclass(frozen=True, eq=False)
class ComponentLabels:
    labels: np.ndarray
    color: str
    geometry: BoxGeometry

    def same(self, a: int, b: int) -> bool:
        la, lb = self.labels[a], self.labels[b]
        return bool(la >= 0 and la == lb)

    @property
    def num_components(self) -> int:
        return int(np.unique(self.labels[self.labels >= 0]).size)

    def sizes(self) -> dict[int, int]:
        ids, counts = np.unique(self.labels[self.labels >= 0], return_counts=True)
        return dict(zip(ids.tolist(), counts.tolist()))


def components(config: Config, color: str = OPEN, mask=None) -> ComponentLabels:
    geom = config.geometry
    allowed = allowed_mask(geom, color, mask)
    if not allowed.any():
        raise ValueError("empty mask")
    nbr, eid, want = tables(geom, color)
    labels = K.union_find_labels(nbr, eid, config.states, want, allowed)
    return ComponentLabels(labels, _color(color), geom)


def connected(config: Config, sources, targets, color: str = OPEN, mask=None) -> bool:
    """Is some site of ``sources`` joined to some site of ``targets`` inside ``mask``?"""
    geom = config.geometry
    allowed = allowed_mask(geom, color, mask)
    nbr, eid, want = tables(geom, color)
    src = np.asarray(list(sources), dtype=np.int64)
    dist, _ = K.bfs(nbr, eid, config.states, want, allowed, src)
    tg = np.asarray(list(targets), dtype=np.int64)
    return bool(tg.size and (dist[tg] >= 0).any())


# ---------------------------------------------------------------------------
# disjoint paths


def _target_sites(geom: BoxGeometry, target, color: str) -> np.ndarray:
    if isinstance(target, RegionMask):
        return np.flatnonzero(allowed_mask(geom, color, target))
    arr = np.asarray(target)
    if arr.dtype == bool:
        return np.flatnonzero(arr)
    if arr.ndim == 2:
        if _color(color) == OPEN:
            return np.array([geom.vid(int(x), int(y)) for x, y in arr], dtype=np.int64)
        return np.array([geom.did(int(math.floor(x)), int(math.floor(y))) for x, y in arr],
                        dtype=np.int64)
    return arr.astype(np.int64).ravel()


def disjoint_paths(config: Config, sources, targets, color: str = OPEN, mask=None,
                   target_caps=None, return_paths: bool = False):
    """Vertex-disjoint paths from ``sources`` (one per source) into target sets.

    ``targets`` is a list of site sets; by default each takes one path.  A
    site may belong to one target set only.  Returns the flow value, and the
    per-source site sequences when ``return_paths`` is set.
    """
    geom = config.geometry
    allowed = allowed_mask(geom, color, mask)
    nbr, eid, want = tables(geom, color)
    tid = np.full(allowed.shape[0], -1, dtype=np.int64)
    for k, t in enumerate(targets):
        sites = _target_sites(geom, t, color)
        if sites.size and not allowed[sites].any():
            raise ValueError(f"target {k} lies entirely outside the mask")
        sites = sites[allowed[sites]]
        if (tid[sites] >= 0).any():
            raise ValueError("target sets overlap")
        tid[sites] = k
    caps = np.ones(len(targets), dtype=np.int64) if target_caps is None else \
        np.asarray(target_caps, dtype=np.int64)
    src = np.asarray(sources, dtype=np.int64)
    flow, raw = K.disjoint_paths(nbr, eid, config.states, want, allowed, src, tid, caps,
                                 src.shape[0])
    if not return_paths:
        return int(flow)
    paths = [row[row >= 0].tolist() for row in raw]
    return int(flow), paths, tid


def disjoint_open_paths(config: Config, source: int, targets, mask=None) -> bool:
    """Do the endpoints of edge ``source`` reach the two targets by vertex-disjoint open paths?

    One path per target; either endpoint may serve either target (the two
    paths together with ``source`` form a crossing in both cases).  A path
    ends at its first target vertex, of either set, as a crossing does.
    ``source`` itself must be open.
    """
    geom = config.geometry
    if len(targets) != 2:
        raise ValueError("exactly two targets expected")
    if not config.is_open(source):
        return False
    a, b = geom.edge_endpoints[source]
    allowed = allowed_mask(geom, OPEN, mask)
    if not (allowed[a] and allowed[b]):
        return False
    return disjoint_paths(config, [a, b], targets, OPEN, allowed) == 2


# ---------------------------------------------------------------------------
# defected circuits


@dataclass(frozen=True)
class DefectedCircuit:
    circuit: LatticePath
    defects: tuple[int, ...]
    kind: str

    def validate(self, config: Config, hole: float | None = None) -> None:
        c = self.circuit
        c.check(config.geometry)
        if not c.is_closed or not c.is_self_avoiding:
            raise AssertionError("circuit must be a simple closed path")
        want = 0 if self.kind == CLOSED_DUAL else 1
        wrong = tuple(e for e in c.edges if config.states[e] != want)
        if sorted(wrong) != sorted(self.defects):
            raise AssertionError("defect list does not match the circuit's wrong-colour edges")
        if abs(winding(c)) != 1:
            raise AssertionError("circuit does not wind once around the origin")

    @property
    def count(self) -> int:
        return len(self.defects)


def _ray_sign(a, b) -> int:
    """Signed crossing of the ray {y = 1/4, x > 0} by the unit step a -> b."""
    (ax, ay), (bx, by) = a, b
    if ax != bx or ax <= 0:
        return 0
    lo, hi = min(ay, by), max(ay, by)
    if lo < 0.25 < hi:
        return 1 if by > ay else -1
    return 0


def winding(path: LatticePath) -> int:
    v = path.vertices
    return sum(_ray_sign(a, b) for a, b in zip(v[:-1], v[1:]))


def _circuit_graph(geom: BoxGeometry, inner: float, outer: float, kind: str):
    """Sites and tables of the annulus graph, plus per-step ray signs."""
    if not 0 <= inner < outer:
        raise ValueError(f"annulus needs 0 <= inner < outer, got ({inner}, {outer})")
    if outer > geom.n:
        raise ValueError(f"annulus({inner}, {outer}) is outside B({geom.n})")
    if kind == CLOSED_DUAL:
        nbr, eid = geom.dual_adjacency
        xs, ys = geom.dual_xy
        xs = xs + 0.5
        ys = ys + 0.5
    else:
        nbr, eid = geom.adjacency
        xs, ys = geom.vertex_xy
    norm = np.maximum(np.abs(xs), np.abs(ys))
    site = (norm <= outer) & ((norm > inner) if inner > 0 else True)
    # an edge between (x, y) and (x, y+1) with x > 0 and the ray in between
    sign = np.zeros(nbr.shape, dtype=np.int64)
    up = (xs > 0) & (ys < 0.25) & (ys + 1 > 0.25)
    sign[up, 1] = 1
    down = (xs > 0) & (ys > 0.25) & (ys - 1 < 0.25)
    sign[down, 3] = -1
    return nbr, eid, site, sign, xs, ys


def _defect_ok(geom, kind, defect_region):
    if defect_region is None:
        return None
    # defects are judged by their primal edge midpoint
    ends = geom.edge_endpoints
    xs, ys = geom.vertex_xy
    mx = (xs[ends[:, 0]] + xs[ends[:, 1]]) / 2
    my = (ys[ends[:, 0]] + ys[ends[:, 1]]) / 2
    return np.asarray(defect_region.contains(mx, my), dtype=bool)


def min_defect_circuit(config: Config, inner: float, outer: float, kind: str = CLOSED_DUAL,
                       defect_region: RegionMask | None = None, limit: int | None = None):
    """Fewest wrong-coloured edges on a circuit of ``kind`` around the annulus hole.

    Layered 0-1 BFS in the cyclic cover cut along the ray y = 1/4, x > 0.
    Returns (count, DefectedCircuit) or (math.inf, None) when no admissible
    circuit exists.  With ``limit`` the search stops early once every
    remaining circuit must exceed it; the count is then reported as limit + 1.
    """
    kind = CLOSED_DUAL if _color(kind) == CLOSED_DUAL else OPEN_PRIMAL
    geom = config.geometry
    nbr, eid, site, sign, xs, ys = _circuit_graph(geom, inner, outer, kind)
    want = 0 if kind == CLOSED_DUAL else 1
    ok_defect = _defect_ok(geom, kind, defect_region)
    states = config.states
    ray = np.flatnonzero(site & (sign[:, 1] == 1))
    ray = ray[site[nbr[ray, 1]]]
    depth = max(1, int(ray.size))
    L = 2 * depth + 1
    nsite = nbr.shape[0]

    best = math.inf
    best_walk = None
    for s in sorted(ray.tolist(), key=lambda v: (xs[v], ys[v])):
        cap = best - 1 if best_walk is not None else (math.inf if limit is None else limit)
        res = _layered_search(nbr, eid, states, want, site, sign, ok_defect, s, depth, L,
                              nsite, cap)
        if res is not None and res[0] < best:
            best, best_walk = res
            if best == 0:
                break
    if best_walk is None:
        if limit is not None:
            return limit + 1, None
        return math.inf, None
    cycle = _extract_cycle(best_walk, nbr, eid, sign, states, want)
    if kind == CLOSED_DUAL:
        path = dual_path(geom, cycle)
    else:
        path = primal_path(geom, cycle)
    if winding(path) < 0:
        path = LatticePath(path.vertices[::-1], path.edges[::-1], path.lattice)
    defects = tuple(e for e in path.edges if states[e] != want)
    if len(defects) != best:
        raise AssertionError("cycle extraction lost optimality")
    return int(best), DefectedCircuit(path, defects, kind)


def _layered_search(nbr, eid, states, want, site, sign, ok_defect, s, depth, L, nsite, cap):
    INF = np.iinfo(np.int64).max
    dist = np.full(nsite * L, INF, dtype=np.int64)
    parent = np.full(nsite * L, -1, dtype=np.int64)
    start = s * L + depth
    goal = s * L + depth + 1
    dist[start] = 0
    dq = deque([start])
    while dq:
        node = dq.popleft()
        u, layer = divmod(node, L)
        du = dist[node]
        if du > cap:
            break
        if node == goal:
            break
        for d in range(4):
            v = nbr[u, d]
            if v < 0 or not site[v]:
                continue
            e = eid[u, d]
            w = 0 if states[e] == want else 1
            if w and ok_defect is not None and not ok_defect[e]:
                continue
            nl = layer + sign[u, d]
            if nl < 0 or nl >= L:
                continue
            m = v * L + nl
            nd = du + w
            if nd < dist[m]:
                dist[m] = nd
                parent[m] = node
                if w:
                    dq.append(m)
                else:
                    dq.appendleft(m)
    if dist[goal] == INF or dist[goal] > cap:
        return None
    walk = []
    node = goal
    while node != -1:
        walk.append(node // L)
        node = parent[node]
    walk.reverse()
    return int(dist[goal]), walk


def _extract_cycle(walk, nbr, eid, sign, states, want):
    """Split a closed walk into simple cycles and return one with net crossing +-1."""
    def step_sign(u, v):
        for d in range(4):
            if nbr[u, d] == v:
                return sign[u, d], eid[u, d]
        raise AssertionError("walk is not a lattice walk")

    best = None
    stack: list[int] = []
    pos: dict[int, int] = {}
    for v in walk:
        if v in pos:
            i = pos[v]
            loop = stack[i:] + [v]
            net = 0
            cost = 0
            for a, b in zip(loop[:-1], loop[1:]):
                sg, e = step_sign(a, b)
                net += sg
                cost += states[e] != want
            if abs(net) == 1 and (best is None or cost < best[0]):
                best = (cost, loop)
            for w in stack[i + 1:]:
                del pos[w]
            stack = stack[:i + 1]
        else:
            pos[v] = len(stack)
            stack.append(v)
    if best is None:
        raise AssertionError("closed walk has no winding simple cycle")
    return best[1]


def min_defects_by_flow(config: Config, inner: float, outer: float, kind: str = CLOSED_DUAL,
                        defect_region: RegionMask | None = None, cap: int = 8) -> int:
    """Same minimum as :func:`min_defect_circuit` via planar duality, capped at ``cap + 1``.

    A circuit of one colour around the hole with k defects exists iff there
    are at most k edge-disjoint crossings of the opposite colour between the
    hole and the outside, counted through the wrong-coloured edges.
    """
    kind = CLOSED_DUAL if _color(kind) == CLOSED_DUAL else OPEN_PRIMAL
    geom = config.geometry
    nbr, eid, site, sign, xs, ys = _circuit_graph(geom, inner, outer, kind)
    want = 0 if kind == CLOSED_DUAL else 1
    ok_defect = _defect_ok(geom, kind, defect_region)
    states = config.states
    # every annulus edge separates two cells of the opposite lattice; cells are
    # sorted into hole side (s), outside (t) or interior
    e_list = []
    for d in (0, 1):
        m = site & (nbr[:, d] >= 0)
        m[m] &= site[nbr[m, d]]
        e_list.append(eid[m, d])
    e_all = np.concatenate(e_list)
    wrong = states[e_all] != want
    e_all = e_all[wrong]
    if e_all.size == 0:
        return 0
    cellA, cellB = _cells_of(geom, kind, e_all)
    cx, cy = cellA
    dx, dy = cellB
    node_a = _cell_node(geom, kind, cx, cy, site, inner)
    node_b = _cell_node(geom, kind, dx, dy, site, inner)
    capv = np.ones(e_all.size, dtype=np.int64)
    if ok_defect is not None:
        capv[~ok_defect[e_all]] = cap + 2
    keep = node_a != node_b
    big = geom.num_vertices + geom.num_dual_vertices
    na = np.where(node_a[keep] < 0, big + (-node_a[keep] - 1), node_a[keep])
    nb = np.where(node_b[keep] < 0, big + (-node_b[keep] - 1), node_b[keep])
    flow = K.edge_flow(big + 2, na.astype(np.int64), nb.astype(np.int64),
                       capv[keep], big, big + 1, cap + 1)
    return int(flow)


def _cells_of(geom, kind, edges):
    """Centres of the two opposite-lattice cells separated by each primal edge."""
    xs, ys = geom.vertex_xy
    ends = geom.edge_endpoints[edges]
    ax, ay = xs[ends[:, 0]].astype(float), ys[ends[:, 0]].astype(float)
    horiz = ys[ends[:, 0]] == ys[ends[:, 1]]
    if kind == CLOSED_DUAL:
        # a closed-dual circuit edge crosses e; its sides are e's endpoints
        return (ax, ay), (xs[ends[:, 1]].astype(float), ys[ends[:, 1]].astype(float))
    # an open-primal circuit edge e separates the faces on either side
    c1x = np.where(horiz, ax + 0.5, ax - 0.5)
    c1y = np.where(horiz, ay - 0.5, ay + 0.5)
    c2x = ax + 0.5
    c2y = ay + 0.5
    return (c1x, c1y), (c2x, c2y)


def _cell_node(geom, kind, cx, cy, site, inner):
    """Graph node per cell: its own index if all four corners are annulus sites,
    -1 (source) if a corner lies in the hole, -2 (sink) otherwise."""
    n = geom.n
    all_in = np.ones(cx.size, dtype=bool)
    hole = np.zeros(cx.size, dtype=bool)
    for sx in (-0.5, 0.5):
        for sy in (-0.5, 0.5):
            qx, qy = cx + sx, cy + sy
            norm = np.maximum(np.abs(qx), np.abs(qy))
            if kind == CLOSED_DUAL:
                inb = np.ones(cx.size, dtype=bool)
                idx = (np.floor(qy).astype(np.int64) + n + 1) * geom.dual_side + \
                    np.floor(qx).astype(np.int64) + n + 1
            else:
                inb = norm <= n
                idx = (np.rint(qy).astype(np.int64) + n) * geom.side + np.rint(qx).astype(np.int64) + n
            ok = np.zeros(cx.size, dtype=bool)
            ok[inb] = site[idx[inb]]
            all_in &= ok
            if inner > 0:
                hole |= ~ok & (norm <= inner)
    if inner == 0:
        # no hole: the cut ray's base point decides (origin vertex, or the face (1/2, 1/2))
        centre = 0.0 if kind == CLOSED_DUAL else 0.5
        hole |= (cx == centre) & (cy == centre)
    if kind == CLOSED_DUAL:
        own = (np.rint(cy).astype(np.int64) + n) * geom.side + np.rint(cx).astype(np.int64) + n
    else:
        own = geom.num_vertices + (np.floor(cy).astype(np.int64) + n + 1) * geom.dual_side + \
            np.floor(cx).astype(np.int64) + n + 1
    return np.where(hole, -1, np.where(all_in, own, -2))
