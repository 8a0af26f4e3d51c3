"""Shortcuts around a host path, U-shaped regions and the arcs between five-arm points.

A shortcut over the host is an open path r = (w0, w0+e2, ..., wM+e2, wM)
running strictly above the host, closing a circuit with the detoured host
segment tau, shielded from above by a closed dual path between the faces
w0 + (-1/2, 1/2) and wM + (1/2, 1/2), and with #r / #tau bounded by kappa.
"""
from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels as K
from .arms import LandingSpec, ek_prime_regions
from .connectivity import disjoint_paths
from .lattice import MAX_N, BoxGeometry, Config, Rect, RegionMask, rect
from .paths import LatticePath, dual_path, primal_path

NORTH = 1


# ---------------------------------------------------------------------------
# U-shaped regions


@dataclass(frozen=True)
class URegion:
    k: int
    U: RegionMask
    U_tilde: RegionMask
    V_tilde: RegionMask
    B1: RegionMask
    B2: RegionMask

    @property
    def u(self) -> int:
        return 1 << self.k

    def boundary_distance(self, x, y):
        """l-infinity distance from points of U(k) to the boundary of U(k)."""
        u = Fraction(self.u)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        a = float(u * Fraction(7, 3))
        to_hole = np.maximum(np.abs(x) - a, np.abs(y) - a)
        return np.minimum.reduce([3 * float(u) - np.abs(x), 3 * float(u) - y,
                                  y + float(u / 3), to_hole])


def u_region(k: int) -> URegion:
    if k < 1:
        raise ValueError("U(k) needs k >= 1")
    if 3 * (1 << k) > MAX_N:
        raise OverflowError(f"U({k}) exceeds the supported index space")
    u = 1 << k
    a = u * 7 / 3
    U = RegionMask((Rect(-3 * u, 3 * u, -u / 3, 3 * u), Rect(-a, a, -a, a, include=False,
                                                             closed=False)))
    R = ek_prime_regions(k)
    return URegion(k, U, R["U"], R["V"], LandingSpec("star1", k).search_box,
                   LandingSpec("star2", k).search_box)


def _pinned(config: Config, z1, z2) -> np.ndarray:
    """States with every edge at the stars closed except their upward edges."""
    g = config.geometry
    st = config.states.copy()
    nbr, eid = g.adjacency
    for z in (z1, z2):
        v = g.vid(*z)
        for d in range(4):
            if d != NORTH and eid[v, d] >= 0:
                st[eid[v, d]] = 0
    return st


def outermost_arc(config: Config, region: URegion, star1, star2) -> LatticePath:
    """Open arc in U(k) from star1 up and over to star2, hugging the outer side."""
    g = config.geometry
    nbr, eid = g.adjacency
    st = _pinned(config, star1, star2)
    allowed = region.U.vertex_mask(g)
    walk = K.arc_walk(nbr, eid, st, allowed, g.vid(*star1), NORTH, g.vid(*star2), 1)
    if walk.size == 0:
        raise ValueError("no open arc between the five-arm points")
    return primal_path(g, K.loop_erase(walk, g.num_vertices).tolist())


def shortest_arc(config: Config, region: URegion, star1, star2) -> LatticePath:
    g = config.geometry
    nbr, eid = g.adjacency
    allowed = region.U.vertex_mask(g)
    dist, parent = K.bfs(nbr, eid, config.states, 1, allowed,
                         np.array([g.vid(*star1)], dtype=np.int64))
    t = g.vid(*star2)
    if dist[t] < 0:
        raise ValueError("five-arm points are not connected inside U(k)")
    seq = [t]
    while parent[seq[-1]] >= 0:
        seq.append(int(parent[seq[-1]]))
    return primal_path(g, seq[::-1])


def arc_edge_local(config: Config, region: URegion, star1, star2, e: int) -> bool:
    """Local three-arm test for membership of e in the outermost arc.

    e open; disjoint open arms inside U(k) from its endpoints to the two stars
    (entering them through their upward edges); a closed dual connection
    inside U(k) from a face of e to the face north-west of star1.
    """
    g = config.geometry
    st = _pinned(config, star1, star2)
    if st[e] != 1:
        return False
    pinned = config.with_states(st)
    vm = region.U.vertex_mask(g)
    a, b = g.edge_endpoints[e]
    if not (vm[a] and vm[b]):
        return False
    flow = disjoint_paths(pinned, [a, b], [[g.vid(*star1)], [g.vid(*star2)]], "open", vm)
    if flow < 2:
        return False
    dm = region.U.dual_mask(g)
    x, y = star1
    base = g.did(x - 1, y)
    dnbr, deid = g.dual_adjacency
    dist, _ = K.bfs(dnbr, deid, config.states, 0, dm, g.edge_dual_ends[e])
    return bool(dist[base] >= 0)


# ---------------------------------------------------------------------------
# region above a host path


@dataclass(frozen=True, eq=False)
class UpperRegion:
    vertices: np.ndarray  # bool per vertex, strictly above the host
    faces: np.ndarray  # bool per dual site, inside the box and above the host


def upper_region(geom: BoxGeometry, host: LatticePath) -> UpperRegion:
    """Complement of the closed region below and including a left-right crossing."""
    on = np.zeros(geom.num_vertices, dtype=bool)
    hv = [geom.vid(*v) for v in host.vertices]
    on[hv] = True
    nbr, eid = geom.adjacency
    ones = np.ones(geom.num_edges, dtype=np.uint8)
    top = geom.side_vertices("top")
    dist, _ = K.bfs(nbr, eid, ones, 1, ~on, top[~on[top]])
    verts = dist >= 0
    st = ones.copy()
    st[list(host.edges)] = 0
    dnbr, deid = geom.dual_adjacency
    dx, dy = geom.dual_xy
    n = geom.n
    inside = (dx >= -n) & (dx <= n - 1) & (dy >= -n) & (dy <= n - 1)
    seeds = geom.dual_side_vertices("top")
    allowed = inside.copy()
    allowed[seeds] = True
    dist, _ = K.bfs(dnbr, deid, st, 1, allowed, seeds)
    return UpperRegion(verts, (dist >= 0) & inside)


# ---------------------------------------------------------------------------
# shortcut records and search


@dataclass(frozen=True)
class ShortcutRecord:
    r: LatticePath
    w0: tuple[int, int]
    wM: tuple[int, int]
    tau: tuple[int, int]  # host vertex indices (i0, iM), i0 < iM
    shield: LatticePath
    scale: int
    gain: Fraction
    tau_vertices: tuple = ()

    @property
    def r_len(self) -> int:
        return self.r.length

    @property
    def tau_len(self) -> int:
        return self.tau[1] - self.tau[0]


def _admissible(geom: BoxGeometry, config: Config, host: LatticePath, upper: UpperRegion):
    """Host indices i where the host runs horizontally through w = host[i] and w -> w+e2
    is an open step into the upper region."""
    out = []
    V = host.vertices
    for i in range(1, len(V) - 1):
        (x, y) = V[i]
        if {V[i - 1], V[i + 1]} != {(x - 1, y), (x + 1, y)}:
            continue
        if y + 1 > geom.n:
            continue
        up = geom.vid(x, y + 1)
        if not upper.vertices[up]:
            continue
        if not config.is_open(geom.edge_between((x, y), (x, y + 1))):
            continue
        out.append(i)
    return out


def _shield(geom: BoxGeometry, config: Config, upper: UpperRegion, w0, wM):
    """Closed dual path from w0 + (-1/2, 1/2) to wM + (1/2, 1/2) through upper faces,
    with vertical first and last steps; None if absent."""
    (x0, y0), (xm, ym) = w0, wM
    if y0 + 1 > geom.n - 1 or ym + 1 > geom.n - 1:
        return None
    s0 = geom.did(x0 - 1, y0)
    s1 = geom.did(x0 - 1, y0 + 1)
    t0 = geom.did(xm, ym)
    t1 = geom.did(xm, ym + 1)
    f = upper.faces
    if not (f[s0] and f[s1] and f[t0] and f[t1]):
        return None
    if s0 == t0 or s1 == t1:
        return None
    st = config.states
    if st[geom.encode(x0 - 1, y0 + 1, 0)] != 0 or st[geom.encode(xm, ym + 1, 0)] != 0:
        return None
    allowed = f.copy()
    allowed[s0] = False
    allowed[t0] = False
    dnbr, deid = geom.dual_adjacency
    dist, parent = K.bfs(dnbr, deid, st, 0, allowed, np.array([s1], dtype=np.int64))
    if dist[t1] < 0:
        return None
    seq = [t1]
    while parent[seq[-1]] >= 0:
        seq.append(int(parent[seq[-1]]))
    return dual_path(geom, [s0] + seq[::-1] + [t0])


def scale_of(tau_vertices, epsilon: float) -> int:
    """Size class of a detour: smallest l >= 0 with diam(tau) <= 2^l / epsilon."""
    xs = [v[0] for v in tau_vertices]
    ys = [v[1] for v in tau_vertices]
    diam = max(max(xs) - min(xs), max(ys) - min(ys))
    W = 1.0 / epsilon
    if diam <= W:
        return 0
    return int(math.ceil(math.log2(diam / W) - 1e-12))


def _search(config: Config, host: LatticePath, kappa, upper: UpperRegion, box=None,
            e_index: int | None = None, scale: int | None = None, epsilon: float = 1 / 8):
    g = config.geometry
    nbr, eid = g.adjacency
    adm = _admissible(g, config, host, upper)
    allowed = upper.vertices.copy()
    if box is not None:
        allowed &= box
    V = host.vertices
    kappa = Fraction(kappa).limit_denominator(10 ** 6)
    out = []
    for a_pos, i0 in enumerate(adm):
        if e_index is not None and i0 > e_index:
            break
        w0 = V[i0]
        src = g.vid(w0[0], w0[1] + 1)
        if not allowed[src]:
            continue
        dist, parent = K.bfs(nbr, eid, config.states, 1, allowed, np.array([src], dtype=np.int64))
        for iM in adm[a_pos + 1:]:
            if e_index is not None and iM < e_index + 1:
                continue
            wM = V[iM]
            t = g.vid(wM[0], wM[1] + 1)
            if dist[t] < 0:
                continue
            r_len = int(dist[t]) + 2
            tau_len = iM - i0
            gain = Fraction(r_len, tau_len)
            if gain > kappa:
                continue
            shield = _shield(g, config, upper, w0, wM)
            if shield is None:
                continue
            seq = [t]
            while parent[seq[-1]] >= 0:
                seq.append(int(parent[seq[-1]]))
            r = primal_path(g, [g.vid(*w0)] + seq[::-1] + [g.vid(*wM)])
            sc = scale if scale is not None else scale_of(V[i0:iM + 1], epsilon)
            out.append(ShortcutRecord(r, tuple(w0), tuple(wM), (i0, iM), shield, sc, gain,
                                      tuple(V[i0:iM + 1])))
    return out


def find_shortcuts(config: Config, host: LatticePath, e: int, kappa, scale: int,
                   upper: UpperRegion | None = None) -> list[ShortcutRecord]:
    """kappa-shortcuts whose detour contains host edge e and whose r fits in the
    box of side 3 * 2^scale centred at e."""
    g = config.geometry
    try:
        j = host.edges.index(e)
    except ValueError:
        raise ValueError(f"edge {e} is not on the host path") from None
    if upper is None:
        upper = upper_region(g, host)
    (ax, ay), (bx, by) = g.endpoints(e)
    cx, cy = (ax + bx) / 2, (ay + by) / 2
    h = 1.5 * (1 << scale)
    box = rect(cx - h, cx + h, cy - h, cy + h).vertex_mask(g)
    return _search(config, host, kappa, upper, box, j, scale)


def find_all_shortcuts(config: Config, host: LatticePath, kappa, epsilon: float = 1 / 8,
                       upper: UpperRegion | None = None) -> dict[int, list[ShortcutRecord]]:
    """Every admissible endpoint pair with its shortest r, grouped by size class."""
    if upper is None:
        upper = upper_region(config.geometry, host)
    fam: dict[int, list[ShortcutRecord]] = {}
    for rec in _search(config, host, kappa, upper, epsilon=epsilon):
        fam.setdefault(rec.scale, []).append(rec)
    return fam


# ---------------------------------------------------------------------------
# independent revalidation


def _above_by_parity(host: LatticePath, x: float, y: float) -> bool:
    """Is the point strictly above the host crossing?  Counts host edges met by
    the downward vertical ray from (x + 1/4, y) (or x - 1/4 on the right side)."""
    xr = x + 0.25
    if any(v == (x, y) for v in host.vertices):
        return False
    cnt = 0
    for (a, b) in zip(host.vertices[:-1], host.vertices[1:]):
        if a[1] != b[1]:
            continue
        lo, hi = min(a[0], b[0]), max(a[0], b[0])
        if lo < xr < hi and a[1] < y:
            cnt += 1
    return cnt % 2 == 1


def revalidate(record: ShortcutRecord, config: Config, host: LatticePath, kappa,
               e: int | None = None) -> dict[str, bool]:
    """Conditions 1-5 checked from scratch; keys 'c1'..'c5'."""
    g = config.geometry
    r = record.r
    V = host.vertices
    i0, iM = record.tau
    res = {}
    try:
        r.check(g)
        record.shield.check(g)
        well_formed = True
    except ValueError:
        well_formed = False
    inner = r.vertices[1:-1]
    n = g.n
    xr = lambda v: v[0] if v[0] < n else v[0] - 0.5  # noqa: E731
    res["c1"] = well_formed and all(_above_by_parity(host, xr(v), v[1]) for v in inner)
    w0, wM = r.vertices[0], r.vertices[-1]
    hedges = set(host.edges)

    def hedge(a, b):
        try:
            return g.edge_between(a, b) in hedges
        except ValueError:
            return False

    res["c2"] = (len(r.vertices) >= 3 and w0 == record.w0 and wM == record.wM
                 and r.vertices[1] == (w0[0], w0[1] + 1) and r.vertices[-2] == (wM[0], wM[1] + 1)
                 and all(hedge(p, (p[0] + 1, p[1])) and hedge((p[0] - 1, p[1]), p)
                         for p in (w0, wM)))
    tau = V[i0:iM + 1]
    tau_edges = host.edges[i0:iM]
    c3 = tau[0] == w0 and tau[-1] == wM and r.is_open(config.states) and \
        all(config.states[x] == 1 for x in tau_edges) and r.is_self_avoiding and \
        not (set(inner) & set(tau))
    if e is not None:
        c3 = c3 and e in tau_edges
    res["c3"] = bool(c3)
    c = record.shield
    cv = c.vertices
    s0 = (w0[0] - 0.5, w0[1] + 0.5)
    t0 = (wM[0] + 0.5, wM[1] + 0.5)
    inside_box = all(abs(x) < n and abs(y) < n for x, y in cv)
    res["c4"] = bool(well_formed and cv[0] == s0 and cv[-1] == t0 and c.is_self_avoiding
                     and c.is_closed_dual(config.states)
                     and cv[1] == (s0[0], s0[1] + 1) and cv[-2] == (t0[0], t0[1] + 1)
                     and inside_box and all(_above_by_parity(host, x, y) for x, y in cv))
    kap = Fraction(kappa).limit_denominator(10 ** 6)
    res["c5"] = Fraction(r.length, len(tau_edges)) <= kap and record.gain == Fraction(
        r.length, len(tau_edges))
    return res


# ---------------------------------------------------------------------------
# nesting


def enclosed_faces(record: ShortcutRecord) -> frozenset:
    """Faces (as doubled integer coordinates) inside the circuit r + tau."""
    loop = list(record.r.vertices) + list(record.tau_vertices[::-1][1:])
    cols: dict[int, list[int]] = {}
    for a, b in zip(loop[:-1], loop[1:]):
        if a[1] == b[1]:
            cols.setdefault(min(a[0], b[0]), []).append(a[1])
    out = set()
    for x, ys in cols.items():
        ys.sort()
        # between consecutive crossings alternately inside / outside
        for lo, hi in zip(ys[0::2], ys[1::2]):
            for y in range(lo, hi):
                out.add((2 * x + 1, 2 * y + 1))
    return frozenset(out)


def verify_nested_or_disjoint(records) -> bool:
    regions = [enclosed_faces(r) for r in records]
    for a, b in itertools.combinations(regions, 2):
        if a & b and not (a <= b or b <= a):
            return False
    return True


# ---------------------------------------------------------------------------
# selection and the improved path


@dataclass
class SelectionPlan:
    host: LatticePath
    chosen: list[ShortcutRecord] = field(default_factory=list)
    log: list[tuple[int, int, int, int]] = field(default_factory=list)  # scale, candidates, picked, weight

    @property
    def detoured_length(self) -> int:
        return sum(r.tau_len for r in self.chosen)


def _check_host(rec: ShortcutRecord, host: LatticePath) -> None:
    i0, iM = rec.tau
    if not (0 <= i0 < iM < len(host.vertices)) or host.vertices[i0] != rec.w0 or \
            host.vertices[iM] != rec.wM or \
            (rec.tau_vertices and tuple(host.vertices[i0:iM + 1]) != rec.tau_vertices):
        raise ValueError("shortcut record does not refer to this host path")


def weighted_interval_scheduling(recs: list[ShortcutRecord]) -> list[ShortcutRecord]:
    """Maximum total #tau over records with pairwise disjoint closed vertex intervals."""
    if not recs:
        return []
    recs = sorted(recs, key=lambda r: (r.tau[1], r.tau[0]))
    ends = [r.tau[1] for r in recs]
    best = [0] * (len(recs) + 1)
    take = [False] * len(recs)
    prev = [0] * len(recs)
    for i, r in enumerate(recs):
        p = bisect.bisect_left(ends, r.tau[0], 0, i)  # records ending strictly before i0
        prev[i] = p
        with_r = best[p] + r.tau_len
        if with_r > best[i]:
            best[i + 1] = with_r
            take[i] = True
        else:
            best[i + 1] = best[i]
    out = []
    i = len(recs) - 1
    while i >= 0:
        if take[i]:
            out.append(recs[i])
            i = prev[i] - 1
        else:
            i -= 1
    return out[::-1]


def select_maximal(families, host: LatticePath) -> SelectionPlan:
    """Pick shortcuts scale by scale, largest first, each pass an exact interval DP
    over candidates disjoint from everything already chosen."""
    items = families.items() if isinstance(families, dict) else families
    items = sorted(((int(k), list(v)) for k, v in items), key=lambda kv: -kv[0])
    plan = SelectionPlan(host)
    for scale, recs in items:
        for r in recs:
            _check_host(r, host)
        free = [r for r in recs if all(r.tau[1] < c.tau[0] or r.tau[0] > c.tau[1]
                                       for c in plan.chosen)]
        picked = weighted_interval_scheduling(free)
        plan.chosen.extend(picked)
        plan.log.append((scale, len(free), len(picked), sum(p.tau_len for p in picked)))
    plan.chosen.sort(key=lambda r: r.tau[0])
    return plan


def build_sigma(host: LatticePath, plan: SelectionPlan) -> LatticePath:
    """Host with each chosen detour tau replaced by its shortcut r."""
    if plan.host is not host and plan.host.vertices != host.vertices:
        raise ValueError("plan was built for a different host")
    chosen = sorted(plan.chosen, key=lambda r: r.tau[0])
    for a, b in zip(chosen[:-1], chosen[1:]):
        if a.tau[1] >= b.tau[0]:
            raise ValueError("plan intervals overlap")
    verts: list = []
    edges: list = []
    pos = 0
    for rec in chosen:
        _check_host(rec, host)
        i0, iM = rec.tau
        verts.extend(host.vertices[pos:i0])
        edges.extend(host.edges[pos:i0])
        verts.extend(rec.r.vertices[:-1])
        edges.extend(rec.r.edges)
        pos = iM
    verts.extend(host.vertices[pos:])
    edges.extend(host.edges[pos:])
    sigma = LatticePath(tuple(verts), tuple(edges), "primal")
    want = host.length - sum(r.tau_len for r in chosen) + sum(r.r_len for r in chosen)
    if sigma.length != want:
        raise AssertionError("length identity violated")
    return sigma
