"""Horizontal crossings of B(n): existence, the lowest crossing l_n, the shortest one.

The lowest crossing is traced by a right-hand wall walk from the bottom-left
corner with the left column treated as wired; the stretch after the last
left-column visit, loop-erased, is l_n.  The independent three-arm test
(open edge, disjoint open arms to both sides, closed dual arm to the bottom)
characterises the same edge set and is what the tests compare against.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .connectivity import allowed_mask
from .lattice import BoxGeometry, Config, RegionMask, reflect_x
from .lattice import rect as mk_rect
from .paths import LatticePath, primal_path

__all__ = [
    "LatticePath", "CrossingRecord", "NoCrossing", "has_horizontal_crossing",
    "lowest_crossing", "lowest_crossing_mirrored", "shortest_crossing",
    "three_arm_characterization", "three_arm_edges", "count_three_arm_edges",
    "has_dual_vertical_crossing", "crossing_record",
]


class NoCrossing(ValueError):
    """Raised when a crossing is requested from a configuration without H_n."""


def _left_bfs(config: Config):
    g = config.geometry
    nbr, eid = g.adjacency
    allowed = np.ones(g.num_vertices, dtype=bool)
    return K.bfs(nbr, eid, config.states, 1, allowed, g.side_vertices("left"))


def has_horizontal_crossing(config: Config) -> bool:
    dist, _ = _left_bfs(config)
    return bool((dist[config.geometry.side_vertices("right")] >= 0).any())


def has_dual_vertical_crossing(config: Config) -> bool:
    """Closed dual path from below the bottom side to above the top side."""
    g = config.geometry
    dnbr, deid = g.dual_adjacency
    allowed = np.ones(g.num_dual_vertices, dtype=bool)
    dist, _ = K.bfs(dnbr, deid, config.states, 0, allowed, g.dual_side_vertices("bottom"))
    return bool((dist[g.dual_side_vertices("top")] >= 0).any())


def lowest_crossing(config: Config) -> LatticePath:
    g = config.geometry
    if not has_horizontal_crossing(config):
        raise NoCrossing("lowest_crossing needs a horizontal open crossing")
    nbr, eid = g.adjacency
    xs, _ = g.vertex_xy
    walk = K.lowest_walk(nbr, eid, config.states, xs, g.n)
    if walk.size == 0:
        raise AssertionError("wall walk failed despite a crossing")
    left = np.flatnonzero(xs[walk] == -g.n)
    walk = walk[left[-1]:]
    return primal_path(g, K.loop_erase(walk, g.num_vertices).tolist())


def lowest_crossing_mirrored(config: Config) -> LatticePath:
    """l_n traced from the right-hand corner instead (via the x-mirror), mapped back."""
    m = lowest_crossing(reflect_x(config))
    g = config.geometry
    verts = [(-x, y) for x, y in m.vertices[::-1]]
    return primal_path(g, [g.vid(x, y) for x, y in verts])


def shortest_crossing(config: Config) -> LatticePath:
    g = config.geometry
    dist, parent = _left_bfs(config)
    right = g.side_vertices("right")
    d = dist[right]
    if not (d >= 0).any():
        raise NoCrossing("shortest_crossing needs a horizontal open crossing")
    best = int(d[d >= 0].min())
    end = int(right[np.flatnonzero(d == best)[0]])
    seq = [end]
    while parent[seq[-1]] >= 0:
        seq.append(int(parent[seq[-1]]))
    return primal_path(g, seq[::-1])


# ---------------------------------------------------------------------------
# three-arm characterisation


def _box_targets(g: BoxGeometry) -> np.ndarray:
    tid = np.full(g.num_vertices, -1, dtype=np.int64)
    tid[g.side_vertices("left")] = 0
    tid[g.side_vertices("right")] = 1
    return tid


def _bottom_reach(config: Config, dual_allowed=None, states=None, sources=None) -> np.ndarray:
    g = config.geometry
    dnbr, deid = g.dual_adjacency
    if dual_allowed is None:
        dual_allowed = np.ones(g.num_dual_vertices, dtype=bool)
    st = config.states if states is None else states
    src = g.dual_side_vertices("bottom") if sources is None else sources
    dist, _ = K.bfs(dnbr, deid, st, 0, dual_allowed, src)
    return dist >= 0


def three_arm_edges(config: Config) -> np.ndarray:
    """Boolean flag per edge of the three-arm characterisation on the whole box."""
    g = config.geometry
    nbr, eid = g.adjacency
    reach = _bottom_reach(config)
    allowed = np.ones(g.num_vertices, dtype=bool)
    cand = np.flatnonzero(config.states == 1)
    return K.three_arm_flags(nbr, eid, config.states, allowed, _box_targets(g),
                             g.edge_endpoints, reach, g.edge_dual_ends, cand)


def three_arm_characterization(config: Config, e: int) -> bool:
    g = config.geometry
    g.decode(e)  # range check
    nbr, eid = g.adjacency
    reach = _bottom_reach(config)
    allowed = np.ones(g.num_vertices, dtype=bool)
    flags = K.three_arm_flags(nbr, eid, config.states, allowed, _box_targets(g),
                              g.edge_endpoints, reach, g.edge_dual_ends,
                              np.array([e], dtype=np.int64))
    return bool(flags[e])


def count_three_arm_edges(config: Config, rect: RegionMask, left=None, right=None,
                          bottom=None, return_flags: bool = False):
    """Number of open edges in ``rect`` with the three arms realised inside ``rect``.

    ``left``/``right`` are primal target regions (default: the rectangle's
    vertical sides), ``bottom`` a region of dual sites (default: the row of
    faces just below the rectangle).  Dual arms may only cross edges of the
    rectangle.
    """
    g = config.geometry
    x0, x1, y0, y1 = rect.bounds()
    if x0 < -g.n or x1 > g.n or y0 < -g.n or y1 > g.n:
        raise ValueError("rectangle leaves the box")
    vmask = allowed_mask(g, "open", rect)
    emask = vmask[g.edge_endpoints[:, 0]] & vmask[g.edge_endpoints[:, 1]]
    if left is None:
        left = mk_rect(x0, x0, y0, y1)
    if right is None:
        right = mk_rect(x1, x1, y0, y1)
    if bottom is None:
        bottom = mk_rect(x0, x1, y0 - 0.5, y0 - 0.5)
    tid = np.full(g.num_vertices, -1, dtype=np.int64)
    for k, t in enumerate((left, right)):
        sites = np.flatnonzero(allowed_mask(g, "open", t) & vmask)
        if sites.size == 0:
            raise ValueError(f"target {k} does not meet the rectangle")
        if (tid[sites] >= 0).any():
            raise ValueError("left and right targets overlap")
        tid[sites] = k
    dsites = np.flatnonzero(allowed_mask(g, "closed", bottom))
    if dsites.size == 0:
        raise ValueError("bottom target is empty")
    # dual sites: faces inside the rectangle's half-expansion; crossed edges must lie in rect
    dx, dy = g.dual_xy
    dmask = (dx + 0.5 >= x0 - 0.5) & (dx + 0.5 <= x1 + 0.5) & (dy + 0.5 >= y0 - 0.5) & \
        (dy + 0.5 <= y1 + 0.5)
    dmask[dsites] = True
    st = config.states.copy()
    st[~emask] = 1  # edges outside rect cannot carry a closed dual step
    reach = _bottom_reach(config, dmask, st, dsites)
    nbr, eid = g.adjacency
    cand = np.flatnonzero((config.states == 1) & emask)
    flags = K.three_arm_flags(nbr, eid, config.states, vmask, tid, g.edge_endpoints, reach,
                              g.edge_dual_ends, cand)
    if return_flags:
        return int(flags.sum()), flags
    return int(flags.sum())


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CrossingRecord:
    config: Config
    H_n: bool
    lowest: LatticePath | None
    shortest: LatticePath | None

    @property
    def L_n(self) -> int | None:
        return None if self.lowest is None else self.lowest.length

    @property
    def S_n(self) -> int | None:
        return None if self.shortest is None else self.shortest.length

    def check(self) -> None:
        n = self.config.n
        if self.H_n != (self.lowest is not None) or self.H_n != (self.shortest is not None):
            raise AssertionError("paths present iff H_n")
        if self.H_n and not (2 * n <= self.S_n <= self.L_n):
            raise AssertionError(f"order violated: 2n={2 * n}, S={self.S_n}, L={self.L_n}")


def crossing_record(config: Config) -> CrossingRecord:
    if not has_horizontal_crossing(config):
        return CrossingRecord(config, False, None, None)
    return CrossingRecord(config, True, lowest_crossing(config), shortest_crossing(config))
