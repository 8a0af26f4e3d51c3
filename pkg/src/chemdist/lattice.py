"""Box geometry, edge indexing, dual lattice and configuration sampling.

Vertices of B(n) are the integer points of [-n, n]^2.  Edges are indexed by
their lower-left endpoint, row-major, with every horizontal edge before every
vertical edge:

    horizontal {(x, y), (x+1, y)}:  (y + n) * 2n + (x + n)
    vertical   {(x, y), (x, y+1)}:  H + (y + n) * (2n + 1) + (x + n)

where H = 2n(2n+1).  Dual vertices (x + 1/2, y + 1/2) are stored by their
integer part (x, y) with x, y in [-n-1, n]; only dual edges that cross an
edge of the box exist.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

HORIZONTAL = 0
VERTICAL = 1

# direction codes shared with the kernels: east, north, west, south
DX = (1, 0, -1, 0)
DY = (0, 1, 0, -1)

MAX_N = 1 << 14


@dataclass(frozen=True)
class BoxGeometry:
    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"box half-side must be a positive integer, got {self.n!r}")
        if self.n > MAX_N:
            raise OverflowError(f"n={self.n} exceeds the supported index space")

    @property
    def side(self) -> int:
        return 2 * self.n + 1

    @property
    def num_vertices(self) -> int:
        return self.side ** 2

    @property
    def num_horizontal(self) -> int:
        return 2 * self.n * self.side

    @property
    def num_edges(self) -> int:
        return 4 * self.n * self.side

    @property
    def dual_side(self) -> int:
        return 2 * self.n + 2

    @property
    def num_dual_vertices(self) -> int:
        return self.dual_side ** 2

    # -- vertices -------------------------------------------------------
    def vid(self, x: int, y: int) -> int:
        n = self.n
        if not (-n <= x <= n and -n <= y <= n):
            raise ValueError(f"vertex {(x, y)} outside B({n})")
        return (y + n) * self.side + (x + n)

    def vertex(self, v: int) -> tuple[int, int]:
        y, x = divmod(int(v), self.side)
        return x - self.n, y - self.n

    @cached_property
    def vertex_xy(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.arange(self.num_vertices)
        y, x = np.divmod(idx, self.side)
        return x - self.n, y - self.n

    # -- edges ----------------------------------------------------------
    def encode(self, x: int, y: int, orientation: int) -> int:
        """Edge index from its lower-left endpoint and orientation."""
        n = self.n
        if orientation == HORIZONTAL:
            if not (-n <= x < n and -n <= y <= n):
                raise ValueError(f"no horizontal edge at {(x, y)} in B({n})")
            return (y + n) * (2 * n) + (x + n)
        if orientation == VERTICAL:
            if not (-n <= x <= n and -n <= y < n):
                raise ValueError(f"no vertical edge at {(x, y)} in B({n})")
            return self.num_horizontal + (y + n) * self.side + (x + n)
        raise ValueError(f"bad orientation {orientation!r}")

    def decode(self, e: int) -> tuple[int, int, int]:
        e = int(e)
        if not 0 <= e < self.num_edges:
            raise IndexError(f"edge index {e} out of range for B({self.n})")
        n = self.n
        if e < self.num_horizontal:
            y, x = divmod(e, 2 * n)
            return x - n, y - n, HORIZONTAL
        y, x = divmod(e - self.num_horizontal, self.side)
        return x - n, y - n, VERTICAL

    def endpoints(self, e: int) -> tuple[tuple[int, int], tuple[int, int]]:
        x, y, o = self.decode(e)
        return (x, y), ((x + 1, y) if o == HORIZONTAL else (x, y + 1))

    def edge_between(self, a: tuple[int, int], b: tuple[int, int]) -> int:
        (ax, ay), (bx, by) = a, b
        if abs(ax - bx) + abs(ay - by) != 1:
            raise ValueError(f"{a} and {b} are not nearest neighbours")
        if ay == by:
            return self.encode(min(ax, bx), ay, HORIZONTAL)
        return self.encode(ax, min(ay, by), VERTICAL)

    @cached_property
    def edge_endpoints(self) -> np.ndarray:
        """(E, 2) array of vertex ids."""
        n, s = self.n, self.side
        H = self.num_horizontal
        out = np.empty((self.num_edges, 2), dtype=np.int64)
        hy, hx = np.divmod(np.arange(H), 2 * n)
        out[:H, 0] = hy * s + hx
        out[:H, 1] = hy * s + hx + 1
        vy, vx = np.divmod(np.arange(self.num_edges - H), s)
        out[H:, 0] = vy * s + vx
        out[H:, 1] = (vy + 1) * s + vx
        return out

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """Primal neighbour table: (nbr, eid), both (V, 4) in E, N, W, S order; -1 if absent."""
        n, s = self.n, self.side
        xs, ys = self.vertex_xy
        nbr = np.full((self.num_vertices, 4), -1, dtype=np.int64)
        eid = np.full((self.num_vertices, 4), -1, dtype=np.int64)
        H = self.num_horizontal
        v = np.arange(self.num_vertices)
        m = xs < n
        nbr[m, 0] = v[m] + 1
        eid[m, 0] = (ys[m] + n) * (2 * n) + (xs[m] + n)
        m = xs > -n
        nbr[m, 2] = v[m] - 1
        eid[m, 2] = (ys[m] + n) * (2 * n) + (xs[m] - 1 + n)
        m = ys < n
        nbr[m, 1] = v[m] + s
        eid[m, 1] = H + (ys[m] + n) * s + (xs[m] + n)
        m = ys > -n
        nbr[m, 3] = v[m] - s
        eid[m, 3] = H + (ys[m] - 1 + n) * s + (xs[m] + n)
        return nbr, eid

    # -- dual -----------------------------------------------------------
    def did(self, x: int, y: int) -> int:
        """Index of the dual vertex (x + 1/2, y + 1/2)."""
        n = self.n
        if not (-n - 1 <= x <= n and -n - 1 <= y <= n):
            raise ValueError(f"dual vertex {(x + .5, y + .5)} outside the dual of B({n})")
        return (y + n + 1) * self.dual_side + (x + n + 1)

    def dual_vertex(self, d: int) -> tuple[int, int]:
        y, x = divmod(int(d), self.dual_side)
        return x - self.n - 1, y - self.n - 1

    @cached_property
    def dual_xy(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer parts of the dual vertices (add 1/2 for actual coordinates)."""
        idx = np.arange(self.num_dual_vertices)
        y, x = np.divmod(idx, self.dual_side)
        return x - self.n - 1, y - self.n - 1

    @cached_property
    def dual_adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """Dual neighbour table (dnbr, deid); deid is the crossed primal edge."""
        n, s, ds = self.n, self.side, self.dual_side
        H = self.num_horizontal
        xs, ys = self.dual_xy
        d = np.arange(self.num_dual_vertices)
        nbr = np.full((self.num_dual_vertices, 4), -1, dtype=np.int64)
        eid = np.full((self.num_dual_vertices, 4), -1, dtype=np.int64)
        # east: crosses the vertical edge {(x+1, y), (x+1, y+1)}
        m = (xs + 1 <= n) & (xs + 1 >= -n) & (ys >= -n) & (ys <= n - 1)
        nbr[m, 0] = d[m] + 1
        eid[m, 0] = H + (ys[m] + n) * s + (xs[m] + 1 + n)
        # west: crosses the vertical edge {(x, y), (x, y+1)}
        m = (xs >= -n) & (xs <= n) & (ys >= -n) & (ys <= n - 1)
        nbr[m, 2] = d[m] - 1
        eid[m, 2] = H + (ys[m] + n) * s + (xs[m] + n)
        # north: crosses the horizontal edge {(x, y+1), (x+1, y+1)}
        m = (xs >= -n) & (xs <= n - 1) & (ys + 1 >= -n) & (ys + 1 <= n)
        nbr[m, 1] = d[m] + ds
        eid[m, 1] = (ys[m] + 1 + n) * (2 * n) + (xs[m] + n)
        # south: crosses the horizontal edge {(x, y), (x+1, y)}
        m = (xs >= -n) & (xs <= n - 1) & (ys >= -n) & (ys <= n)
        nbr[m, 3] = d[m] - ds
        eid[m, 3] = (ys[m] + n) * (2 * n) + (xs[m] + n)
        return nbr, eid

    @cached_property
    def edge_dual_ends(self) -> np.ndarray:
        """(E, 2) dual vertex ids of the two faces on either side of each edge."""
        n, ds = self.n, self.dual_side
        xs, ys = self.vertex_xy
        a = self.edge_endpoints[:, 0]
        x, y = xs[a], ys[a]
        horiz = np.arange(self.num_edges) < self.num_horizontal
        out = np.empty((self.num_edges, 2), dtype=np.int64)
        out[:, 0] = np.where(horiz, (y - 1 + n + 1) * ds + (x + n + 1), (y + n + 1) * ds + (x - 1 + n + 1))
        out[:, 1] = (y + n + 1) * ds + (x + n + 1)
        return out

    # -- sides ----------------------------------------------------------
    def side_vertices(self, which: str) -> np.ndarray:
        xs, ys = self.vertex_xy
        n = self.n
        sel = {"left": xs == -n, "right": xs == n, "bottom": ys == -n, "top": ys == n}[which]
        return np.flatnonzero(sel)

    def dual_side_vertices(self, which: str) -> np.ndarray:
        """Dual vertices just outside the named side (e.g. y = -n - 1/2 for bottom)."""
        xs, ys = self.dual_xy
        n = self.n
        inner_x = (xs >= -n) & (xs <= n - 1)
        inner_y = (ys >= -n) & (ys <= n - 1)
        sel = {
            "bottom": (ys == -n - 1) & inner_x,
            "top": (ys == n) & inner_x,
            "left": (xs == -n - 1) & inner_y,
            "right": (xs == n) & inner_y,
        }[which]
        return np.flatnonzero(sel)


def make_box(n: int) -> BoxGeometry:
    return BoxGeometry(int(n) if isinstance(n, (int, np.integer)) else n)


@dataclass(frozen=True)
class DualEdge:
    primal: int
    endpoints: tuple[tuple[float, float], tuple[float, float]]

    @property
    def midpoint(self) -> tuple[float, float]:
        (ax, ay), (bx, by) = self.endpoints
        return (ax + bx) / 2, (ay + by) / 2


def dual_of(geom: BoxGeometry, e: int) -> DualEdge:
    x, y, o = geom.decode(e)
    if o == HORIZONTAL:
        ends = ((x + 0.5, y - 0.5), (x + 0.5, y + 0.5))
    else:
        ends = ((x - 0.5, y + 0.5), (x + 0.5, y + 0.5))
    return DualEdge(int(e), ends)


def primal_of(geom: BoxGeometry, dual: DualEdge) -> int:
    """Inverse of :func:`dual_of`, recovered from the dual endpoints alone."""
    (ax, ay), (bx, by) = dual.endpoints
    mx, my = (ax + bx) / 2, (ay + by) / 2
    if ax == bx:  # vertical dual edge crosses a horizontal primal edge
        return geom.encode(int(math.floor(mx)), int(round(my)), HORIZONTAL)
    return geom.encode(int(round(mx)), int(math.floor(my)), VERTICAL)


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float
    include: bool = True
    closed: bool = True

    def contains(self, x, y):
        if self.closed:
            return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)
        return (x > self.x0) & (x < self.x1) & (y > self.y0) & (y < self.y1)


@dataclass(frozen=True)
class RegionMask:
    """Ordered union/difference of rectangles; later rectangles override earlier ones."""

    rects: tuple[Rect, ...] = field(default_factory=tuple)

    def contains(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        for r in self.rects:
            hit = r.contains(x, y)
            out = np.where(hit, r.include, out)
        return out

    def __contains__(self, point) -> bool:
        return bool(self.contains(*point))

    def __or__(self, other: "RegionMask") -> "RegionMask":
        # a point is in the union iff it is in either mask; realised lazily
        return UnionMask((self, other))

    def vertex_mask(self, geom: BoxGeometry) -> np.ndarray:
        xs, ys = geom.vertex_xy
        return self.contains(xs, ys)

    def dual_mask(self, geom: BoxGeometry) -> np.ndarray:
        xs, ys = geom.dual_xy
        return self.contains(xs + 0.5, ys + 0.5)

    def edge_mask(self, geom: BoxGeometry) -> np.ndarray:
        vm = self.vertex_mask(geom)
        ends = geom.edge_endpoints
        return vm[ends[:, 0]] & vm[ends[:, 1]]

    def bounds(self) -> tuple[float, float, float, float]:
        inc = [r for r in self.rects if r.include]
        return (min(r.x0 for r in inc), max(r.x1 for r in inc),
                min(r.y0 for r in inc), max(r.y1 for r in inc))


class UnionMask(RegionMask):
    def __init__(self, parts):
        object.__setattr__(self, "parts", tuple(parts))
        object.__setattr__(self, "rects", ())

    def contains(self, x, y):
        out = self.parts[0].contains(x, y)
        for p in self.parts[1:]:
            out = out | p.contains(x, y)
        return out

    def bounds(self):
        bs = [p.bounds() for p in self.parts]
        return (min(b[0] for b in bs), max(b[1] for b in bs),
                min(b[2] for b in bs), max(b[3] for b in bs))


def rect(x0, x1, y0, y1) -> RegionMask:
    return RegionMask((Rect(x0, x1, y0, y1),))


def box_mask(m: float) -> RegionMask:
    return rect(-m, m, -m, m)


def annulus(inner: float, outer: float) -> RegionMask:
    """[-outer, outer]^2 minus the closed box [-inner, inner]^2 (nothing removed when inner = 0)."""
    if not 0 <= inner < outer:
        raise ValueError(f"annulus needs 0 <= inner < outer, got ({inner}, {outer})")
    rects = [Rect(-outer, outer, -outer, outer)]
    if inner > 0:
        rects.append(Rect(-inner, inner, -inner, inner, include=False))
    return RegionMask(tuple(rects))


# ---------------------------------------------------------------------------
# configurations


def derive_seed(master_seed: int, *stream: int) -> int:
    """64-bit token for one sample, keyed by the master seed and stream ids."""
    ss = np.random.SeedSequence([int(master_seed) & ((1 << 64) - 1), *[int(s) for s in stream]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True, eq=False)
class Config:
    geometry: BoxGeometry
    states: np.ndarray
    p: float
    seed: int | None = None

    def __post_init__(self):
        st = np.ascontiguousarray(self.states, dtype=np.uint8)
        if st.shape != (self.geometry.num_edges,):
            raise ValueError(
                f"states length {st.shape} does not match edge count {self.geometry.num_edges}")
        if st is self.states:
            st = st.copy()
        st.setflags(write=False)
        object.__setattr__(self, "states", st)

    @property
    def n(self) -> int:
        return self.geometry.n

    def is_open(self, e: int) -> bool:
        return bool(self.states[e])

    def with_states(self, states: np.ndarray) -> "Config":
        return Config(self.geometry, states, self.p, self.seed)

    def open_fraction(self) -> float:
        return float(self.states.mean())


def sample_config(geom: BoxGeometry, p: float, seed: int) -> Config:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"density must lie in [0, 1], got {p}")
    # Philox is counter-based: the stream for a token never depends on call order
    rng = np.random.Generator(np.random.Philox(key=int(seed) & ((1 << 64) - 1)))
    states = (rng.random(geom.num_edges) < p).astype(np.uint8)
    return Config(geom, states, float(p), int(seed))


def from_open_edges(geom: BoxGeometry, edges, p: float = 0.5) -> Config:
    states = np.zeros(geom.num_edges, dtype=np.uint8)
    states[list(edges)] = 1
    return Config(geom, states, p, None)


def config_from_paths(geom: BoxGeometry, paths, p: float = 0.5) -> Config:
    """All-closed configuration with the given vertex paths opened."""
    states = np.zeros(geom.num_edges, dtype=np.uint8)
    for path in paths:
        for a, b in zip(path[:-1], path[1:]):
            states[geom.edge_between(tuple(a), tuple(b))] = 1
    return Config(geom, states, p, None)


def all_configs(geom: BoxGeometry):
    """Every configuration of a small box, in binary order of the state vector."""
    E = geom.num_edges
    if E > 24:
        raise ValueError("exhaustive enumeration only for tiny boxes")
    codes = np.arange(1 << E, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(E)) & 1).astype(np.uint8)
    for row in bits:
        yield Config(geom, row, 0.5, None)


def reflect_x(config: Config) -> Config:
    """Mirror image under (x, y) -> (-x, y)."""
    g = config.geometry
    x, y, o = _decode_all(g)
    xr = np.where(o == HORIZONTAL, -x - 1, -x)
    return config.with_states(config.states[_encode_all(g, xr, y, o)])


def reflect_y(config: Config) -> Config:
    """Mirror image under (x, y) -> (x, -y)."""
    g = config.geometry
    x, y, o = _decode_all(g)
    yr = np.where(o == VERTICAL, -y - 1, -y)
    return config.with_states(config.states[_encode_all(g, x, yr, o)])


def _decode_all(g: BoxGeometry):
    e = np.arange(g.num_edges)
    n, H = g.n, g.num_horizontal
    hy, hx = np.divmod(e, 2 * n)
    vy, vx = np.divmod(e - H, g.side)
    horiz = e < H
    x = np.where(horiz, hx, vx) - n
    y = np.where(horiz, hy, vy) - n
    return x, y, np.where(horiz, HORIZONTAL, VERTICAL)


def _encode_all(g: BoxGeometry, x, y, o):
    n = g.n
    return np.where(o == HORIZONTAL, (y + n) * (2 * n) + (x + n),
                    g.num_horizontal + (y + n) * g.side + (x + n))
