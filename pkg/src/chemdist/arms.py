"""Arm events, five-arm points, the inner part of E_k', and circuit stacks.

Arms of one colour are found together by unit-capacity max-flow (open arms
on the primal lattice, closed arms on the dual lattice); primal and dual
arms never compete for sites.  Landing windows become per-arm targets of
capacity one, and the clockwise order of the landing points is compared
with the order in the spec.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import _kernels as K
from .connectivity import CLOSED_DUAL, OPEN, allowed_mask, connected, min_defect_circuit, \
    min_defects_by_flow, tables
from .lattice import BoxGeometry, Config, Rect, RegionMask, rect
from .paths import crossed_edge
from .sampling import conditioned_samples, pmap

# ---------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class Arm:
    """One arm: colour, starting site, optional forced first step and landing window.

    Sites are given in true coordinates (dual sites at half-integers).  With a
    ``step`` the arm must use the edge start -> step first and ``start`` is
    withheld from the other arms of the same colour.
    """

    color: str
    start: tuple[float, float] | None = None
    step: tuple[float, float] | None = None
    window: RegionMask | None = None
    label: str = ""


@dataclass(frozen=True)
class ArmSpec:
    """Arms listed in clockwise order around ``center``.

    Without an explicit ``region`` the arms live in the box of radius
    ``outer`` about ``center`` (dual arms may reach the ring of faces just
    outside it), minus the box of radius ``inner`` when ``inner > 0``; in
    that case every arm starts anywhere on the inner boundary.
    """

    arms: tuple[Arm, ...]
    outer: float
    inner: float = 0
    center: tuple[float, float] = (0.0, 0.0)
    region: RegionMask | None = None

    def __post_init__(self):
        if len(self.arms) < 1:
            raise ValueError("an arm event needs at least one arm")
        if not 0 <= self.inner < self.outer:
            raise ValueError(f"radii must satisfy 0 <= inner < outer, got {self.inner}, {self.outer}")

    def _norm(self, xs, ys):
        cx, cy = self.center
        return np.maximum(np.abs(xs - cx), np.abs(ys - cy))

    def sites(self, geom: BoxGeometry, color: str) -> np.ndarray:
        if self.region is not None:
            return allowed_mask(geom, color, self.region)
        if color == OPEN:
            xs, ys = geom.vertex_xy
            nrm = self._norm(xs, ys)
            m = nrm <= self.outer
            if self.inner > 0:
                m &= nrm >= self.inner
        else:
            xs, ys = geom.dual_xy
            nrm = self._norm(xs + 0.5, ys + 0.5)
            m = nrm <= self.outer + 0.5
            if self.inner > 0:
                m &= nrm >= self.inner + 0.5
        return m

    def outer_ring(self, geom: BoxGeometry, color: str) -> np.ndarray:
        sites = self.sites(geom, color)
        if self.region is not None:
            return sites & _boundary_sites(geom, color, self.region)
        if color == OPEN:
            xs, ys = geom.vertex_xy
            return sites & (self._norm(xs, ys) == self.outer)
        xs, ys = geom.dual_xy
        return sites & (self._norm(xs + 0.5, ys + 0.5) == self.outer + 0.5)

    def inner_ring(self, geom: BoxGeometry, color: str) -> np.ndarray:
        sites = self.sites(geom, color)
        if color == OPEN:
            xs, ys = geom.vertex_xy
            return sites & (self._norm(xs, ys) == self.inner)
        xs, ys = geom.dual_xy
        return sites & (self._norm(xs + 0.5, ys + 0.5) == self.inner + 0.5)

    def check_inside(self, geom: BoxGeometry) -> None:
        cx, cy = self.center
        reach = self.outer if self.region is None else max(map(abs, self.region.bounds()))
        if self.region is None and max(abs(cx), abs(cy)) + self.outer > geom.n:
            raise ValueError(f"arm spec of radius {self.outer} leaves B({geom.n})")
        if self.region is not None and reach > geom.n + 0.5:
            raise ValueError(f"arm region leaves B({geom.n})")


def _color(c: str) -> str:
    return OPEN if c in ("open", "open-primal", "primal") else CLOSED_DUAL


def _site_id(geom: BoxGeometry, color: str, p) -> int:
    x, y = p
    if color == OPEN:
        return geom.vid(int(x), int(y))
    return geom.did(int(math.floor(x)), int(math.floor(y)))


def _site_xy(geom: BoxGeometry, color: str, s: int):
    if color == OPEN:
        return geom.vertex(s)
    x, y = geom.dual_vertex(s)
    return x + 0.5, y + 0.5


def _boundary_sites(geom: BoxGeometry, color: str, region: RegionMask) -> np.ndarray:
    """Sites of ``region`` with a lattice neighbour (by coordinates) outside it."""
    if color == OPEN:
        xs, ys = geom.vertex_xy
        xs, ys = xs.astype(float), ys.astype(float)
    else:
        xs, ys = geom.dual_xy
        xs, ys = xs + 0.5, ys + 0.5
    out = np.zeros(xs.shape, dtype=bool)
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        out |= ~region.contains(xs + dx, ys + dy)
    return out


def lattice_side(region: Rect | RegionMask, side: str, lo: float, hi: float,
                 lattice: str = OPEN) -> RegionMask:
    """Window on one side of a rectangle, snapped inward to the lattice.

    Selects the extreme row (or column) of primal or dual sites inside the
    rectangle on ``side`` whose other coordinate lies in [lo, hi].
    """
    x0, x1, y0, y1 = region.bounds() if isinstance(region, RegionMask) else \
        (region.x0, region.x1, region.y0, region.y1)
    off = 0.0 if _color(lattice) == OPEN else 0.5

    def up(v):
        return math.ceil(v - off) + off

    def down(v):
        return math.floor(v - off) + off

    if side == "top":
        y = down(y1)
        return rect(lo, hi, y, y)
    if side == "bottom":
        y = up(y0)
        return rect(lo, hi, y, y)
    if side == "left":
        x = up(x0)
        return rect(x, x, lo, hi)
    if side == "right":
        x = down(x1)
        return rect(x, x, lo, hi)
    raise ValueError(f"unknown side {side!r}")


# ---------------------------------------------------------------------------
# detector


@dataclass
class ArmOutcome:
    occurred: bool
    paths: dict = field(default_factory=dict)  # arm index -> list of site ids
    landings: dict = field(default_factory=dict)  # arm index -> landing coordinate


def detect_arm_event(config: Config, spec: ArmSpec, details: bool = False):
    geom = config.geometry
    spec.check_inside(geom)
    outcome = ArmOutcome(False)
    windows_used = False
    for color in (OPEN, CLOSED_DUAL):
        idx = [i for i, a in enumerate(spec.arms) if _color(a.color) == color]
        if not idx:
            continue
        nbr, eid, want = tables(geom, color)
        region_sites = spec.sites(geom, color)
        allowed = region_sites.copy()
        sources = []
        owners = []
        for i in idx:
            a = spec.arms[i]
            if spec.inner > 0 and a.start is None:
                continue
            s = _site_id(geom, color, a.start)
            if not region_sites[s]:
                return outcome if details else False
            if a.step is not None:
                t = _site_id(geom, color, a.step)
                e = geom.edge_between(a.start, a.step) if color == OPEN else \
                    crossed_edge(geom, a.start, a.step)
                if config.states[e] != want or not allowed[t]:
                    return outcome if details else False
                allowed[s] = False
                sources.append(t)
            else:
                sources.append(s)
            owners.append(i)
        if spec.inner > 0 and not sources:
            ring = np.flatnonzero(spec.inner_ring(geom, color))
            sources = ring.tolist()
        # targets
        tid = np.full(allowed.shape[0], -1, dtype=np.int64)
        caps = []
        labels = []
        free = [i for i in idx if spec.arms[i].window is None]
        for i in idx:
            w = spec.arms[i].window
            if w is None:
                continue
            windows_used = True
            sites = allowed_mask(geom, color, w) & allowed
            if not sites.any():
                raise ValueError(f"landing window of arm {i} has no sites in the region")
            if spec.region is not None and not _boundary_sites(geom, color, spec.region)[sites].all():
                raise ValueError(f"landing window of arm {i} is off the region boundary")
            if (tid[sites] >= 0).any():
                raise ValueError("landing windows overlap")
            tid[sites] = len(caps)
            caps.append(1)
            labels.append(i)
        if free:
            ring = spec.outer_ring(geom, color) & allowed & (tid < 0)
            tid[ring] = len(caps)
            caps.append(len(free))
            labels.append(-1)
        src = np.asarray(sources, dtype=np.int64)
        flow, raw = K.disjoint_paths(nbr, eid, config.states, want, allowed, src, tid,
                                     np.asarray(caps, dtype=np.int64), len(idx))
        if flow < len(idx):
            return outcome if details else False
        for row_i, row in enumerate(raw):
            p = row[row >= 0].tolist()
            if not p:
                continue
            end = p[-1]
            lab = labels[tid[end]]
            key = lab if lab >= 0 else (color, row_i)
            if row_i < len(owners) and spec.arms[owners[row_i]].step is not None:
                p = [_site_id(geom, color, spec.arms[owners[row_i]].start)] + p
            outcome.paths[key] = (color, p)
            outcome.landings[key] = _site_xy(geom, color, end)
    if windows_used and not _cyclic_ok(spec, outcome):
        return outcome if details else False
    outcome.occurred = True
    return outcome if details else True


def _clockwise_angle(center, p):
    # angle measured clockwise from north, in [0, 2 pi)
    dx, dy = p[0] - center[0], p[1] - center[1]
    return math.atan2(dx, dy) % (2 * math.pi)


def _cyclic_ok(spec: ArmSpec, outcome: ArmOutcome) -> bool:
    """Windowed arms must land in the clockwise order in which the spec lists them."""
    keyed = [(k, v) for k, v in outcome.landings.items() if isinstance(k, int)
             and spec.arms[k].window is not None]
    if len(keyed) < 3:
        return True
    order = [k for k, v in sorted(keyed, key=lambda kv: _clockwise_angle(spec.center, kv[1]))]
    want = sorted(order)
    m = len(order)
    return any(order[r:] + order[:r] == want for r in range(m))


# ---------------------------------------------------------------------------
# three-arm events


def a3_spec(outer: int, inner: int = 0) -> ArmSpec:
    """A_3 at the edge {0, e1}: two open arms and one closed dual arm from (1/2, -1/2)."""
    if inner > 0:
        arms = (Arm(OPEN), Arm(OPEN), Arm(CLOSED_DUAL))
    else:
        arms = (Arm(OPEN, (0, 0)), Arm(OPEN, (1, 0)), Arm(CLOSED_DUAL, (0.5, -0.5)))
    return ArmSpec(arms, outer=outer, inner=inner)


def detect_a3(config: Config, outer: int | None = None, inner: int = 0) -> bool:
    return detect_arm_event(config, a3_spec(config.n if outer is None else outer, inner))


def a2_spec(outer: int, inner: int = 0) -> ArmSpec:
    """Two open arms from {0, e1} (the two-arm half of the three-arm bound)."""
    if inner > 0:
        return ArmSpec((Arm(OPEN), Arm(OPEN)), outer=outer, inner=inner)
    return ArmSpec((Arm(OPEN, (0, 0)), Arm(OPEN, (1, 0))), outer=outer)


# ---------------------------------------------------------------------------
# five-arm points


def _q(u, a):
    return float(Fraction(a) * u)


@dataclass(frozen=True)
class LandingSpec:
    """Landing pattern of the five-arm point in B_1 (``star1``) or B_2 (``star2``) at scale k."""

    which: str
    k: int

    @property
    def u(self) -> int:
        return 1 << self.k

    @property
    def region(self) -> RegionMask:
        u = self.u
        if self.which == "star1":
            return rect(-3 * u, _q(u, "-7/3"), _q(u, "-1/3"), _q(u, "1/3"))
        return rect(_q(u, "7/3"), 3 * u, _q(u, "-1/3"), _q(u, "1/3"))

    @property
    def search_box(self) -> RegionMask:
        u = self.u
        if self.which == "star1":
            return rect(_q(u, "-17/6"), _q(u, "-15/6"), _q(u, "-1/6"), _q(u, "1/6"))
        return rect(_q(u, "15/6"), _q(u, "17/6"), _q(u, "-1/6"), _q(u, "1/6"))

    def windows(self) -> dict[str, RegionMask]:
        u, R = self.u, self.region
        third = _q(u, "1/3")
        if self.which == "star1":
            return {
                "a": lattice_side(R, "top", _q(u, "-17/6"), _q(u, "-8/3"), CLOSED_DUAL),
                "b": lattice_side(R, "top", _q(u, "-8/3"), _q(u, "-15/6"), OPEN),
                "c": lattice_side(R, "bottom", _q(u, "-8/3"), _q(u, "-7/3"), OPEN),
                "d": lattice_side(R, "bottom", -3 * u, _q(u, "-8/3"), CLOSED_DUAL),
                "e": lattice_side(R, "left", -third, third, OPEN),
            }
        return {
            "a": lattice_side(R, "top", _q(u, "15/6"), _q(u, "8/3"), OPEN),
            "b": lattice_side(R, "top", _q(u, "8/3"), _q(u, "17/6"), CLOSED_DUAL),
            "c": lattice_side(R, "right", -third, third, OPEN),
            "d": lattice_side(R, "bottom", _q(u, "7/3"), 3 * u, CLOSED_DUAL),
            "e": lattice_side(R, "left", -third, third, OPEN),
        }

    def closed_starts(self, z) -> dict[str, tuple]:
        """Start and forced step of the two closed arms at z, keyed by window."""
        x, y = z
        if self.which == "star1":
            return {"a": ((x - .5, y + .5), (x - .5, y + 1.5)),
                    "d": ((x + .5, y - .5), (x + .5, y - 1.5))}
        return {"b": ((x + .5, y + .5), (x + .5, y + 1.5)),
                "d": ((x - .5, y - .5), (x - .5, y - 1.5))}

    def open_steps(self, z) -> dict[str, tuple]:
        x, y = z
        if self.which == "star1":
            return {"b": (x, y + 1), "c": (x + 1, y), "e": (x - 1, y)}
        return {"a": (x, y + 1), "c": (x + 1, y), "e": (x - 1, y)}

    def arm_spec(self, z) -> ArmSpec:
        w = self.windows()
        opens = self.open_steps(z)
        closed = self.closed_starts(z)
        arms = []
        for lab in "abcde":
            if lab in opens:
                arms.append(Arm(OPEN, tuple(z), opens[lab], w[lab], lab))
            else:
                s, t = closed[lab]
                arms.append(Arm(CLOSED_DUAL, s, t, w[lab], lab))
        return ArmSpec(tuple(arms), outer=3 * self.u, center=tuple(map(float, z)),
                       region=self.region)


def five_arm_points(config: Config, search_box: RegionMask, landing: LandingSpec) -> list:
    """All vertices of ``search_box`` at which the landing pattern is realised."""
    geom = config.geometry
    cand = np.flatnonzero(search_box.vertex_mask(geom) & landing.region.vertex_mask(geom))
    out = []
    for v in cand:
        z = geom.vertex(int(v))
        if detect_arm_event(config, landing.arm_spec(z)):
            out.append(z)
    return out


def detect_five_arm_point(config: Config, search_box: RegionMask | None = None,
                          landing: LandingSpec | None = None):
    """The qualifying vertex, or None.  With several, the first in scan order."""
    if landing is None:
        raise ValueError("a landing spec is required")
    box = landing.search_box if search_box is None else search_box
    pts = five_arm_points(config, box, landing)
    return pts[0] if pts else None


# ---------------------------------------------------------------------------
# E_k' (inner box part)


def _lattice_rect(geom, R: RegionMask, color):
    return allowed_mask(geom, color, R)


def rect_crossing(config: Config, R: RegionMask, direction: str = "horizontal",
                  color: str = OPEN) -> bool:
    """Crossing of the rectangle R inside R, between its extreme lattice rows/columns."""
    geom = config.geometry
    color = _color(color)
    sites = _lattice_rect(geom, R, color)
    if not sites.any():
        return False
    if color == OPEN:
        xs, ys = geom.vertex_xy
    else:
        xs, ys = geom.dual_xy
    coord = xs if direction == "horizontal" else ys
    lo = coord[sites].min()
    hi = coord[sites].max()
    if lo == hi:
        return False
    return connected(config, np.flatnonzero(sites & (coord == lo)),
                     np.flatnonzero(sites & (coord == hi)), color, sites)


EK_ITEMS = ("1", "2", "3", "4", "5", "6", "7", "8", "9")


def ek_prime_regions(k: int) -> dict[str, RegionMask]:
    u = 1 << k

    def q(a):
        return _q(u, a)

    def hole_box(r):
        return Rect(-r, r, -r, r, include=False, closed=False)

    return {
        "R1_right": rect(u, 3 * u, q("-1/3"), q("1/3")),
        "R1_left": rect(q("-7/3"), -u, q("-1/3"), q("1/3")),
        "R2": rect(q("-7/3"), q("-5/3"), -3 * u, q("1/3")),
        "W_left": rect(q("-5/3"), -u, q("-1/3"), q("1/3")),
        "W_right": rect(u, q("5/3"), q("-1/3"), q("1/3")),
        "Q6": rect(-3 * u, q("-7/3"), -3 * u, q("-1/3")),
        "Q7": rect(q("7/3"), 3 * u, -3 * u, q("-1/3")),
        "V": RegionMask((Rect(q("-17/6"), q("17/6"), q("-1/6"), q("17/6")), hole_box(q("8/3")))),
        "U": RegionMask((Rect(q("-8/3"), q("8/3"), q("-1/6"), q("8/3")), hole_box(q("15/6")))),
    }


def ek_prime_items(config: Config, k: int, stop_early: bool = False) -> dict:
    """Per-item outcomes of the inner event; keys '1'..'9', plus 'star1'/'star2'."""
    geom = config.geometry
    u = 1 << k
    if geom.n < 3 * u:
        raise ValueError(f"E_k' at k={k} needs B({3 * u}); box is B({geom.n})")
    R = ek_prime_regions(k)
    L1, L2 = LandingSpec("star1", k), LandingSpec("star2", k)
    out = {key: False for key in EK_ITEMS}
    out["star1"] = out["star2"] = None

    def done():
        return stop_early and not all(out[key] for key in EK_ITEMS if key in checked)

    checked = []
    out["1"] = rect_crossing(config, R["R1_right"]) and rect_crossing(config, R["R1_left"])
    checked.append("1")
    if done():
        return out
    out["2"] = rect_crossing(config, R["R2"], "vertical")
    checked.append("2")
    if done():
        return out
    cnt, _ = min_defect_circuit(config, u, _q(u, "5/3"), CLOSED_DUAL,
                                defect_region=R["W_left"] | R["W_right"], limit=2)
    out["5"] = cnt <= 2
    checked.append("5")
    if done():
        return out
    z1 = detect_five_arm_point(config, landing=L1)
    out["3"], out["star1"] = z1 is not None, z1
    checked.append("3")
    if done():
        return out
    z2 = detect_five_arm_point(config, landing=L2)
    out["4"], out["star2"] = z2 is not None, z2
    checked.append("4")
    if done() or z1 is None or z2 is None:
        return out
    (x1, y1), (x2, y2) = z1, z2
    Q1, Q2 = L1.region, L2.region
    bottom = -3 * u
    # item 6: the arm heading for window c continues into a vertical crossing of Q6,
    # and the closed arm heading for d into a closed vertical crossing of Q6
    m_open = (Q1 | R["Q6"]).vertex_mask(geom)
    m_open[geom.vid(x1, y1)] = False
    ys = geom.vertex_xy[1]
    open_ok = config.is_open(geom.edge_between(z1, (x1 + 1, y1))) and connected(
        config, [geom.vid(x1 + 1, y1)], np.flatnonzero(m_open & (ys == bottom)), OPEN, m_open)
    m_dual = (Q1 | R["Q6"]).dual_mask(geom)
    dys = geom.dual_xy[1] + 0.5
    dbottom = dys[m_dual].min()
    s_d, _ = L1.closed_starts(z1)["d"]
    m_dual[_site_id(geom, CLOSED_DUAL, L1.closed_starts(z1)["a"][0])] = False
    closed_ok = connected(config, [_site_id(geom, CLOSED_DUAL, s_d)],
                          np.flatnonzero(m_dual & (dys == dbottom)), CLOSED_DUAL, m_dual)
    out["6"] = bool(open_ok and closed_ok)
    checked.append("6")
    if done():
        return out
    m_dual = (Q2 | R["Q7"]).dual_mask(geom)
    dbottom = dys[m_dual].min()
    s_d2, _ = L2.closed_starts(z2)["d"]
    s_b2, _ = L2.closed_starts(z2)["b"]
    m_dual[_site_id(geom, CLOSED_DUAL, s_b2)] = False
    out["7"] = connected(config, [_site_id(geom, CLOSED_DUAL, s_d2)],
                         np.flatnonzero(m_dual & (dys == dbottom)), CLOSED_DUAL, m_dual)
    checked.append("7")
    if done():
        return out
    # item 8: shield between the upper closed arms of the two stars
    _, top1 = L1.closed_starts(z1)["a"]
    _, top2 = L2.closed_starts(z2)["b"]
    m_dual = (R["V"] | Q1 | Q2).dual_mask(geom)
    for s in (L1.closed_starts(z1)["a"][0], L2.closed_starts(z2)["b"][0]):
        m_dual[_site_id(geom, CLOSED_DUAL, s)] = False
    out["8"] = connected(config, [_site_id(geom, CLOSED_DUAL, top1)],
                         [_site_id(geom, CLOSED_DUAL, top2)], CLOSED_DUAL, m_dual)
    checked.append("8")
    if done():
        return out
    # item 9: the shortcut arc between the upward open arms
    m_open = (R["U"] | Q1 | Q2).vertex_mask(geom)
    m_open[geom.vid(*z1)] = False
    m_open[geom.vid(*z2)] = False
    out["9"] = (config.is_open(geom.edge_between(z1, (x1, y1 + 1)))
                and config.is_open(geom.edge_between(z2, (x2, y2 + 1)))
                and connected(config, [geom.vid(x1, y1 + 1)], [geom.vid(x2, y2 + 1)], OPEN,
                              m_open))
    checked.append("9")
    return out


def detect_Ek_prime_inner(config: Config, k: int):
    """(star1, star2) when items 1-9 all hold, else None."""
    items = ek_prime_items(config, k, stop_early=True)
    if all(items[key] for key in EK_ITEMS):
        return items["star1"], items["star2"]
    return None


# ---------------------------------------------------------------------------
# estimates


@dataclass(frozen=True)
class EstimateRecord:
    name: str
    n: int
    samples: int
    mean: float
    se: float
    ci_lo: float
    ci_hi: float
    attempts: int | None = None

    @classmethod
    def from_values(cls, name: str, n: int, values, attempts: int | None = None):
        x = np.asarray(values, dtype=float)
        m = x.size
        if m == 0:
            raise ValueError("no samples")
        mean = float(x.mean())
        se = float(x.std(ddof=1) / math.sqrt(m)) if m > 1 else float("nan")
        return cls(name, int(n), int(m), mean, se, mean - 1.96 * se, mean + 1.96 * se,
                   attempts if attempts is not None else int(m))


def _a3_indicator(outer, cfg):
    return detect_a3(cfg, outer)


def estimate_pi3(n: int, samples: int, seed: int, p: float = 0.5,
                 workers: int | None = None) -> EstimateRecord:
    from functools import partial

    if samples < 1:
        raise ValueError("samples must be positive")
    vals = pmap(partial(_a3_indicator, n), n, range(samples), seed, p, workers)
    return EstimateRecord.from_values("pi3", n, vals)


def _joint(event, cfg):
    return bool(event(cfg))


def measure_conditional_frequency(event: Callable[[Config], bool],
                                  conditioning: Callable[[Config], bool], n: int, samples: int,
                                  seed: int, p: float = 0.5, workers: int | None = None,
                                  max_attempts: int | None = None,
                                  name: str = "conditional") -> EstimateRecord:
    """P(event | conditioning) by rejection sampling; samples count accepted configurations."""
    from functools import partial

    vals, attempts = conditioned_samples(partial(_joint, event), conditioning, n, samples, seed,
                                         p, workers, max_attempts)
    return EstimateRecord.from_values(name, n, vals, attempts)


# ---------------------------------------------------------------------------
# circuit stacks

C_OFFSETS = (1, 3, 4, 6, 8, 9)


@dataclass(frozen=True)
class CircuitEventRecord:
    N: int
    occurred_C: tuple[bool, ...]
    occurred_D: tuple[bool, ...]
    occurred_hatC: tuple[bool, ...]
    occurred_B: tuple[bool, ...]
    I_count: int
    J_count: int
    k: int | None = None
    j_range: tuple[int, int] = (0, 0)

    def check(self) -> None:
        for j, h in enumerate(self.occurred_hatC):
            want = self.occurred_D[10 * j] and all(self.occurred_C[10 * j + i] for i in C_OFFSETS)
            if h != want:
                raise AssertionError(f"stack condition mismatch at j={j}")
        lo, hi = self.j_range
        if self.J_count != sum(self.occurred_hatC[lo:hi]):
            raise AssertionError("J_count mismatch")
        if not self.I_count <= self.J_count <= max(0, hi - lo):
            raise AssertionError("I_count / J_count out of range")


def annulus_events(config: Config, N: int, m: int, route: str = "auto") -> tuple[bool, bool]:
    """(C_m, D_m) in A(2^{mN}, 2^{(m+1)N})."""
    inner, outer = 1 << (m * N), 1 << ((m + 1) * N)
    if outer > config.n:
        raise ValueError(f"annulus A({inner}, {outer}) does not fit in B({config.n})")
    if route == "bfs" or (route == "auto" and outer <= 16):
        c, _ = min_defect_circuit(config, inner, outer, CLOSED_DUAL, limit=2)
        d, _ = min_defect_circuit(config, inner, outer, OPEN, limit=1)
    else:
        c = min_defects_by_flow(config, inner, outer, CLOSED_DUAL, cap=2)
        d = min_defects_by_flow(config, inner, outer, OPEN, cap=1)
    return c <= 2, d <= 1


def detect_circuit_stack(config: Config, N: int, k: int | None = None, n_prime: int = 0,
                         n_log: int | None = None,
                         event: Callable[[Config, int], bool] | None = None,
                         route: str = "auto") -> CircuitEventRecord:
    """Circuit events of the decoupling stack.

    With ``k`` only the block 10k..10k+9 is evaluated; otherwise every block
    that fits in the box.  ``event(config, j)`` stands for the extra event
    paired with each block (default: always true).  I and J count blocks
    j = ceil(n'/10N) .. floor(n/10N) - 1, with n = ``n_log`` (default
    floor(log2 of the box half-side)).
    """
    if N < 1:
        raise ValueError("N must be a positive integer")
    n_box = config.n
    levels = int(math.floor(math.log2(n_box)))
    if n_log is None:
        n_log = levels
    M = levels // N  # annuli m with (m + 1) N <= levels
    if k is not None:
        if 10 * (k + 1) > M:
            raise ValueError(f"box B({n_box}) too small for block k={k} at N={N}")
        ms = range(10 * k, 10 * k + 10)
        blocks = [k]
    else:
        ms = range(0, 10 * (M // 10))
        blocks = list(range(M // 10))
        if not blocks:
            raise ValueError(f"box B({n_box}) too small for a single block at N={N}")
    size = 10 * (max(blocks) + 1)
    C = [False] * size
    D = [False] * size
    for m in ms:
        C[m], D[m] = annulus_events(config, N, m, route)
    hatC = [False] * (max(blocks) + 1)
    B = [False] * (max(blocks) + 1)
    for j in blocks:
        hatC[j] = D[10 * j] and all(C[10 * j + i] for i in C_OFFSETS)
        B[j] = hatC[j] and (True if event is None else bool(event(config, j)))
    lo = math.ceil(n_prime / (10 * N))
    hi = n_log // (10 * N)
    hi = min(hi, len(hatC))
    lo = min(lo, hi)
    J = sum(hatC[lo:hi])
    I = sum(B[lo:hi])
    return CircuitEventRecord(N, tuple(C), tuple(D), tuple(hatC), tuple(B), int(I), int(J), k,
                              (lo, hi))
