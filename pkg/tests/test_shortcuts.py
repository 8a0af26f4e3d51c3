import itertools
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemdist.crossings import has_horizontal_crossing, lowest_crossing
from chemdist.lattice import config_from_paths, make_box
from chemdist.paths import LatticePath
from chemdist.sampling import config_for
from chemdist.shortcuts import (
    ShortcutRecord, _above_by_parity, build_sigma, enclosed_faces,
    find_all_shortcuts, find_shortcuts, revalidate, scale_of, select_maximal, u_region,
    upper_region, verify_nested_or_disjoint, weighted_interval_scheduling)

# host dips to y = -7 between x = -3 and x = 3; a bridge spans it along y = 1
STAPLE_HOST = ([(x, 0) for x in range(-8, -2)] + [(-3, y) for y in range(-1, -8, -1)]
               + [(x, -7) for x in range(-2, 4)] + [(3, y) for y in range(-6, 1)]
               + [(x, 0) for x in range(4, 9)])
STAPLE_BRIDGE = [(-4, 0), (-4, 1)] + [(x, 1) for x in range(-3, 5)] + [(4, 0)]


@pytest.fixture(scope="module")
def staple():
    g = make_box(8)
    cfg = config_from_paths(g, [STAPLE_HOST, STAPLE_BRIDGE])
    return g, cfg, lowest_crossing(cfg)


def test_staple_single_record(staple):
    g, cfg, host = staple
    assert host.vertices == tuple(STAPLE_HOST)
    e = g.edge_between((0, -7), (1, -7))
    recs = find_shortcuts(cfg, host, e, Fraction(1, 2), 3)
    assert len(recs) == 1
    r = recs[0]
    assert (r.w0, r.wM) == ((-4, 0), (4, 0))
    assert r.gain == Fraction(len(STAPLE_BRIDGE) - 1, 22)
    assert all(revalidate(r, cfg, host, Fraction(1, 2), e).values())


def test_staple_box_too_small(staple):
    g, cfg, host = staple
    e = g.edge_between((0, -7), (1, -7))
    assert find_shortcuts(cfg, host, e, Fraction(1, 2), 2) == []


def test_staple_gain_bound(staple):
    g, cfg, host = staple
    e = g.edge_between((0, -7), (1, -7))
    assert find_shortcuts(cfg, host, e, Fraction(1, 3), 3) == []


def test_closed_above_host_gives_nothing(staple):
    g, _, host = staple
    cfg = config_from_paths(g, [STAPLE_HOST])
    for e in host.edges:
        assert find_shortcuts(cfg, host, e, 10, 4) == []


def test_edge_off_host_rejected(staple):
    g, cfg, host = staple
    with pytest.raises(ValueError):
        find_shortcuts(cfg, host, g.edge_between((0, 5), (1, 5)), 1, 3)


def test_sigma_on_staple(staple):
    g, cfg, host = staple
    fam = find_all_shortcuts(cfg, host, Fraction(1, 2))
    plan = select_maximal(fam, host)
    sigma = build_sigma(host, plan)
    assert sigma.length == host.length - 22 + 10
    sigma.check(g)
    assert sigma.is_open(cfg.states) and sigma.is_self_avoiding
    assert sigma.vertices[0] == host.vertices[0] and sigma.vertices[-1] == host.vertices[-1]


def test_empty_plan_is_identity(staple):
    _, _, host = staple
    plan = select_maximal({}, host)
    assert plan.chosen == []
    assert build_sigma(host, plan) == host


def test_plan_host_mismatch(staple):
    g, cfg, host = staple
    fam = find_all_shortcuts(cfg, host, Fraction(1, 2))
    other = LatticePath(host.vertices[1:], host.edges[1:])
    with pytest.raises(ValueError):
        select_maximal(fam, other)


def _fake(i0, iM, host, r_len=1):
    verts = host.vertices
    r = LatticePath((verts[i0],) + ((0, 99),) * (r_len - 1) + (verts[iM],), tuple(range(r_len)))
    return ShortcutRecord(r, verts[i0], verts[iM], (i0, iM), None, 0, Fraction(r_len, iM - i0),
                          tuple(verts[i0:iM + 1]))


def test_sigma_length_arithmetic():
    host = LatticePath(tuple((x, 0) for x in range(41)), tuple(range(40)))
    rec = _fake(5, 15, host, r_len=3)
    plan = select_maximal({0: [rec]}, host)
    assert plan.chosen == [rec]
    assert build_sigma(host, plan).length == 33


def _brute(recs):
    best = 0
    for m in range(len(recs) + 1):
        for sub in itertools.combinations(recs, m):
            iv = sorted(r.tau for r in sub)
            if all(a[1] < b[0] for a, b in zip(iv[:-1], iv[1:])):
                best = max(best, sum(r.tau_len for r in sub))
    return best


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 38), st.integers(1, 12)), min_size=0, max_size=12))
def test_interval_scheduling_matches_brute_force(ivs):
    host = LatticePath(tuple((x, 0) for x in range(51)), tuple(range(50)))
    recs = [_fake(a, a + d, host) for a, d in ivs]
    picked = weighted_interval_scheduling(recs)
    iv = sorted(r.tau for r in picked)
    assert all(a[1] < b[0] for a, b in zip(iv[:-1], iv[1:]))
    assert sum(r.tau_len for r in picked) == _brute(recs)


@settings(max_examples=40, deadline=None)
@given(st.randoms(use_true_random=False))
def test_laminar_families_satisfy_comb(rnd):
    # laminar intervals with scale monotone in containment, as produced by scale_of
    host = LatticePath(tuple((x, 0) for x in range(65)), tuple(range(64)))
    ivs = []

    def split(lo, hi, depth):
        if hi - lo < 2 or depth > 3:
            return
        ivs.append((lo, hi))
        cut = rnd.randint(lo, hi)
        split(lo + 1, cut - 1, depth + 1)
        split(cut + 1, hi - 1, depth + 1)
    split(0, 64, 0)
    recs = [_fake(a, b, host) for a, b in ivs[:12]]
    fam = {}
    for r in recs:
        fam.setdefault(scale_of(r.tau_vertices, 1 / 8), []).append(r)
    plan = select_maximal(fam, host)
    covered = set()
    for r in plan.chosen:
        covered |= set(range(*r.tau))
    for r in recs:
        assert set(range(*r.tau)) <= covered


def test_nested_single_and_disjoint(staple):
    g, cfg, host = staple
    rec = find_all_shortcuts(cfg, host, Fraction(1, 2))[0][0]
    assert verify_nested_or_disjoint([rec])
    assert len(enclosed_faces(rec)) == 50


# ---------------------------------------------------------------------------
# independent oracle: parity-defined upper region + networkx shortest paths


def _oracle(cfg, host, kappa):
    g = cfg.geometry
    n = g.n
    V = host.vertices
    hedges = set(host.edges)

    def above(x, y):
        return _above_by_parity(host, x if x < n else x - 0.5, y)

    def has(a, b):
        return g.edge_between(a, b) in hedges

    adm = [i for i in range(1, len(V) - 1)
           if has((V[i][0] - 1, V[i][1]), V[i]) and has(V[i], (V[i][0] + 1, V[i][1]))]
    up = [(x, y) for x in range(-n, n + 1) for y in range(-n, n + 1) if above(x, y)]
    G = nx.Graph()
    G.add_nodes_from(up)
    ups = set(up)
    for (x, y) in up:
        for b in ((x + 1, y), (x, y + 1)):
            if b in ups and cfg.states[g.edge_between((x, y), b)] == 1:
                G.add_edge((x, y), b)
    faces = [(x + .5, y + .5) for x in range(-n, n) for y in range(-n, n) if above(x + .5, y + .5)]
    D = nx.Graph()
    D.add_nodes_from(faces)
    fs = set(faces)
    for (x, y) in faces:
        if (x + 1, y) in fs and cfg.states[g.edge_between((int(x + .5), int(y - .5)),
                                                           (int(x + .5), int(y + .5)))] == 0:
            D.add_edge((x, y), (x + 1, y))
        if (x, y + 1) in fs and cfg.states[g.edge_between((int(x - .5), int(y + .5)),
                                                           (int(x + .5), int(y + .5)))] == 0:
            D.add_edge((x, y), (x, y + 1))
    out = set()
    for i, j in itertools.combinations(adm, 2):
        (x0, y0), (xm, ym) = V[i], V[j]
        a, b = (x0, y0 + 1), (xm, ym + 1)
        if a not in ups or b not in ups:
            continue
        if cfg.states[g.edge_between(V[i], a)] != 1 or cfg.states[g.edge_between(V[j], b)] != 1:
            continue
        try:
            d = nx.shortest_path_length(G, a, b)
        except nx.NetworkXNoPath:
            continue
        if Fraction(d + 2, j - i) > kappa:
            continue
        s0, s1 = (x0 - .5, y0 + .5), (x0 - .5, y0 + 1.5)
        t0, t1 = (xm + .5, ym + .5), (xm + .5, ym + 1.5)
        if not {s0, s1, t0, t1} <= fs or not (D.has_edge(s0, s1) and D.has_edge(t0, t1)):
            continue
        H = D.subgraph(fs - {s0, t0})
        if not nx.has_path(H, s1, t1):
            continue
        out.add((i, j, d + 2))
    return out


@pytest.mark.parametrize("n", [4, 6])
def test_search_matches_oracle(n):
    seen = 0
    for i in range(60):
        cfg = config_for(n, i, 11)
        if not has_horizontal_crossing(cfg):
            continue
        host = lowest_crossing(cfg)
        for kappa in (Fraction(1, 2), Fraction(3)):
            fam = find_all_shortcuts(cfg, host, kappa)
            got = {(r.tau[0], r.tau[1], r.r_len) for v in fam.values() for r in v}
            want = _oracle(cfg, host, kappa)
            assert got == want
            seen += len(got)
    assert seen > 0


def test_upper_region_matches_parity():
    for i in range(30):
        cfg = config_for(6, i, 5)
        if not has_horizontal_crossing(cfg):
            continue
        g = cfg.geometry
        host = lowest_crossing(cfg)
        up = upper_region(g, host)
        for v in range(g.num_vertices):
            x, y = g.vertex(v)
            assert up.vertices[v] == _above_by_parity(host, x if x < 6 else x - .5, y)


def test_random_n16_records_revalidate():
    total = 0
    for i in range(80):
        cfg = config_for(16, i, 3)
        if not has_horizontal_crossing(cfg):
            continue
        host = lowest_crossing(cfg)
        for e in host.edges[::3]:
            for rec in find_shortcuts(cfg, host, e, 2, 3):
                total += 1
                assert all(revalidate(rec, cfg, host, 2, e).values())
                assert rec.gain <= 2
        fam = find_all_shortcuts(cfg, host, 2)
        recs = [r for v in fam.values() for r in v]
        assert verify_nested_or_disjoint(recs)
    assert total > 0


# ---------------------------------------------------------------------------
# U(k)


def test_u1_membership_table():
    R = u_region(1)
    got = {(x, y) for x in range(-7, 8) for y in range(-7, 8) if (x, y) in R.U}
    # [-6, 6] x [-2/3, 6] minus the open box of half-side 14/3
    want = {(x, y) for x in range(-6, 7) for y in range(0, 7) if max(abs(x), abs(y)) >= 5}
    assert got == want


@pytest.mark.parametrize("k", range(1, 9))
def test_tilde_regions_inside_u(k):
    R = u_region(k)
    u = 1 << k
    xs, ys = np.meshgrid(np.arange(-3 * u, 3 * u + 1), np.arange(-3 * u, 3 * u + 1))
    inner = R.U_tilde.contains(xs, ys) | R.V_tilde.contains(xs, ys)
    assert not (inner & ~R.U.contains(xs, ys)).any()
    assert (R.boundary_distance(xs[inner], ys[inner]) >= u / 6 - 1e-9).all()
    for B in (R.B1, R.B2):
        x0, x1, y0, y1 = B.bounds()
        assert -3 * u <= x0 and x1 <= 3 * u and -3 * u <= y0 and y1 <= 3 * u


def test_u1_distance_lattice_convention():
    R = u_region(1)
    pts = [(x, y) for x in range(-6, 7) for y in range(-6, 7)
           if (x, y) in R.U_tilde or (x, y) in R.V_tilde]
    outside = [(x, y) for x in range(-8, 9) for y in range(-8, 9) if (x, y) not in R.U]
    d = min(max(abs(a - c), abs(b - e)) for a, b in pts for c, e in outside)
    assert d >= 1


def test_u_region_errors():
    with pytest.raises(ValueError):
        u_region(0)
    with pytest.raises(OverflowError):
        u_region(40)


# ---------------------------------------------------------------------------
# arcs between the five-arm points (k = 3, n = 24)

from chemdist.arms import detect_Ek_prime_inner  # noqa: E402
from chemdist.lattice import sample_config  # noqa: E402
from chemdist.shortcuts import arc_edge_local, outermost_arc, shortest_arc  # noqa: E402

Z1, Z2 = (-21, 0), (21, 0)
FRAME = ([(-21, y) for y in range(0, 22)] + [(x, 21) for x in range(-20, 22)]
         + [(21, y) for y in range(20, -1, -1)])
EK_PATHS = [[(x, 0) for x in range(-24, -7)], [(x, 0) for x in range(8, 25)], FRAME,
            [(-21, 0), (-20, 0)] + [(-20, y) for y in range(-1, -25, -1)],
            [(-16, y) for y in range(-24, 3)]]
INNER = ([(-20, y) for y in range(0, 20)] + [(x, 19) for x in range(-19, 20)]
         + [(20, y) for y in range(19, -1, -1)] + [(21, 0)])
# star arms that seal the outer side, and a closed shield just outside the frame
SEAL_OPEN = [[(x, 0) for x in range(-24, -20)], [(-21, 0), (-20, 0), (-20, -1), (-20, -2),
             (-20, -3), (-20, -4)], [(x, 0) for x in range(18, 25)], [Z1, (-21, 1)], [Z2, (21, 1)]]
SEAL_CLOSED = ([((-22, y), (-21, y)) for y in range(1, 23)]
               + [((x, 22), (x, 23)) for x in range(-21, 22)]
               + [((21, y), (22, y)) for y in range(1, 23)]
               + [((-21, -1), (-20, -1)), ((21, 1), (22, 1)), ((20, -1), (21, -1))])


@pytest.fixture(scope="module")
def ek():
    g = make_box(24)
    return g, u_region(3), config_from_paths(g, EK_PATHS)


def test_unique_arc(ek):
    g, R, cfg = ek
    assert detect_Ek_prime_inner(cfg, 3) is not None
    arc = outermost_arc(cfg, R, Z1, Z2)
    assert arc.vertices == tuple(FRAME)
    assert shortest_arc(cfg, R, Z1, Z2).length == arc.length
    assert all((v in R.U_tilde) or (v in R.V_tilde) for v in arc.vertices)


def test_nested_arcs_and_chord(ek):
    g, R, _ = ek
    cfg = config_from_paths(g, EK_PATHS + [INNER])
    arc = outermost_arc(cfg, R, Z1, Z2)
    assert arc.vertices == tuple(FRAME)
    assert shortest_arc(cfg, R, Z1, Z2).length < arc.length


def test_no_arc(ek):
    g, R, _ = ek
    cfg = config_from_paths(g, EK_PATHS[:2])
    with pytest.raises(ValueError):
        outermost_arc(cfg, R, Z1, Z2)
    with pytest.raises(ValueError):
        shortest_arc(cfg, R, Z1, Z2)


def _seeded(g, seed, frame):
    st = sample_config(g, 0.5, seed).states.copy()
    for p in SEAL_OPEN + ([FRAME] if frame else []):
        for a, b in zip(p[:-1], p[1:]):
            st[g.edge_between(a, b)] = 1
    for a, b in SEAL_CLOSED:
        st[g.edge_between(a, b)] = 0
    return config_from_paths(g, []).with_states(st)


def test_arc_matches_local_oracle(ek):
    g, R, _ = ek
    checked = 0
    for s in range(40):
        cfg = _seeded(g, s, s % 2 == 0)
        try:
            arc = outermost_arc(cfg, R, Z1, Z2)
        except ValueError:
            continue
        checked += 1
        assert shortest_arc(cfg, R, Z1, Z2).length <= arc.length
        flags = {int(e) for e in np.flatnonzero(cfg.states)
                 if arc_edge_local(cfg, R, Z1, Z2, int(e))}
        assert flags == set(arc.edges)
    assert checked >= 15
