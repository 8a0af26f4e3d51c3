from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemdist.arms import (
    Arm, ArmSpec, CircuitEventRecord, EstimateRecord, LandingSpec, a3_spec, annulus_events,
    detect_a3, detect_arm_event, detect_circuit_stack, detect_Ek_prime_inner,
    detect_five_arm_point, ek_prime_regions, estimate_pi3, five_arm_points,
    measure_conditional_frequency)
from chemdist.crossings import has_dual_vertical_crossing, has_horizontal_crossing
from chemdist.lattice import Config, config_from_paths, derive_seed, make_box, sample_config
from chemdist.sampling import InsufficientConditioning
from oracles import a3_oracle, all_states, circuit_defects, winding_cycles

PI3_1 = Fraction(3249, 4096)


def _const(n, value):
    g = make_box(n)
    return Config(g, np.full(g.num_edges, value, dtype=np.uint8), 0.5)


def test_a3_exact_b1():
    g = make_box(1)
    hits = 0
    for s in all_states(g.num_edges):
        c = Config(g, s, 0.5)
        d = detect_a3(c, 1)
        assert d == a3_oracle(c, 1)
        hits += d
    assert Fraction(hits, 4096) == PI3_1


def test_a3_is_local():
    # pi3(1) inside B(2): the outer ring of edges does not matter
    g1, g2 = make_box(1), make_box(2)
    rng = np.random.default_rng(0)
    for s in list(all_states(g1.num_edges))[::37]:
        st2 = rng.integers(0, 2, g2.num_edges).astype(np.uint8)
        for e in range(g1.num_edges):
            st2[g2.edge_between(*g1.endpoints(e))] = s[e]
        assert detect_a3(Config(g2, st2, 0.5), 1) == detect_a3(Config(g1, s, 0.5), 1)


@pytest.mark.parametrize("R", [2, 3])
def test_a3_matches_oracle(R):
    g = make_box(3)
    for i in range(150):
        c = sample_config(g, 0.5, derive_seed(21, R, i))
        assert detect_a3(c, R) == a3_oracle(c, R)


def test_a3_examples():
    assert not detect_a3(_const(3, 1))
    assert not detect_a3(_const(3, 0))
    # open horizontal line through the centre, closed column below (1/2, -1/2)
    g = make_box(3)
    c = config_from_paths(g, [[(x, 0) for x in range(-3, 4)]])
    assert detect_a3(c)
    with pytest.raises(ValueError):
        detect_a3(c, 4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 40))
def test_a3_monotone_in_radius(seed):
    c = sample_config(make_box(6), 0.5, seed)
    flags = [detect_a3(c, r) for r in range(1, 7)]
    assert all(a or not b for a, b in zip(flags[:-1], flags[1:]))


def test_arm_spec_validation():
    with pytest.raises(ValueError):
        ArmSpec((), outer=2)
    with pytest.raises(ValueError):
        ArmSpec((Arm("open"),), outer=2, inner=2)
    spec = a3_spec(2, inner=1)
    assert detect_arm_event(_const(3, 1), ArmSpec((Arm("open"),), outer=2, inner=1))
    assert not detect_arm_event(_const(3, 1), spec)


def test_estimate_pi3_extremes_and_exact():
    rec = estimate_pi3(2, 50, seed=1, p=1.0)
    assert rec.mean == 0 and rec.se == 0
    rec = estimate_pi3(1, 4000, seed=2)
    assert abs(rec.mean - float(PI3_1)) <= 3 * rec.se
    assert rec.ci_lo == pytest.approx(rec.mean - 1.96 * rec.se)


def test_estimate_pi3_workers_agree():
    a = estimate_pi3(8, 120, seed=9, workers=1)
    b = estimate_pi3(8, 120, seed=9, workers=2)
    assert a == b


def test_pi3_nonincreasing():
    recs = [estimate_pi3(n, 1500, seed=4) for n in (2, 4, 8, 16)]
    for a, b in zip(recs[:-1], recs[1:]):
        assert b.mean <= a.mean + 2 * np.hypot(a.se, b.se)


def test_estimate_record_from_values():
    r = EstimateRecord.from_values("x", 3, [0, 1, 1, 0])
    assert r.mean == 0.5 and r.se == pytest.approx(np.std([0, 1, 1, 0], ddof=1) / 2)
    with pytest.raises(ValueError):
        EstimateRecord.from_values("x", 3, [])


def test_conditional_frequency_trivial():
    r = measure_conditional_frequency(has_horizontal_crossing, has_horizontal_crossing, 4, 60, 1)
    assert r.mean == 1 and r.attempts >= 60
    r = measure_conditional_frequency(has_dual_vertical_crossing, has_horizontal_crossing, 4,
                                      60, 1)
    assert r.mean == 0
    with pytest.raises(InsufficientConditioning):
        measure_conditional_frequency(has_horizontal_crossing, has_horizontal_crossing, 2, 5, 1,
                                      p=0.0, max_attempts=200)


# five-arm points and the inner part of E_k' (k = 3, n = 24)

EK_PATHS = [[(x, 0) for x in range(-24, -7)], [(x, 0) for x in range(8, 25)],
            [(-21, y) for y in range(0, 22)] + [(x, 21) for x in range(-20, 22)]
            + [(21, y) for y in range(20, -1, -1)],
            [(-21, 0), (-20, 0)] + [(-20, y) for y in range(-1, -25, -1)],
            [(-16, y) for y in range(-24, 3)]]


def test_five_arm_extremes():
    for v in (0, 1):
        c = _const(24, v)
        for which in ("star1", "star2"):
            assert detect_five_arm_point(c, landing=LandingSpec(which, 3)) is None
        assert detect_Ek_prime_inner(c, 3) is None
    with pytest.raises(ValueError):
        detect_five_arm_point(_const(24, 1))


def test_five_arm_points_hand_built():
    c = config_from_paths(make_box(24), EK_PATHS)
    assert five_arm_points(c, LandingSpec("star1", 3).search_box, LandingSpec("star1", 3)) \
        == [(-21, 0)]
    assert detect_five_arm_point(c, landing=LandingSpec("star2", 3)) == (21, 0)
    assert detect_Ek_prime_inner(c, 3) == ((-21, 0), (21, 0))
    # cutting the first step of arm c at star1 removes the point
    st_ = c.states.copy()
    st_[c.geometry.edge_between((-21, 0), (-20, 0))] = 0
    assert detect_five_arm_point(c.with_states(st_), landing=LandingSpec("star1", 3)) is None


def test_five_arm_points_unique_on_seeded():
    g = make_box(24)
    base = config_from_paths(g, EK_PATHS).states
    found = 0
    for s in range(30):
        st_ = sample_config(g, 0.5, derive_seed(31, s)).states | base
        st_[np.random.default_rng(s).integers(0, g.num_edges, 40)] = 0
        c = Config(g, st_, 0.5)
        for which in ("star1", "star2"):
            L = LandingSpec(which, 3)
            pts = five_arm_points(c, L.search_box, L)
            assert len(pts) <= 1
            found += len(pts)
            assert detect_five_arm_point(c, landing=L) == (pts[0] if pts else None)
    assert found > 0


def test_ek_regions_nonempty():
    regions = ek_prime_regions(3)
    g = make_box(24)
    for key, r in regions.items():
        assert r.vertex_mask(g).any(), key


# circuit events


def test_annulus_events_extremes():
    for m in range(4):
        assert annulus_events(_const(16, 0), 1, m) == (True, False)
        assert annulus_events(_const(16, 1), 1, m) == (False, True)


def test_annulus_events_match_cycles():
    g = make_box(2)
    cyc = {k: winding_cycles(g, 1, 2, k) for k in ("closed-dual", "open")}
    for i in range(200):
        c = sample_config(g, 0.5, derive_seed(41, i))
        C, D = annulus_events(c, 1, 0)
        assert C == (circuit_defects(c.states, cyc["closed-dual"], "closed-dual") <= 2)
        assert D == (circuit_defects(c.states, cyc["open"], "open") <= 1)


@pytest.mark.parametrize("p", [0.3, 0.5, 0.7])
def test_annulus_routes_agree(p):
    g = make_box(16)
    for i in range(10):
        c = sample_config(g, p, derive_seed(42, i))
        for m in range(4):
            assert annulus_events(c, 1, m, "bfs") == annulus_events(c, 1, m, "flow")


def test_circuit_stack_all_closed():
    rec = detect_circuit_stack(_const(1024, 0), 1)
    rec.check()
    assert all(rec.occurred_C) and not any(rec.occurred_D)
    assert rec.occurred_hatC == (False,) and rec.J_count == 0
    with pytest.raises(ValueError):
        detect_circuit_stack(_const(16, 0), 1)


def test_circuit_record_check():
    C, D = (True,) * 10, (True,) + (False,) * 9
    rec = CircuitEventRecord(1, C, D, (True,), (True,), 1, 1, 0, (0, 1))
    rec.check()
    with pytest.raises(AssertionError):
        CircuitEventRecord(1, C, D, (False,), (False,), 0, 0, 0, (0, 1)).check()
