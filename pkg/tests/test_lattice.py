import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemdist.lattice import (
    HORIZONTAL, VERTICAL, Config, annulus, box_mask, derive_seed, dual_of, make_box, primal_of,
    rect, reflect_x, reflect_y, sample_config)


@pytest.mark.parametrize("n,E", [(1, 12), (2, 40), (64, 33024)])
def test_edge_counts(n, E):
    g = make_box(n)
    assert g.num_edges == E == 4 * n * (2 * n + 1)
    assert g.num_vertices == (2 * n + 1) ** 2


def test_make_box_rejects_zero():
    with pytest.raises(ValueError):
        make_box(0)
    with pytest.raises((ValueError, OverflowError)):
        make_box(1 << 40)


@pytest.mark.parametrize("n", [1, 2, 3, 7, 16, 64])
def test_encode_decode_bijection(n):
    g = make_box(n)
    seen = set()
    for e in range(g.num_edges):
        x, y, o = g.decode(e)
        assert g.encode(x, y, o) == e
        seen.add((x, y, o))
    assert len(seen) == g.num_edges
    with pytest.raises(IndexError):
        g.decode(g.num_edges)


def test_endpoints_match_orientation():
    g = make_box(3)
    for e in range(g.num_edges):
        (ax, ay), (bx, by) = g.endpoints(e)
        _, _, o = g.decode(e)
        assert (bx - ax, by - ay) == ((1, 0) if o == HORIZONTAL else (0, 1))
        assert g.edge_between((bx, by), (ax, ay)) == e


def test_dual_examples():
    g = make_box(2)
    h = dual_of(g, g.edge_between((0, 0), (1, 0)))
    assert set(h.endpoints) == {(0.5, -0.5), (0.5, 0.5)}
    v = dual_of(g, g.edge_between((0, 0), (0, 1)))
    assert set(v.endpoints) == {(-0.5, 0.5), (0.5, 0.5)}


def test_dual_involution_b4():
    g = make_box(4)
    for e in range(g.num_edges):
        d = dual_of(g, e)
        (ax, ay), (bx, by) = g.endpoints(e)
        assert d.midpoint == ((ax + bx) / 2, (ay + by) / 2)
        assert primal_of(g, d) == e


def test_sampling_extremes():
    g = make_box(3)
    assert sample_config(g, 1.0, 5).states.all()
    assert not sample_config(g, 0.0, 5).states.any()
    with pytest.raises(ValueError):
        sample_config(g, 1.5, 0)


def test_sampling_determinism():
    g = make_box(8)
    a = sample_config(g, 0.5, 123)
    b = sample_config(g, 0.5, 123)
    assert np.array_equal(a.states, b.states)
    assert not np.array_equal(a.states, sample_config(g, 0.5, 124).states)


def test_open_fraction_binomial():
    # 10^5 configurations of B(1): 1.2 million Bernoulli(1/2) edge states
    g = make_box(1)
    total = sum(int(sample_config(g, 0.5, derive_seed(1, i)).states.sum()) for i in range(100_000))
    m = 12 * 100_000
    assert abs(total / m - 0.5) <= 3 * np.sqrt(0.25 / m)


def test_config_is_immutable():
    g = make_box(2)
    c = sample_config(g, 0.5, 1)
    with pytest.raises(ValueError):
        c.states[0] = 1
    with pytest.raises(ValueError):
        Config(g, np.zeros(3, dtype=np.uint8), 0.5)


def test_annulus_examples():
    g = make_box(2)
    assert np.array_equal(annulus(0, 2).vertex_mask(g), box_mask(2).vertex_mask(g))
    A = annulus(1, 2)
    assert A.vertex_mask(g).sum() == 25 - 9
    assert (2, 0) in A and (1, 0) not in A
    with pytest.raises(ValueError):
        annulus(2, 2)


def test_region_union():
    m = rect(0, 1, 0, 1) | rect(3, 4, 3, 4)
    assert (0, 0) in m and (4, 4) in m and (2, 2) not in m
    assert m.bounds() == (0, 4, 0, 4)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 63))
def test_reflections_are_involutions(n, seed):
    c = sample_config(make_box(n), 0.5, seed)
    assert np.array_equal(reflect_x(reflect_x(c)).states, c.states)
    assert np.array_equal(reflect_y(reflect_y(c)).states, c.states)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.data())
def test_reflect_x_moves_edges(n, data):
    g = make_box(n)
    c = sample_config(g, 0.5, data.draw(st.integers(0, 2 ** 32)))
    r = reflect_x(c)
    e = data.draw(st.integers(0, g.num_edges - 1))
    (ax, ay), (bx, by) = g.endpoints(e)
    assert r.states[g.edge_between((-ax, ay), (-bx, by))] == c.states[e]


def test_sides():
    g = make_box(3)
    xs, ys = g.vertex_xy
    assert (xs[g.side_vertices("left")] == -3).all()
    assert (ys[g.side_vertices("top")] == 3).all()
    dx, dy = g.dual_xy
    assert (dy[g.dual_side_vertices("bottom")] + 0.5 == -3.5).all()
    assert VERTICAL != HORIZONTAL
