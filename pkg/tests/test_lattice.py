import itertools
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bosonlight.errors import InvalidArgument
from bosonlight.lattice import (
    ball,
    boundary,
    build_lattice,
    complement,
    estimate_gamma,
    gamma_requirement,
    graph_from_edges,
)


def bfs_oracle(n, edges, src):
    adj = {i: set() for i in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    dist = {src: 0}
    frontier = [src]
    while frontier:
        nxt = []
        for i in frontier:
            for j in adj[i]:
                if j not in dist:
                    dist[j] = dist[i] + 1
                    nxt.append(j)
        frontier = nxt
    return dist


@pytest.mark.parametrize(
    "dims, periodic, n_sites, n_edges",
    [([5], False, 5, 4), ([2, 3], False, 6, 7), ([4], True, 4, 4), ([3, 3], True, 9, 18), ([1], False, 1, 0)],
)
def test_site_and_edge_counts(dims, periodic, n_sites, n_edges):
    lat = build_lattice(dims, periodic)
    assert lat.n_sites == n_sites
    assert len(lat.edges) == n_edges


def test_zero_extent_rejected():
    with pytest.raises(InvalidArgument):
        build_lattice([3, 0])


def test_row_major_ids():
    lat = build_lattice([2, 3])
    assert lat.site_id((1, 2)) == 5
    assert tuple(lat.coords[4]) == (1, 1)


def test_ball_examples():
    chain = build_lattice([7])
    assert ball(chain, {2}, 2) == frozenset({0, 1, 2, 3, 4})
    assert ball(chain, chain.sites, 3) == chain.sites
    grid = build_lattice([2, 3])
    assert ball(grid, {0}, 1) == frozenset({0, 1, 3})


def test_boundary_examples():
    chain = build_lattice([7])
    assert boundary(chain, {1, 2, 3}) == frozenset({1, 3})
    assert boundary(chain, chain.sites) == frozenset()
    grid = build_lattice([3, 3])
    X = grid.sites - {4}
    # brute force: sites of X at distance 1 from the complement
    expected = {i for i in X if min(grid.distance(i, j) for j in complement(grid, X)) == 1}
    assert boundary(grid, X) == expected == {1, 3, 5, 7}


lattices = st.sampled_from([[50], [7, 7], [3, 4, 4], [10], [5, 5]])


@given(dims=lattices, data=st.data())
def test_ball_monotone(dims, data):
    lat = build_lattice(dims)
    X = data.draw(st.sets(st.integers(0, lat.n_sites - 1), min_size=1, max_size=5))
    r1 = data.draw(st.integers(0, 6))
    r2 = data.draw(st.integers(r1, 8))
    assert ball(lat, X, 0) == frozenset(X)
    assert ball(lat, X, r1) <= ball(lat, X, r2)


@given(dims=lattices, data=st.data())
def test_boundary_of_ball_lies_in_outer_shell(dims, data):
    lat = build_lattice(dims)
    X = data.draw(st.sets(st.integers(0, lat.n_sites - 1), min_size=1, max_size=5))
    r = data.draw(st.integers(1, 6))
    shell = ball(lat, X, r) - ball(lat, X, r - 1)
    assert boundary(lat, ball(lat, X, r)) <= shell


@given(dims=st.lists(st.integers(1, 5), min_size=1, max_size=3))
def test_distance_is_l1_on_open_lattice(dims):
    lat = build_lattice(dims)
    coords = np.asarray(lat.coords)
    l1 = np.abs(coords[:, None, :] - coords[None, :, :]).sum(axis=2)
    np.testing.assert_array_equal(lat.distances, l1)


@given(dims=st.lists(st.integers(1, 5), min_size=1, max_size=2), periodic=st.booleans())
def test_distance_matches_bfs_oracle(dims, periodic):
    lat = build_lattice(dims, periodic)
    for src in range(lat.n_sites):
        oracle = bfs_oracle(lat.n_sites, lat.edges, src)
        for j, d in oracle.items():
            assert lat.distances[src, j] == d


@given(dims=st.lists(st.integers(2, 4), min_size=1, max_size=2), periodic=st.booleans())
def test_metric_axioms(dims, periodic):
    d = build_lattice(dims, periodic).distances
    assert np.all(np.diag(d) == 0)
    assert np.array_equal(d, d.T)
    n = len(d)
    for k in range(n):
        assert np.all(d <= d[:, [k]] + d[[k], :])


def test_every_site_has_a_neighbor():
    for dims in ([2], [3, 3], [2, 2, 2]):
        lat = build_lattice(dims)
        assert all(len(nb) >= 1 for nb in lat.neighbors)


def test_graph_from_edges_disconnected_distance():
    g = graph_from_edges(4, [(0, 1), (2, 3)])
    assert g.distance(0, 1) == 1
    assert g.distance(0, 3) == -1


# -- structural constant -------------------------------------------------------

def brute_gamma_need(lat, X, ell):
    """Both inequalities solved for gamma by direct counting (no library set helpers)."""
    d = lat.distances
    X = sorted(X)
    others = [i for i in range(lat.n_sites) if i not in X]
    dX = [i for i in X if any(d[i, j] == 1 for j in others)]
    Xl = [i for i in range(lat.n_sites) if min(d[i, x] for x in X) <= ell]
    out = [i for i in range(lat.n_sites) if i not in Xl]
    dXl = [i for i in Xl if any(d[i, j] == 1 for j in out)]
    D = lat.dimension
    return max(Fraction(len(Xl) - len(X) + 1, ell**D * len(dX)), Fraction(len(dXl), ell ** (D - 1) * len(X)))


def test_chain_gamma_is_three():
    lat = build_lattice([12])
    sc = estimate_gamma(lat, 8)
    assert sc.gamma == 3.0
    assert sc.max_ell_verified == 8


def test_interior_singleton_forces_three():
    lat = build_lattice([9])
    assert gamma_requirement(lat, frozenset({4}), 1) == 3
    assert brute_gamma_need(lat, {4}, 1) == 3


def test_grid_gamma_finite():
    sc = estimate_gamma(build_lattice([6, 6]), 3)
    assert 1 <= sc.gamma <= 64
    assert sc.gamma == 5.0
    assert (sc.exact * 4).denominator == 1


def test_max_ell_must_be_positive():
    with pytest.raises(InvalidArgument):
        estimate_gamma(build_lattice([4]), 0)


@pytest.mark.parametrize("dims, max_ell", [([12], 6), ([6, 6], 3), ([5, 4], 2)])
def test_gamma_holds_on_random_sample(dims, max_ell):
    lat = build_lattice(dims)
    gamma = Fraction(estimate_gamma(lat, max_ell).exact)
    rng = random.Random(1)
    checked = 0
    while checked < 100:
        corners = [sorted(rng.sample(range(e), 2)) if e > 1 else [0, 0] for e in dims]
        if rng.random() < 0.3:
            corners = [[c, c] for c in (rng.randrange(e) for e in dims)]
        X = {lat.site_id(c) for c in itertools.product(*(range(a, b + 1) for a, b in corners))}
        if X == set(lat.sites):
            continue
        ell = rng.randint(1, max_ell)
        assert brute_gamma_need(lat, X, ell) <= gamma
        checked += 1
