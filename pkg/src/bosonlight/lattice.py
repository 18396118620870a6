"""Finite hypercubic lattices, graph distances, balls X[r], boundaries and gamma.

Site ids are dense integers in row-major coordinate order (last axis fastest).
Distances are breadth-first-search hop counts; sets of sites are ``frozenset``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import InvalidArgument

GAMMA_STEP = Fraction(1, 4)
GAMMA_CAP = Fraction(64)


@dataclass(frozen=True, eq=False)
class LatticeGraph:
    dims: tuple[int, ...]
    periodic: tuple[bool, ...]
    coords: np.ndarray = field(repr=False)
    edges: tuple[tuple[int, int], ...] = field(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.dims)

    @property
    def n_sites(self) -> int:
        return len(self.coords)

    @property
    def sites(self) -> frozenset:
        return frozenset(range(self.n_sites))

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        nbr: list[list[int]] = [[] for _ in range(self.n_sites)]
        for i, j in self.edges:
            nbr[i].append(j)
            nbr[j].append(i)
        return tuple(tuple(sorted(n)) for n in nbr)

    @cached_property
    def distances(self) -> np.ndarray:
        """All-pairs hop distance (int), ``-1`` for disconnected pairs."""
        n = self.n_sites
        if not self.edges:
            d = np.full((n, n), -1, dtype=np.int64)
            np.fill_diagonal(d, 0)
            return d
        rows, cols = zip(*self.edges)
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
        d = shortest_path(adj, directed=False, unweighted=True)
        out = np.where(np.isinf(d), -1, d).astype(np.int64)
        return out

    @cached_property
    def diameter(self) -> int:
        return int(self.distances.max())

    def distance(self, i: int, j: int) -> int:
        return int(self.distances[i, j])

    def check_sites(self, sites: Iterable[int]) -> frozenset:
        s = frozenset(int(i) for i in sites)
        bad = [i for i in s if not 0 <= i < self.n_sites]
        if bad:
            raise InvalidArgument(f"site ids {sorted(bad)} outside lattice of {self.n_sites} sites")
        return s

    def site_id(self, coord: Sequence[int]) -> int:
        if len(coord) != self.dimension:
            raise InvalidArgument(f"coordinate {coord} has wrong dimension")
        return int(np.ravel_multi_index(tuple(coord), self.dims))


def build_lattice(dims: Sequence[int], periodic: bool | Sequence[bool] = False) -> LatticeGraph:
    """Hypercubic lattice with the given extents.

    ``periodic`` is either one flag for every axis or one flag per axis.  Axes of
    extent 1 or 2 never produce duplicate wrap-around edges.
    """
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise InvalidArgument("dims must be non-empty")
    if any(d < 1 for d in dims):
        raise InvalidArgument(f"all extents must be >= 1, got {dims}")
    if isinstance(periodic, (bool, np.bool_)):
        periodic = (bool(periodic),) * len(dims)
    periodic = tuple(bool(p) for p in periodic)
    if len(periodic) != len(dims):
        raise InvalidArgument("periodic flags must match number of axes")

    coords = np.array(list(itertools.product(*(range(d) for d in dims))), dtype=np.int64)
    coords = coords.reshape(-1, len(dims))
    edges = set()
    for site, c in enumerate(coords):
        for axis, extent in enumerate(dims):
            nxt = c.copy()
            nxt[axis] += 1
            if nxt[axis] == extent:
                if not periodic[axis] or extent <= 2:
                    continue
                nxt[axis] = 0
            other = int(np.ravel_multi_index(tuple(nxt), dims))
            if other != site:
                edges.add((min(site, other), max(site, other)))
    return LatticeGraph(dims, periodic, coords, tuple(sorted(edges)))


def graph_from_edges(n_sites: int, edges: Iterable[tuple[int, int]]) -> LatticeGraph:
    """General graph; treated as a 1-D lattice for every dimension-dependent formula."""
    if n_sites < 1:
        raise InvalidArgument("n_sites must be >= 1")
    clean = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if not (0 <= i < n_sites and 0 <= j < n_sites) or i == j:
            raise InvalidArgument(f"bad edge ({i}, {j})")
        clean.add((min(i, j), max(i, j)))
    coords = np.arange(n_sites, dtype=np.int64).reshape(-1, 1)
    return LatticeGraph((n_sites,), (False,), coords, tuple(sorted(clean)))


def distance_to_set(lattice: LatticeGraph, X: Iterable[int]) -> np.ndarray:
    """d(i, X) for every site i; sites in another component get a large sentinel."""
    X = lattice.check_sites(X)
    if not X:
        raise InvalidArgument("X must be non-empty")
    d = lattice.distances[sorted(X)].copy()
    d[d < 0] = np.iinfo(np.int64).max // 4
    return d.min(axis=0)


def ball(lattice: LatticeGraph, X: Iterable[int], r: int) -> frozenset:
    """X[r] = {i : d(i, X) <= r}."""
    if r < 0:
        raise InvalidArgument("r must be non-negative")
    d = distance_to_set(lattice, X)
    return frozenset(np.flatnonzero(d <= r).tolist())


def boundary(lattice: LatticeGraph, X: Iterable[int]) -> frozenset:
    """Sites of X at distance one from the complement."""
    X = lattice.check_sites(X)
    nbr = lattice.neighbors
    return frozenset(i for i in X if any(j not in X for j in nbr[i]))


def complement(lattice: LatticeGraph, X: Iterable[int]) -> frozenset:
    return lattice.sites - lattice.check_sites(X)


@dataclass(frozen=True)
class StructuralConstant:
    gamma: float
    max_ell_verified: int
    exact: Fraction = field(repr=False, default=Fraction(0))


def _box_seeds(lattice: LatticeGraph):
    """Singletons and every axis-aligned box (intervals in 1-D), excluding the full lattice."""
    full = lattice.sites
    seen = set()
    for i in range(lattice.n_sites):
        seen.add(frozenset((i,)))
        yield frozenset((i,))
    ranges = [[(a, b) for a in range(d) for b in range(a, d)] for d in lattice.dims]
    for box in itertools.product(*ranges):
        grids = [range(a, b + 1) for a, b in box]
        sites = frozenset(lattice.site_id(c) for c in itertools.product(*grids))
        if sites == full or sites in seen:
            continue
        seen.add(sites)
        yield sites


def gamma_requirement(lattice: LatticeGraph, X: frozenset, ell: int) -> Fraction:
    """Smallest gamma satisfying both structural inequalities for this (X, ell)."""
    D = lattice.dimension
    dX = boundary(lattice, X)
    if not dX:
        raise InvalidArgument("structural inequalities undefined for X with empty boundary")
    Xl = ball(lattice, X, ell)
    need_growth = Fraction(len(Xl - X) + 1, ell**D * len(dX))
    need_surface = Fraction(len(boundary(lattice, Xl)), ell ** (D - 1) * len(X))
    return max(need_growth, need_surface)


def estimate_gamma(lattice: LatticeGraph, max_ell: int) -> StructuralConstant:
    """Smallest gamma on a 1/4 grid (and >= 1) satisfying

    ``|X[l] \\ X| <= gamma l^D |dX| - 1`` and ``|d(X[l])| <= gamma l^(D-1) |X|``

    for all singleton and box seeds X != Lambda and ``1 <= l <= max_ell``.
    """
    if max_ell < 1:
        raise InvalidArgument("max_ell must be >= 1")
    if lattice.n_sites < 2:
        raise InvalidArgument("gamma needs at least two sites")
    need = Fraction(1)
    for X in _box_seeds(lattice):
        if not boundary(lattice, X):
            continue
        for ell in range(1, max_ell + 1):
            need = max(need, gamma_requirement(lattice, X, ell))
    gamma = Fraction(math.ceil(need / GAMMA_STEP)) * GAMMA_STEP
    if gamma > GAMMA_CAP:
        raise InvalidArgument(f"no gamma <= {GAMMA_CAP} satisfies the structural bounds (need {float(need)})")
    return StructuralConstant(float(gamma), max_ell, gamma)
