"""Symbolic Bose-Hubbard-type Hamiltonians and their sparse assembly.

A Hamiltonian is a list of hoppings ``J_ij (b_i b_j^dagger + h.c.)`` plus a
potential written as monomials in the number operators.  Keeping terms
symbolic makes restriction to a subset X, the coupling bookkeeping (J-bar,
interaction length k, degree v-bar, bound g) and piecewise-constant schedules
straightforward.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument
from .fock import (
    FockBasis,
    SparseOperator,
    _canonical,
    hopping_triplets,
)
from .lattice import LatticeGraph, build_lattice, estimate_gamma


@dataclass(frozen=True)
class PotentialTerm:
    """``sum_m coeff_m prod_a n_{sites[a]}^{exponents_m[a]}``."""

    sites: tuple[int, ...]
    monomials: tuple[tuple[tuple[int, ...], float], ...]

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self.monomials), default=0)

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        occ = states[:, list(self.sites)].astype(float)
        out = np.zeros(len(states))
        for exps, coeff in self.monomials:
            out += coeff * np.prod(occ ** np.asarray(exps, dtype=float), axis=1)
        return out


@dataclass(frozen=True)
class ScheduleInterval:
    t_start: float
    t_end: float
    hopping_scale: float | tuple[float, ...] = 1.0
    potential_scale: float | tuple[float, ...] = 1.0


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    lattice: LatticeGraph
    hoppings: tuple[tuple[int, int, complex], ...]
    potential: tuple[PotentialTerm, ...] = ()
    g: float | None = None
    schedule: tuple[ScheduleInterval, ...] | None = None
    region: frozenset | None = None
    check_adjacent: bool = field(default=True, repr=False)

    def __post_init__(self):
        n = self.lattice.n_sites
        edges = set(self.lattice.edges)
        for i, j, _ in self.hoppings:
            if i == j or not (0 <= i < n and 0 <= j < n):
                raise InvalidArgument(f"invalid hopping ({i}, {j})")
            if self.check_adjacent and (min(i, j), max(i, j)) not in edges:
                raise InvalidArgument(f"hopping ({i}, {j}) joins non-adjacent sites")
        for term in self.potential:
            for s in term.sites:
                if not 0 <= s < n:
                    raise InvalidArgument(f"potential term on invalid site {s}")
            for exps, _ in term.monomials:
                if len(exps) != len(term.sites) or any(e < 0 for e in exps):
                    raise InvalidArgument(f"bad exponent vector {exps} for sites {term.sites}")

    @property
    def Jbar(self) -> float:
        return max((abs(J) for *_, J in self.hoppings), default=0.0)

    @property
    def interaction_range(self) -> int:
        d = self.lattice.distances
        k = 0
        for term in self.potential:
            s = list(term.sites)
            if len(s) > 1:
                k = max(k, int(d[np.ix_(s, s)].max()))
        return k

    @property
    def vbar(self) -> int:
        return max((t.degree for t in self.potential), default=0)

    @property
    def coupling_bound(self) -> float:
        """Declared g, or the largest per-site sum of |coefficients| when undeclared."""
        if self.g is not None:
            return self.g
        per_site = np.zeros(self.lattice.n_sites)
        for term in self.potential:
            weight = sum(abs(c) for _, c in term.monomials)
            for s in set(term.sites):
                per_site[s] += weight
        return float(per_site.max()) if len(per_site) else 0.0

    @property
    def time_dependent(self) -> bool:
        return self.schedule is not None

    def scales_at(self, time: float | None):
        """Per-hopping and per-potential-term scale factors at ``time``."""
        nh, nv = len(self.hoppings), len(self.potential)
        if self.schedule is None:
            return np.ones(nh), np.ones(nv)
        if time is None:
            raise InvalidArgument("scheduled Hamiltonian needs a time")
        last = self.schedule[-1]
        for iv in self.schedule:
            if iv.t_start <= time < iv.t_end or (iv is last and time == iv.t_end):
                return (np.broadcast_to(np.asarray(iv.hopping_scale, dtype=float), (nh,)),
                        np.broadcast_to(np.asarray(iv.potential_scale, dtype=float), (nv,)))
        raise InvalidArgument(f"time {time} outside schedule")


def bose_hubbard_spec(lattice: LatticeGraph, J: float, U: float, mu: float = 0.0) -> HamiltonianSpec:
    """Uniform hopping on every edge plus ``(U/2) n(n-1) - mu n`` per site."""
    hops = tuple((i, j, complex(J)) for i, j in lattice.edges)
    pot = tuple(
        PotentialTerm((i,), (((2,), U / 2), ((1,), -U / 2 - mu)))
        for i in range(lattice.n_sites)
    )
    return HamiltonianSpec(lattice, hops, pot, g=abs(U) / 2 + abs(mu))


def chain_spec(n_sites: int, hoppings, potential=(), g=None) -> HamiltonianSpec:
    """Convenience for the small fixed geometries of the gate protocols."""
    return HamiltonianSpec(build_lattice([n_sites]), tuple(hoppings), tuple(potential), g=g)


def subset_hamiltonian(spec: HamiltonianSpec, X: Iterable[int]) -> HamiltonianSpec:
    """Keep only hoppings and potential terms supported inside X."""
    X = spec.lattice.check_sites(X)
    if not X:
        raise InvalidArgument("X must be non-empty")
    keep_h = [k for k, (i, j, _) in enumerate(spec.hoppings) if i in X and j in X]
    keep_v = [k for k, t in enumerate(spec.potential) if set(t.sites) <= X]
    schedule = None
    if spec.schedule is not None:
        schedule = tuple(
            replace(
                iv,
                hopping_scale=_select(iv.hopping_scale, keep_h),
                potential_scale=_select(iv.potential_scale, keep_v),
            )
            for iv in spec.schedule
        )
    return replace(
        spec,
        hoppings=tuple(spec.hoppings[k] for k in keep_h),
        potential=tuple(spec.potential[k] for k in keep_v),
        schedule=schedule,
        region=X,
    )


def _select(scale, keep):
    if np.ndim(scale) == 0:
        return scale
    return tuple(scale[k] for k in keep)


def crossing_hoppings(spec: HamiltonianSpec, X: Iterable[int]) -> tuple:
    """Hoppings with exactly one endpoint in X (the boundary hopping part)."""
    X = frozenset(X)
    return tuple(h for h in spec.hoppings if (h[0] in X) != (h[1] in X))


def hopping_matrix(spec: HamiltonianSpec, basis: FockBasis, time: float | None = None) -> sp.csr_matrix:
    hscale, _ = spec.scales_at(time)
    rows, cols, vals = [], [], []
    for (i, j, J), c in zip(spec.hoppings, hscale):
        r, s, amp = hopping_triplets(basis, i, j)
        rows += [r, s]
        cols += [s, r]
        vals += [c * J * amp, np.conj(c * J) * amp]
    if not rows:
        return _canonical(sp.csr_matrix((basis.dim, basis.dim)))
    m = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(basis.dim, basis.dim),
        dtype=np.complex128,
    )
    return _canonical(m)


def potential_diagonal(spec: HamiltonianSpec, basis: FockBasis, time: float | None = None) -> np.ndarray:
    _, vscale = spec.scales_at(time)
    diag = np.zeros(basis.dim)
    for term, c in zip(spec.potential, vscale):
        diag += c * term.evaluate(basis.states)
    return diag


def assemble(spec: HamiltonianSpec, basis: FockBasis, time: float | None = None) -> SparseOperator:
    """Sparse matrix of the (projected) Hamiltonian on ``basis``."""
    if basis.n_sites != spec.lattice.n_sites:
        raise InvalidArgument(f"basis has {basis.n_sites} sites, lattice {spec.lattice.n_sites}")
    m = hopping_matrix(spec, basis, time) + sp.diags(potential_diagonal(spec, basis, time))
    return SparseOperator(_canonical(m)).checked()


def effective(spec: HamiltonianSpec, basis: FockBasis, projector: SparseOperator, time=None) -> SparseOperator:
    """``P H P`` for a diagonal 0/1 projector P."""
    if not projector.is_diagonal:
        raise InvalidArgument("projector must be diagonal in the number basis")
    d = projector.diagonal()
    if not np.allclose(d * d, d, atol=1e-12) or np.any(np.abs(d.imag) > 1e-12):
        raise InvalidArgument("projector is not idempotent")
    H = assemble(spec, basis, time)
    P = projector.matrix
    return SparseOperator(_canonical(P @ H.matrix @ P), H.hermitian)


@dataclass(eq=False)
class System:
    """A Hamiltonian together with the basis it is assembled on."""

    spec: HamiltonianSpec
    basis: FockBasis
    gamma: float | None = None

    @property
    def lattice(self) -> LatticeGraph:
        return self.spec.lattice

    @cached_property
    def H(self) -> SparseOperator:
        if self.spec.time_dependent:
            raise InvalidArgument("use assemble(spec, basis, time) for scheduled Hamiltonians")
        return assemble(self.spec, self.basis)

    def restricted(self, X: Iterable[int]) -> SparseOperator:
        return assemble(subset_hamiltonian(self.spec, X), self.basis)

    def structural_gamma(self, max_ell: int = 4) -> float:
        if self.gamma is None:
            self.gamma = estimate_gamma(self.lattice, max_ell).gamma
        return self.gamma
