import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from bosonlight.errors import InvalidArgument
from bosonlight.fock import build_basis, diagonal_operator, identity, op_number, projector_caps, projector_number
from bosonlight.hamiltonian import (
    HamiltonianSpec,
    PotentialTerm,
    ScheduleInterval,
    System,
    assemble,
    bose_hubbard_spec,
    crossing_hoppings,
    effective,
    hopping_matrix,
    subset_hamiltonian,
)
from bosonlight.lattice import build_lattice


def test_two_site_hand_evaluation():
    J, U, mu = 0.7, 1.9, 0.3
    spec = bose_hubbard_spec(build_lattice([2]), J, U, mu)
    basis = build_basis(2, 2, 2)
    H = assemble(spec, basis).toarray()
    i20, i11, i02 = (basis.index(s) for s in [(2, 0), (1, 1), (0, 2)])
    assert H[i20, i20] == pytest.approx(U - 2 * mu)
    assert H[i11, i11] == pytest.approx(-2 * mu)
    assert H[i02, i02] == pytest.approx(U - 2 * mu)
    assert H[i20, i11] == pytest.approx(J * math.sqrt(2))
    assert H[i11, i02] == pytest.approx(J * math.sqrt(2))
    assert H[i20, i02] == 0


def test_bookkeeping():
    spec = bose_hubbard_spec(build_lattice([3, 3]), -0.5, 4.0, -1.5)
    assert spec.g == abs(4.0) / 2 + abs(-1.5)
    assert spec.Jbar == 0.5
    assert spec.interaction_range == 0
    assert spec.vbar == 2


def test_zero_hamiltonian_and_diagonal():
    lat = build_lattice([3])
    basis = build_basis(lat, 2, 2)
    assert assemble(bose_hubbard_spec(lat, 0, 0, 0), basis).matrix.nnz == 0
    H = assemble(bose_hubbard_spec(lat, 0, 2.0, 0), basis)
    assert H.is_diagonal


def test_single_particle_tridiagonal():
    lat = build_lattice([3])
    H = assemble(bose_hubbard_spec(lat, 1.25, 5.0), build_basis(lat, 1, 1)).toarray()
    # states ordered (0,0,1), (0,1,0), (1,0,0)
    np.testing.assert_allclose(H, 1.25 * (np.eye(3, k=1) + np.eye(3, k=-1)))


def test_validation():
    lat = build_lattice([4])
    with pytest.raises(InvalidArgument):
        HamiltonianSpec(lat, ((0, 2, 1.0),))
    with pytest.raises(InvalidArgument):
        HamiltonianSpec(lat, (), (PotentialTerm((5,), (((1,), 1.0),)),))
    with pytest.raises(InvalidArgument):
        HamiltonianSpec(lat, (), (PotentialTerm((0, 1), (((1,), 1.0),)),))
    spec = bose_hubbard_spec(lat, 1, 1)
    with pytest.raises(InvalidArgument):
        assemble(spec, build_basis(3, 1))


def test_multi_site_potential_bookkeeping():
    lat = build_lattice([4])
    term = PotentialTerm((0, 2), (((1, 1), 2.0), ((0, 2), -0.5)))
    spec = HamiltonianSpec(lat, (), (term,))
    assert spec.interaction_range == 2
    assert spec.vbar == 2
    assert spec.coupling_bound == 2.5
    basis = build_basis(4, 2, 3)
    diag = assemble(spec, basis).diagonal().real
    for k, s in enumerate(basis.states):
        assert diag[k] == pytest.approx(2 * s[0] * s[2] - 0.5 * s[2] ** 2)


def test_subset_examples():
    lat = build_lattice([6])
    spec = bose_hubbard_spec(lat, 1, 2)
    assert len(subset_hamiltonian(spec, lat.sites).hoppings) == len(spec.hoppings)
    sub = subset_hamiltonian(spec, {1, 2, 3})
    assert len(spec.hoppings) - len(sub.hoppings) - len(subset_hamiltonian(spec, {0, 4, 5}).hoppings) == 2
    assert len(crossing_hoppings(spec, {1, 2, 3})) == 2
    with pytest.raises(InvalidArgument):
        subset_hamiltonian(spec, set())


@given(data=st.data())
def test_subset_decomposition_identity(data):
    dims = data.draw(st.sampled_from([[5], [2, 3], [6]]))
    lat = build_lattice(dims)
    X = data.draw(st.sets(st.integers(0, lat.n_sites - 1), min_size=1, max_size=lat.n_sites - 1))
    Xc = lat.sites - X
    spec = bose_hubbard_spec(lat, data.draw(st.floats(-2, 2)), data.draw(st.floats(-3, 3)), 0.4)
    basis = build_basis(lat, 2, 3)
    whole = assemble(spec, basis).matrix
    parts = assemble(subset_hamiltonian(spec, X), basis).matrix + assemble(subset_hamiltonian(spec, Xc), basis).matrix
    boundary_only = HamiltonianSpec(lat, crossing_hoppings(spec, X))
    parts = parts + assemble(boundary_only, basis).matrix
    assert abs(whole - parts).max() <= 1e-14
    HX = assemble(subset_hamiltonian(spec, X), basis)
    NX = op_number(basis, X)
    assert abs((HX @ NX - NX @ HX).matrix).max() <= 1e-12


def test_commutes_with_total_number():
    lat = build_lattice([2, 3])
    basis = build_basis(lat, 3, 4)
    H = assemble(bose_hubbard_spec(lat, 0.8, 1.1), basis)
    N = op_number(basis, lat.sites)
    assert abs((H @ N - N @ H).matrix).max() == 0


def test_schedule():
    lat = build_lattice([3])
    base = bose_hubbard_spec(lat, 1.0, 2.0)
    sched = (ScheduleInterval(0, 1, 1.0, 1.0), ScheduleInterval(1, 2, (0.5, 0.0), 2.0))
    spec = HamiltonianSpec(lat, base.hoppings, base.potential, schedule=sched)
    basis = build_basis(lat, 2, 2)
    assert spec.time_dependent
    a, b = assemble(spec, basis, 1.2), assemble(spec, basis, 1.9)
    assert abs(a.matrix - b.matrix).max() == 0
    assert abs(assemble(spec, basis, 0.3).matrix - assemble(base, basis).matrix).max() == 0
    assert abs(hopping_matrix(spec, basis, 1.5) - 0.5 * hopping_matrix(HamiltonianSpec(lat, base.hoppings[:1]), basis)).max() < 1e-15
    with pytest.raises(InvalidArgument):
        assemble(spec, basis)
    with pytest.raises(InvalidArgument):
        assemble(spec, basis, 3.0)
    with pytest.raises(InvalidArgument):
        System(spec, basis).H


def test_effective():
    lat = build_lattice([3])
    spec = bose_hubbard_spec(lat, 1.0, 2.0)
    basis = build_basis(lat, 3)
    H = assemble(spec, basis)
    assert abs(effective(spec, basis, identity(basis)).matrix - H.matrix).max() == 0
    assert abs(effective(spec, basis, projector_caps(basis, 3)).matrix - H.matrix).max() == 0
    vac = effective(spec, basis, projector_caps(basis, 0))
    assert vac.matrix.nnz == 0 or vac.is_diagonal
    P = projector_caps(basis, 1)
    E = effective(spec, basis, P)
    assert E.hermitian
    d = P.diagonal().real
    assert abs(E.toarray()[d == 0]).max() == 0
    with pytest.raises(InvalidArgument):
        effective(spec, basis, diagonal_operator(np.full(basis.dim, 0.5)))
    with pytest.raises(InvalidArgument):
        effective(spec, basis, H)


def test_effective_equals_truncated_basis():
    lat = build_lattice([4])
    spec = bose_hubbard_spec(lat, 1.0, 1.5)
    big = build_basis(lat, 4, 4)
    small = build_basis(lat, 2, 4)
    P = projector_caps(big, 2)
    E = effective(spec, big, P).toarray()
    keep = np.flatnonzero(P.diagonal().real)
    np.testing.assert_allclose(E[np.ix_(keep, keep)], assemble(spec, small).toarray(), atol=1e-14)


def test_system_gamma_cached():
    lat = build_lattice([6])
    s = System(bose_hubbard_spec(lat, 1, 1), build_basis(lat, 1, 1))
    assert s.structural_gamma() == 3.0
    assert s.gamma == 3.0
    assert isinstance(s.H.matrix, sp.csr_matrix)
    assert s.restricted({0, 1}).matrix.nnz == 2
    assert projector_number(s.basis, {0}).dim == 6
