import math

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given
from hypothesis import strategies as st

from bosonlight.bounds import (
    BoundReport,
    boundary_decay_weights,
    compute_constants,
    exterior_decay_weights,
    fit_tail,
    lambda_c,
    low_density_certificate,
    lr_error,
    max_tau,
    minimal_admissible_R,
    number_tail,
    phase_observable,
    satisfied,
    schuch_check,
    transport_check,
    transport_steps,
)
from bosonlight.errors import InvalidArgument
from bosonlight.evolve import evolve
from bosonlight.fock import build_basis, mott_state, op_number, random_state
from bosonlight.hamiltonian import System, bose_hubbard_spec
from bosonlight.lattice import build_lattice


def chain_system(n, N, U=2.0, J=1.0, caps=None, mu=0.0):
    lat = build_lattice([n])
    return System(bose_hubbard_spec(lat, J, U, mu), build_basis(lat, N if caps is None else caps, N))


# -- constants -------------------------------------------------------------------

def test_constants_small_tau_limit():
    c = compute_constants(3.0, 1.0, 1e-14, 1)
    assert c.c_tau_1 == pytest.approx(40.0)
    assert c.c_tau_2 == pytest.approx(math.e)


def test_constants_at_max_tau():
    c = compute_constants(3.0, 1.0, 1 / 12, 1)
    assert c.c_tau_1 == pytest.approx(108.73127313836180941, rel=1e-14)  # 40 e, mpmath
    assert c.c_tau_2 == pytest.approx(math.e**2 * (1 + 2 + 1 / 12))
    assert c.lambda_c[0.5] == pytest.approx(20.78465524840153776, rel=1e-14)  # 1 + 12 e^(1/2), mpmath
    assert lambda_c(0.75, 3, 1) == pytest.approx(1 + 0.75**-2 * math.exp(0.75) * 3)
    assert c.f_tau == pytest.approx(0.5 * math.log(1 + 1 / (5 * 40 * math.e * (1 + 12 * math.exp(0.5)) + 2)))
    assert c.f_tau == pytest.approx(4.4238e-05, rel=1e-4)


def test_constants_with_ell_and_t():
    gamma, J, tau, D = 3.0, 1.0, 1 / 12, 1
    ell, t, bnd = 300_000, 2 / 12, 2
    c = compute_constants(gamma, J, tau, D, ell, t, boundary_size=bnd)
    c1, c2 = 40 * math.e, math.e**2 * (3 + tau)
    lam_half, lam_3q = 1 + 12 * math.exp(0.5), 1 + 0.75**-2 * math.exp(0.75) * 3
    f = 0.5 * math.log1p(1 / (5 * c1 * lam_half + 2))
    delta = 5 * c1 * lam_half * math.exp(-f * ell)
    assert c.delta_ell == pytest.approx(delta)
    expected_tilde = (c2 * t / tau) * (3 * t * delta / tau + 2 * c1 * lam_3q * math.exp(-3 * ell / 16) * bnd)
    assert c.delta_tilde_ell == pytest.approx(expected_tilde)
    assert c.ell_min == pytest.approx(math.log(5 * c1 * lam_half * t / tau) / f)
    assert c.ell_t == pytest.approx(t * math.log(2))
    assert set(c.as_dict()) >= {"c_tau_1", "lambda_0.5", "lambda_0.75", "delta_ell"}


@given(gamma=st.floats(1, 10), J=st.floats(0.1, 5), frac=st.floats(0.01, 1), D=st.integers(1, 3),
       ell1=st.integers(0, 10**6), gap=st.integers(1, 10**5))
def test_constants_invariants(gamma, J, frac, D, ell1, gap):
    tau = frac * max_tau(gamma, J)
    a = compute_constants(gamma, J, tau, D, ell1)
    b = compute_constants(gamma, J, tau, D, ell1 + gap)
    assert a.c_tau_1 >= 40 and a.c_tau_2 >= math.e and a.f_tau > 0
    assert b.delta_ell < a.delta_ell or a.delta_ell == 0


def test_tau_out_of_range():
    with pytest.raises(InvalidArgument):
        compute_constants(3.0, 1.0, 0.1, 1)
    with pytest.raises(InvalidArgument):
        compute_constants(3.0, 1.0, 0.0, 1)


def test_satisfied_tolerance():
    assert satisfied(1.0, 1.0)
    assert satisfied(1.0 + 5e-10, 1.0)
    assert not satisfied(1.0 + 2e-9, 1.0)
    assert satisfied(1e6 + 1e-4, 1e6)
    r = BoundReport("x")
    r.add("p", 1, 2.0, 1.0)
    assert not r.all_satisfied


# -- weights and tails -----------------------------------------------------------

def test_boundary_weights_single_site():
    lat = build_lattice([5])
    np.testing.assert_allclose(boundary_decay_weights(lat, {2}), [math.exp(-abs(j - 2)) for j in range(5)])
    one = build_lattice([1])
    assert boundary_decay_weights(one, {0}).tolist() == [0.0]


def test_exterior_weights():
    lat = build_lattice([6])
    w = exterior_decay_weights(lat, {0, 1})
    np.testing.assert_allclose(w, [0, 0] + [math.exp(-0.75 * k) for k in range(1, 5)])


def test_number_tail_examples():
    s = chain_system(4, 4)
    psi = mott_state(s.basis, 1)
    assert number_tail(s.basis, psi, {0}, 0) == 1
    assert number_tail(s.basis, psi, {0}, 5) == 0
    assert number_tail(s.basis, psi, {0}, 2) == 0


@given(seed=st.integers(0, 500))
def test_number_tail_monotone_and_brute(seed):
    s = chain_system(4, 3)
    psi = random_state(s.basis, np.random.default_rng(seed))
    region = {1, 2}
    tails = [number_tail(s.basis, psi, region, x) for x in range(5)]
    assert all(a >= b for a, b in zip(tails, tails[1:]))
    for x, tail in enumerate(tails):
        brute = sum(abs(psi[k]) ** 2 for k, occ in enumerate(s.basis.states) if occ[1] + occ[2] >= x)
        assert tail == pytest.approx(brute)


def test_tail_envelope_scale_for_evolved_mott():
    s = chain_system(6, 6)
    gamma = s.structural_gamma()
    t = 2 * max_tau(gamma, s.spec.Jbar)
    psi_t = evolve(s.H, mott_state(s.basis, 1), t)
    scale = max(compute_constants(gamma, 1.0, t / 2, 1, t=t).ell_t, 1.0) ** 1
    xs = list(range(1, 6))
    for site in range(6):
        tails = [number_tail(s.basis, psi_t, {site}, x) for x in xs]
        a, b = fit_tail(xs, tails)
        assert 0 < b <= scale
        # the envelope exp(-(x - a')/b) with the smallest a' covering every point
        a_env = max(x + b * math.log(tail) for x, tail in zip(xs, tails) if tail > 0)
        assert all(tail <= math.exp(-(x - a_env) / b) * (1 + 1e-12) for x, tail in zip(xs, tails))


def test_fit_tail_recovers_exponential():
    xs = np.arange(6)
    a, b = fit_tail(xs, np.exp(-(xs - 1.5) / 0.7))
    assert (a, b) == (pytest.approx(1.5), pytest.approx(0.7))
    with pytest.raises(InvalidArgument):
        fit_tail([1, 2], [0.5, 0.0])


def test_low_density_certificate():
    s = chain_system(4, 4)
    psi = mott_state(s.basis, 1)
    # <n^s> = 1 for every s; the bound (1/e)(b0 s / e)^s exceeds 1 for b0 = 2e^2
    assert low_density_certificate(s.basis, psi, 2 * math.e**2, 1)
    assert not low_density_certificate(s.basis, psi, 1.0, 1)
    with pytest.raises(InvalidArgument):
        low_density_certificate(s.basis, psi, 1.0, 0.5)


# -- short-time and transport bounds -------------------------------------------------

def test_schuch_mott_middle_pair():
    s = chain_system(4, 4)
    tau = max_tau(s.structural_gamma(), 1.0)
    psi = mott_state(s.basis, 1)
    for k in (1, 2):
        r = schuch_check(s, psi, {1, 2}, tau, k)
        assert r.all_satisfied
        assert r.samples[0].extra["leakage"] == 0.0


def test_schuch_trivial_cases():
    s = chain_system(4, 3, J=0.0)
    psi = random_state(s.basis, np.random.default_rng(4))
    r = schuch_check(s, psi, {0, 1}, 0.05, 2)
    smp = r.samples[0]
    nX = s.basis.occupation({0, 1})
    assert smp.lhs == pytest.approx(np.sum(np.abs(psi) ** 2 * nX**2))
    assert smp.satisfied and smp.rhs >= smp.lhs
    s2 = chain_system(4, 3)
    r2 = schuch_check(s2, psi, range(4), max_tau(s2.structural_gamma(), 1.0), 3)
    assert r2.samples[0].lhs == pytest.approx(27)
    assert r2.all_satisfied


@given(seed=st.integers(0, 10_000), data=st.data())
def test_schuch_random_instances(seed, data):
    n = data.draw(st.integers(3, 6))
    s = chain_system(n, data.draw(st.integers(1, 3)), U=data.draw(st.floats(-3, 3)))
    X = data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n))
    psi = random_state(s.basis, np.random.default_rng(seed))
    r = schuch_check(s, psi, X, max_tau(s.structural_gamma(), 1.0), data.draw(st.integers(1, 3)))
    assert r.all_satisfied


def test_schuch_refuses_truncated_leakage():
    s = chain_system(4, 4, caps=2)
    with pytest.raises(InvalidArgument, match="leakage"):
        schuch_check(s, mott_state(s.basis, 1), {0}, 0.05, 1)


def test_transport_steps():
    assert transport_steps(1 / 12, 3, 1) == (pytest.approx(1 / 12), 1)
    tau, m0 = transport_steps(0.25, 3, 1)
    assert m0 == 3 and tau == pytest.approx(1 / 12)
    tau, m0 = transport_steps(0.1, 3, 1)
    assert m0 == 2 and tau == pytest.approx(0.05)


def test_transport_admissible_eight_site():
    s = chain_system(8, 8)
    tau = max_tau(s.structural_gamma(), 1.0)
    R = minimal_admissible_R(2 * tau, 3.0, 1.0, 1)
    assert R == 453250
    psi = mott_state(s.basis, 1)
    r = transport_check(s, psi, {0, 1, 2, 3}, R, 2 * tau, 1)
    smp = r.samples[0]
    assert smp.satisfied and smp.extra["admissible"]
    assert smp.lhs <= 4 + 1e-9


def test_transport_rejects_inadmissible_and_names_minimum():
    s = chain_system(6, 6)
    tau = max_tau(s.structural_gamma(), 1.0)
    psi = mott_state(s.basis, 1)
    with pytest.raises(InvalidArgument, match="210957"):
        transport_check(s, psi, {0, 1, 2}, 3, tau, 1)
    r = transport_check(s, psi, {0, 1, 2}, 3, tau, 1, enforce_condition=False)
    assert r.samples[0].extra["admissible"] is False


def test_minimal_admissible_R_values():
    assert [minimal_admissible_R(m / 12, 3.0, 1.0, 1) for m in (1, 2, 3)] == [210957, 453250, 707370]


# -- subset-Hamiltonian error -----------------------------------------------------------

def single_particle_oracle(n, J, psi_sites, site_obs, R, t):
    """Heisenberg error of the site-0 number operator in first quantisation."""
    A = J * (np.eye(n, k=1) + np.eye(n, k=-1))
    keep = np.zeros(n, bool)
    keep[: R + 1] = True
    A_sub = A * np.outer(keep, keep)
    P = np.zeros((n, n))
    P[site_obs, site_obs] = 1

    def heis(M):
        U = la.expm(-1j * t * M)
        return U.conj().T @ P @ U @ psi_sites

    return np.linalg.norm(heis(A) - heis(A_sub))


@pytest.mark.parametrize("R", [1, 2, 3, 4])
def test_lr_error_single_particle_oracle(R):
    n, J, t = 9, 0.9, 0.6
    lat = build_lattice([n])
    s = System(bose_hubbard_spec(lat, J, 0.0), build_basis(lat, 1, 1))
    rng = np.random.default_rng(R)
    amps = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    amps /= np.linalg.norm(amps)
    psi = np.zeros(s.basis.dim, complex)
    for site in range(n):
        occ = [0] * n
        occ[site] = 1
        psi[s.basis.index(occ)] = amps[site]
    O = op_number(s.basis, {0})
    got = lr_error(s, psi, O, {0}, R, t)
    assert got == pytest.approx(single_particle_oracle(n, J, amps, 0, R, t), rel=1e-8, abs=1e-13)


def test_lr_error_trivial_cases():
    s = chain_system(6, 2, caps=2)
    psi = random_state(s.basis, np.random.default_rng(0))
    O = phase_observable(s.basis, {0}, 0.7)
    assert lr_error(s, psi, O, {0}, s.lattice.diameter, 0.4) == 0.0
    assert lr_error(s, psi, O, {0}, 1, 0.0) == 0.0
    with pytest.raises(InvalidArgument):
        lr_error(s, psi, O, {9}, 1, 0.4)
    with pytest.raises(InvalidArgument):
        lr_error(s, psi, op_number(s.basis, {0}).scaled(3.0), {0}, 1, 0.4)


def test_phase_observable_unitary():
    s = chain_system(3, 2)
    O = phase_observable(s.basis, {0, 1}, 0.3)
    d = O.diagonal()
    np.testing.assert_allclose(np.abs(d), 1)
    np.testing.assert_allclose(d, np.exp(0.3j * s.basis.occupation({0, 1})))
    assert O.hermitian is False
