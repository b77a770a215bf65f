import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from lorenzlab.coupling import CoupledSpace, build_hamiltonians, gauge_field_smeared
from lorenzlab.dirac import SpinorLattice
from lorenzlab.dyson import (EvolutionConfig, FreeEvolution, basic_estimate, dyson_term,
                             dyson_term_bruteforce, evolve_W, fd_derivative, guarded_ad_chain,
                             heisenberg, heisenberg_derivative_check, relative_bound,
                             schrodinger_residual, state_level, taylor_evolve, velocity_check)
from lorenzlab.errors import GridError, TruncationError
from lorenzlab.fock import FockSpace, TruncationBudget
from lorenzlab.freefield import omega_field
from lorenzlab.kinematics import CutoffProfile, ModeGrid, Smearing

CUT = CutoffProfile.sharp_shell(0.5, 3.0)
SERIES = EvolutionConfig(order=6, method="series")
ODE = EvolutionConfig(method="ode")
DENSE = EvolutionConfig(method="dense")


def _fixed(n0, q=0.3, modes=([1.0, 0.0, 0.0], [0.0, 1.3, 0.4])):
    grid = ModeGrid.from_momenta(modes, weight=0.5)
    space = CoupledSpace(FockSpace(grid, n0), positions=[[0.0, 0.0, 0.0], [0.7, 0.2, -0.1]])
    return space, build_hamiltonians(q, space, None, 0.0, CUT)


def _quantum(n0, q=0.3, P=4, M=0.0):
    grid = ModeGrid.from_momenta([[2 * np.pi / P, 0.0, 0.0]], weight=0.5)
    space = CoupledSpace(FockSpace(grid, n0), SpinorLattice((P, 1, 1)))
    return space, build_hamiltonians(q, space, None, M, CUT)


def test_order_zero_is_identity(rng):
    space, hams = _fixed(2)
    xi = space.random_state(rng, 1)
    np.testing.assert_array_equal(dyson_term(0, 0.4, 0.0, xi, space, hams), xi)


def test_first_order_closed_form(rng):
    # oracle: int_0^t exp(i D tau) d tau = (exp(i D t) - 1)/(i D) for each matrix element
    space, hams = _fixed(1, q=0.7, modes=([1.0, 0.0, 0.0],))
    E = hams.H0.mat.diagonal().real
    H1 = hams.H1.dense()
    xi = space.random_state(rng, 0)
    t = 0.8
    D = E[:, None] - E[None, :]
    with np.errstate(all="ignore"):
        kern = np.where(D == 0, t, (np.exp(1j * D * t) - 1) / (1j * D))
    expect = -1j * (kern * H1) @ xi
    got = dyson_term(1, t, 0.0, xi, space, hams, check=False)
    assert np.linalg.norm(got - expect) <= 1e-13


def test_nested_terms_match_bruteforce(rng):
    space, hams = _quantum(4)
    xi = space.random_state(rng, 1)
    for n in (1, 2, 3):
        a = dyson_term(n, 0.5, 0.1, xi, space, hams)
        b = dyson_term_bruteforce(n, 0.5, 0.1, xi, space, hams, nodes=14)
        assert np.linalg.norm(a - b) <= 1e-12


def test_dyson_truncation_guard(rng):
    space, hams = _fixed(3)
    xi = space.random_state(rng, 1)
    with pytest.raises(TruncationError):
        dyson_term(3, 0.5, 0.0, xi, space, hams)
    with pytest.raises(TruncationError):
        evolve_W(0.5, xi, space, hams, SERIES)


def test_dyson_term_exact_within_guard(rng):
    lo, hams_lo = _fixed(3)
    hi, hams_hi = _fixed(4)
    xi = lo.random_state(rng, 1)
    xi_hi = np.zeros(hi.dim, complex)
    xi_hi[:lo.dim] = xi
    a = dyson_term(2, 0.6, 0.0, xi, lo, hams_lo)
    b = dyson_term(2, 0.6, 0.0, xi_hi, hi, hams_hi)
    assert np.abs(b[lo.dim:]).max() <= 1e-15
    assert np.abs(a - b[:lo.dim]).max() <= 1e-13


ONE_MODE = ([1.0, 0.0, 0.0],)


def test_term_norms_obey_basic_estimate(rng):
    space, hams = _fixed(7, modes=ONE_MODE)
    xi = space.random_state(rng, 1)
    C = relative_bound(space, hams.H1)
    res = evolve_W(0.5, xi, space, hams, SERIES, C=C)
    L = state_level(space, xi)
    for n, norm in enumerate(res.term_norms):
        assert norm <= basic_estimate(n, 0.5, C, L) * np.linalg.norm(xi) * (1 + 1e-12)


@pytest.mark.parametrize("t", [0.5, -0.5, 0.2])
def test_methods_agree(rng, t):
    space, hams = _fixed(7, modes=ONE_MODE)
    xi = space.random_state(rng, 1)
    s = evolve_W(t, xi, space, hams, SERIES)
    o = evolve_W(t, xi, space, hams, ODE).state
    d = evolve_W(t, xi, space, hams, DENSE).state
    assert np.linalg.norm(s.state - d) <= max(1e-8, s.remainder)
    assert np.linalg.norm(o - d) <= 1e-8


def test_free_evolution_is_spectral_exponential(rng):
    space, hams = _quantum(2, q=0.0, M=0.6)
    xi = space.random_state(rng, 1)
    exact = sla.expm(-0.7j * hams.H0.dense()) @ xi
    for cfg in (ODE, EvolutionConfig(order=1, method="series")):
        assert np.linalg.norm(evolve_W(0.7, xi, space, hams, cfg).state - exact) <= 1e-12


def test_group_property_and_eta_isometry(rng):
    space, hams = _quantum(3)
    xi, zeta = space.random_state(rng, 1), space.random_state(rng, 1)
    s, t = 0.2, 0.35
    ws = evolve_W(s, xi, space, hams, ODE).state
    assert np.linalg.norm(evolve_W(t, ws, space, hams, ODE).state
                          - evolve_W(s + t, xi, space, hams, ODE).state) <= 1e-8
    a = evolve_W(t, xi, space, hams, ODE).state
    b = evolve_W(t, zeta, space, hams, ODE).state
    eta = space.eta.mat
    assert abs(np.vdot(a, eta @ b) - np.vdot(xi, eta @ zeta)) <= 1e-8
    assert schrodinger_residual(t, xi, space, hams, DENSE) <= 1e-6


def test_interaction_picture_translation(rng):
    # U(t + s, s) = exp(isH0) U(t, 0) exp(-isH0), order by order
    space, hams = _quantum(3)
    free = FreeEvolution(space, hams)
    xi = space.random_state(rng, 1)
    s, t = 0.3, 0.4
    for n in (1, 2):
        a = dyson_term(n, t + s, s, xi, space, hams)
        b = free.apply(-s, dyson_term(n, t, 0.0, free.apply(s, xi), space, hams))
        assert np.linalg.norm(a - b) <= 1e-12


def test_ad_chain_guard_independent(rng):
    out = []
    for n0 in (4, 6):
        space, hams = _fixed(n0, modes=ONE_MODE)
        B = space.fock_op(gauge_field_smeared(space.fock, Smearing.gaussian(space.fock.grid))[0])
        chain = guarded_ad_chain(B, hams, 2, space, TruncationBudget(1, 3))
        out.append(chain.ops)
    d = out[0][0].shape[0]
    for a, b in zip(*out):
        assert abs(a.mat - b.mat[:d, :d]).max() <= 1e-13
        assert abs(b.mat[d:, :d]).max() == 0
    space, hams = _fixed(4, modes=ONE_MODE)
    B = space.fock_op(gauge_field_smeared(space.fock, Smearing.gaussian(space.fock.grid))[0])
    with pytest.raises(TruncationError):
        guarded_ad_chain(B, hams, 3, space, TruncationBudget(1, 3))


def test_fd_derivative_polynomial():
    for k in (1, 2, 3):
        d = fd_derivative(lambda s: np.array([np.sin(2 * s)]), 0.3, k, 0.05)
        expect = [2 * np.cos(0.6), -4 * np.sin(0.6), -8 * np.cos(0.6)][k - 1]
        assert abs(d[0] - expect) <= 1e-9


def test_heisenberg(rng):
    space, hams = _fixed(5)
    B = space.fock_op(gauge_field_smeared(space.fock, Smearing.gaussian(space.fock.grid))[1])
    xi = space.random_state(rng, 2)
    np.testing.assert_allclose(heisenberg(B, 0.0, xi, space, hams), B @ xi, atol=1e-15)
    for k in (1, 2, 3):
        assert heisenberg_derivative_check(B, k, 0.2, xi, space, hams) <= 1e-6
    with pytest.raises(TruncationError):
        heisenberg(B, 0.1, space.random_state(rng, 5), space, hams, budget=TruncationBudget(1, 1))


def test_taylor(rng):
    space, hams = _fixed(3)
    f = Smearing.gaussian(space.fock.grid)
    B = omega_field(f, space)
    xi = space.random_state(rng, 1)
    approx, _ = taylor_evolve(B, 0.0, xi, space, hams, 4, smearing=f)
    np.testing.assert_allclose(approx, B @ xi, atol=1e-15)
    approx, tail = taylor_evolve(B, 0.2, xi, space, hams, 20, smearing=f)
    exact = heisenberg(B, 0.2, xi, space, hams)
    assert np.linalg.norm(approx - exact) <= tail + 1e-8
    with pytest.raises(GridError):
        taylor_evolve(B, 0.2, xi, space, hams, 4, smearing=f, band=(1.1, 2.0))


def _packet(space, rng):
    lat = space.lattice
    L = np.asarray(lat.extent) * lat.spacing
    prof = np.prod(np.cos(np.pi * lat.coords / L) ** 4, axis=1)
    spin = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    xi = np.kron(np.kron(prof, spin), space.fock.basis.vacuum())
    return xi / np.linalg.norm(xi)


def test_velocity_identity(rng):
    grid = ModeGrid.from_momenta([[1.0, 0.0, 0.0]])
    space = CoupledSpace(FockSpace(grid, 0), SpinorLattice((6, 6, 6), spacing=10.0))
    hams = build_hamiltonians(0.0, space, None, 0.5, CUT)
    xi = _packet(space, rng)
    for t in (0.0, 0.2):
        assert max(velocity_check(j, t, xi, space, hams) for j in range(3)) <= 1e-6


def test_velocity_seam_warning(rng):
    grid = ModeGrid.from_momenta([[1.0, 0.0, 0.0]])
    space = CoupledSpace(FockSpace(grid, 0), SpinorLattice((4, 1, 1)))
    hams = build_hamiltonians(0.0, space, None, 0.5, CUT)
    xi = space.random_state(rng)
    with pytest.warns(RuntimeWarning, match="seam"):
        velocity_check(0, 0.1, xi, space, hams)


def _alpha_expectation(space, hams, xi, ts):
    alpha = space.dirac_op(space.lattice.spinor_field(space.matrices.alpha[0]))
    return np.array([np.vdot(heisenberg(alpha, 0.0, v, space, hams), v).real
                     for v in (evolve_W(t, xi, space, hams, DENSE).state for t in ts)])


def test_alpha_constant_for_momentum_eigenstate():
    # q = 0: an eigenvector of H0 has a stationary <alpha(t)>
    space, hams = _quantum(0, q=0.0, M=0.8)
    w, V = np.linalg.eigh(hams.H.dense())
    xi = V[:, 5]
    vals = _alpha_expectation(space, hams, xi, np.linspace(0.0, 2.0, 7))
    assert np.ptp(vals) <= 1e-9


def test_zitterbewegung_signature():
    # superposition of beta eigenstates at M > 0 has an oscillating <alpha(t)>
    space, hams = _quantum(0, q=0.0, M=1.0)
    lat = space.lattice
    L = lat.extent[0] * lat.spacing
    wave = np.exp(2j * np.pi * lat.coords[:, 0] / L)
    xi = np.kron(np.kron(wave, np.array([1.0, 0.0, 0.0, 1.0])), space.fock.basis.vacuum())
    xi /= np.linalg.norm(xi)
    vals = _alpha_expectation(space, hams, xi, np.linspace(0.0, 3.0, 31))
    assert np.ptp(vals) > 0.1
    # the direct dense oracle agrees with the evolution used above
    direct = sla.expm(-1.5j * hams.H.dense()) @ xi
    assert np.linalg.norm(direct - evolve_W(1.5, xi, space, hams, DENSE).state) <= 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 20), st.floats(-1.0, 1.0), st.floats(0.1, 3.0), st.integers(0, 3))
def test_basic_estimate_recursion(n, t, C, L):
    # ratio of successive bounds is C |t| sqrt(L + n + 1)/(n + 1)
    a, b = basic_estimate(n, t, C, L), basic_estimate(n + 1, t, C, L)
    assert b == pytest.approx(a * C * abs(t) * np.sqrt(L + n + 1) / (n + 1), rel=1e-12, abs=1e-300)
