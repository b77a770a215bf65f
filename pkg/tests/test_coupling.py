import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from lorenzlab.coupling import (CoupledSpace, build_hamiltonians, commutator, conservation_check,
                                current, equation_of_motion_check, gauge_field_point,
                                gauge_field_smeared, interaction)
from lorenzlab.dirac import SpinorLattice, coulomb_potential_field
from lorenzlab.errors import AliasingError, TruncationError
from lorenzlab.fock import ETA_DIAG, FockSpace, TruncationBudget, eta_adjoint
from lorenzlab.kinematics import CutoffProfile, ModeGrid, Smearing

seeds = st.integers(0, 2**32 - 1)
CUT = CutoffProfile.sharp_shell(0.5, 3.0)


def _fock(n0=3, modes=([1.0, 0.0, 0.0], [0.0, 1.3, 0.4])):
    return FockSpace(ModeGrid.from_momenta(modes, weight=0.5), n0)


def _quantum(n0=3, P=4, n_particles=1):
    grid = ModeGrid.from_momenta([[2 * np.pi / P, 0.0, 0.0]], weight=0.5)
    return CoupledSpace(FockSpace(grid, n0), SpinorLattice((P, 1, 1)), n_particles=n_particles)


def _number_half(space, psi):
    return np.linalg.norm(np.sqrt(space.levels + 1.0) * psi)


def test_zero_smearing_gives_zero_field():
    fock = _fock()
    for A in gauge_field_smeared(fock, Smearing.zero(fock.grid)).components:
        assert A.mat.count_nonzero() == 0 or abs(A.mat).max() == 0


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_field_bound(seed):
    rng = np.random.default_rng(seed)
    fock = _fock()
    f = Smearing.gaussian(fock.grid, center=rng.standard_normal(3), width=rng.uniform(0.3, 2.0))
    A = gauge_field_smeared(fock, f)
    norm_f = fock.grid.norm(f.fhat / np.sqrt(fock.grid.omega))
    space = CoupledSpace(fock, positions=[[0.0, 0.0, 0.0]])
    psi = fock.random_state(rng, fock.max_total - 1)
    for mu in range(4):
        assert np.linalg.norm(A[mu] @ psi) <= 4 * np.sqrt(2) * norm_f * _number_half(space, psi)


def test_vacuum_two_point_oracle():
    fock = _fock()
    grid = fock.grid
    f = Smearing.gaussian(grid, center=(0.2, -0.1, 0.3), width=0.8)
    A = gauge_field_smeared(fock, f)
    vac = fock.basis.vacuum()
    E = grid.polarization
    for mu in range(4):
        # 1/2 sum_lam eta^{lam lam} (e_{mu lam})^2 |f|^2 / w, lowered index e_{mu lam} = eta_mu e^mu_lam
        lowered = ETA_DIAG[mu] * E[:, mu, :]
        expect = 0.5 * np.sum(grid.weights * np.abs(f.fhat) ** 2 / grid.omega
                              * np.sum(ETA_DIAG[None, :] * lowered**2, axis=1))
        assert np.vdot(vac, A[mu] @ (A[mu] @ vac)) == pytest.approx(expect, rel=1e-13)


def test_point_field_at_origin_and_reality():
    fock = _fock()
    chi = Smearing(fock.grid, CUT.values(fock.grid))
    A0, Ap = gauge_field_smeared(fock, chi), gauge_field_point(fock, [0.0, 0.0, 0.0], CUT)
    for mu in range(4):
        assert abs(A0[mu].mat - Ap[mu].mat).max() <= 1e-15
        B = gauge_field_point(fock, [0.3, -0.7, 0.2], CUT)[mu]
        assert abs(eta_adjoint(B, fock.eta).mat - B.mat).max() <= 1e-15


def test_point_field_translation_covariance():
    # A(x) = exp(-i P.x) A(0) exp(i P.x) with P the field momentum, via an explicit diagonal phase
    fock = _fock()
    x = np.array([0.4, -1.1, 0.6])
    P = np.column_stack([p.mat.diagonal().real for p in fock.field_momentum()])
    U = sp.diags(np.exp(-1j * P @ x))
    for mu in range(4):
        A0 = gauge_field_point(fock, [0.0, 0.0, 0.0], CUT)[mu].mat
        Ax = gauge_field_point(fock, x, CUT)[mu].mat
        assert abs(Ax - U @ A0 @ U.conj().T).max() <= 1e-13


@pytest.mark.parametrize("mode", ["fixed", "quantum"])
def test_hamiltonian_structure(rng, mode):
    if mode == "fixed":
        space = CoupledSpace(_fock(), positions=[[0.0, 0.0, 0.0], [0.7, 0.2, -0.1]])
        V = None
    else:
        space = _quantum()
        V = coulomb_potential_field(0.4, 0.3, space.lattice)
    hams = build_hamiltonians(0.3, space, V, 1.0, CUT)
    eH = space.eta.mat @ hams.H.mat
    assert abs(eH - eH.conj().T).max() <= 1e-12
    assert hams.H1.respects_shift(space.levels)
    # relative bound with the measured profile norm
    chi_norm = space.fock.grid.norm(CUT.values(space.fock.grid) / np.sqrt(space.fock.grid.omega))
    for _ in range(5):
        psi = space.random_state(rng, space.max_total - 1)
        bound = 32 * space.n_particles * 0.3 * chi_norm * _number_half(space, psi)
        assert np.linalg.norm(hams.H1 @ psi) <= bound


def test_free_hamiltonian_hermitian():
    space = _quantum()
    hams = build_hamiltonians(0.0, space, None, 1.0, CUT)
    assert abs(hams.H.mat - hams.H0.mat).max() == 0
    assert abs(hams.H.mat - hams.H.mat.conj().T).max() <= 1e-13


def test_interaction_is_fibered():
    space = _quantum(n0=2)
    H1 = interaction(space, 0.5, CUT).mat.tocoo()
    fd = space.fock.dim
    site_row = (H1.row // fd) // 4
    site_col = (H1.col // fd) // 4
    assert np.all(site_row[np.abs(H1.data) > 0] == site_col[np.abs(H1.data) > 0])


def test_two_particle_space(rng):
    space = _quantum(n0=1, P=2, n_particles=2)
    assert space.dim == space.dirac_dim * space.fock.dim
    assert space.dirac_dim == 8 * 7 // 2
    hams = build_hamiltonians(0.3, space, None, 0.5, CUT)
    eH = space.eta.mat @ hams.H.mat
    assert abs(eH - eH.conj().T).max() <= 1e-12


def test_current_basic_properties(rng):
    space = _quantum(n0=1)
    q = 0.7
    one = current(lambda x: np.ones(len(x)), 0, space, q).operator.mat
    assert abs(one - q * sp.identity(space.dim)).max() <= 1e-15
    f = rng.standard_normal(space.lattice.n_sites)
    g = rng.standard_normal(space.lattice.n_sites)
    for mu in range(4):
        J = current(f, mu, space, q)
        assert np.linalg.norm(J.operator.dense(), 2) <= J.bound * (1 + 1e-12)
        assert J.bound == pytest.approx(q * np.abs(f).max())
    j0f, j0g = current(f, 0, space, q).operator, current(g, 0, space, q).operator
    assert abs(commutator(j0f, j0g).mat).max() == 0


def _harmonic(space, m):
    x = space.lattice.coords[:, 0]
    L = space.lattice.extent[0] * space.lattice.spacing
    return np.cos(2 * np.pi * m * x / L) + 0.5 * np.sin(2 * np.pi * m * x / L)


def test_conservation():
    space = _quantum(n0=3, P=8)
    hams = build_hamiltonians(0.5, space, None, 0.0, CUT)
    budget = TruncationBudget(1, 2)
    assert conservation_check(space, hams, np.ones(8), budget) <= 1e-12
    assert conservation_check(space, hams, _harmonic(space, 1), budget) <= 1e-10
    with pytest.raises(AliasingError):
        conservation_check(space, hams, _harmonic(space, 3), budget)


@pytest.mark.parametrize("q", [0.0, 0.5])
def test_equation_of_motion(q):
    space = _quantum(n0=3, P=8)
    hams = build_hamiltonians(q, space, None, 0.0, CUT)
    f = Smearing.gaussian(space.fock.grid, width=1.0)
    budget = TruncationBudget(0, 3)
    for mu in range(4):
        r1, r2 = equation_of_motion_check(space, hams, f, mu, budget, band_limited=True)
        assert r1 <= 1e-12
        assert r2 <= (1e-13 if q == 0 else 1e-10)
    with pytest.raises(TruncationError):
        equation_of_motion_check(space, hams, f, 0, TruncationBudget(0, 2))
