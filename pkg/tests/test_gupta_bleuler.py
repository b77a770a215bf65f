import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from lorenzlab import gupta_bleuler as gb
from lorenzlab.coulomb import ec_grid, triviality_diagnostic
from lorenzlab.coupling import CoupledSpace, build_hamiltonians
from lorenzlab.dirac import SpinorLattice
from lorenzlab.errors import InfraredError, TruncationError
from lorenzlab.fock import ETA_DIAG, FockSpace, TruncationBudget
from lorenzlab.freefield import frequency_split
from lorenzlab.kinematics import CutoffProfile, ModeGrid, Smearing

CUT = CutoffProfile.sharp_shell(0.5, 3.0)
POS = [[0.0, 0.0, 0.0], [0.7, 0.2, -0.1]]
ONE_MODE = ([1.0, 0.0, 0.0],)
TWO_MODES = ([1.0, 0.0, 0.0], [0.0, 1.3, 0.4])


def _setup(n0=5, q=0.1, modes=ONE_MODE):
    grid = ModeGrid.from_momenta(modes, weight=0.5)
    fock = FockSpace(grid, n0)
    space = CoupledSpace(fock, positions=POS)
    hams = build_hamiltonians(q, space, None, 0.0, CUT)
    return space, hams, gb.w_transform(fock), gb.dressing(q, space, CUT)


@pytest.fixture(scope="module")
def small():
    return _setup()


# ---------------------------------------------------------------------------
# W transform

def test_w_bar_is_orthogonal_and_w_is_eta_w_bar():
    np.testing.assert_allclose(gb.W_BAR @ gb.W_BAR.T, np.eye(4), atol=1e-15)
    np.testing.assert_array_equal(gb.W_MATRIX, np.diag(ETA_DIAG) @ gb.W_BAR)
    np.testing.assert_allclose(gb.W_MATRIX @ gb.W_MATRIX, np.eye(4), atol=1e-15)
    np.testing.assert_array_equal(gb.W_MATRIX, gb.W_MATRIX.T)


def test_eta_bar_and_kappa_bar(small):
    space, _, wt, _ = small
    grid = space.fock.grid
    assert wt.eta_bar_defect(grid) <= 1e-15
    expected = np.column_stack([-np.sqrt(2.0) * grid.omega, np.zeros((grid.n_modes, 3))])
    np.testing.assert_allclose(wt.kappa_bar(grid), expected, atol=1e-14)


def test_second_quantized_w_is_unitary_involution(small):
    space, _, wt, _ = small
    assert wt.unitarity_defect() <= 1e-13
    W = wt.fock_op.mat
    assert abs(W @ W - np.eye(W.shape[0])).max() <= 1e-13


# ---------------------------------------------------------------------------
# dressing

def test_generator_hermitian_and_unitary_commutes_with_eta(small):
    _, _, _, dg = small
    U = dg.unitary(1.0)
    assert dg.hermiticity_defect() == 0.0
    assert dg.unitarity_defect(U) <= 1e-13
    assert dg.eta_defect(U) <= 1e-15


def test_vacuum_goes_to_coherent_state(small):
    _, _, _, dg = small
    U = dg.unitary(1.0)
    assert np.abs(U.mat[:, 0].toarray().ravel() - dg.coherent_vacuum()).max() <= 1e-10


def test_fiber_unitary_matches_dense_expm():
    space, _, _, dg = _setup(n0=3, q=0.4)
    dense = sla.expm(1j * dg.generator.mat.toarray())
    np.testing.assert_allclose(dg.unitary(1.0).mat.toarray(), dense, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_one_parameter_group(s, t):
    _, _, _, dg = _setup(n0=3, q=0.4)
    lhs = dg.unitary(s).mat @ dg.unitary(t).mat
    assert abs(lhs - dg.unitary(s + t).mat).max() <= 1e-12


def test_beta_closed_form():
    space, _, _, dg = _setup(q=0.3)
    grid = space.fock.grid
    g = 1j * CUT.values(grid)[None, :] * grid.phases(np.array(POS)) / grid.omega ** 1.5
    expected = -1.0 * (-0.3 / np.sqrt(2.0)) * np.sqrt(grid.weights) * g.sum(axis=0)
    np.testing.assert_allclose(dg.beta[0], expected, rtol=1e-15)


def test_quantum_fibers_are_sites():
    grid = ModeGrid.from_momenta([[2 * np.pi / 4, 0.0, 0.0]], weight=0.5)
    space = CoupledSpace(FockSpace(grid, 3), SpinorLattice((4, 1, 1)))
    dg = gb.dressing(0.3, space, CUT)
    assert dg.beta.shape == (4, grid.n_modes)
    np.testing.assert_array_equal(dg.fiber_of, np.repeat(np.arange(4), 4))
    U = dg.unitary(1.0)
    assert dg.unitarity_defect(U) <= 1e-13
    assert dg.eta_defect(U) <= 1e-15


@pytest.mark.parametrize("profile,ok", [
    (CutoffProfile.gaussian(2.0), False),
    (CutoffProfile.sharp_shell(0.5, 3.0), True),
    (CutoffProfile.gaussian(2.0, eps=0.2), True),
])
def test_dressing_follows_triviality_diagnostic(profile, ok):
    grid = ModeGrid.from_momenta(ONE_MODE, weight=0.5)
    space = CoupledSpace(FockSpace(grid, 2), positions=POS)
    sched = grid.omega.min() * 10.0 ** -np.arange(4)
    assert triviality_diagnostic(profile, sched).admissible is ok
    if ok:
        gb.dressing(0.1, space, profile)
    else:
        with pytest.raises(InfraredError):
            gb.dressing(0.1, space, profile)


def test_ir_ceiling():
    grid = ModeGrid.from_momenta(ONE_MODE, weight=0.5)
    space = CoupledSpace(FockSpace(grid, 2), positions=POS)
    with pytest.raises(InfraredError):
        gb.dressing(0.1, space, CUT, ir_ceiling=1e-12)


# ---------------------------------------------------------------------------
# conjugation of the positive-frequency part

@pytest.mark.parametrize("t", [0.0, 0.3, -0.7])
def test_conjugated_plus_part_is_pure_annihilator(small, t):
    space, _, wt, dg = small
    f = Smearing.gaussian(space.fock.grid, width=0.8).multiply(np.exp(0.5j))
    rep = gb.simplify_check(t, f, space, dg, wt, TruncationBudget(3, 2))
    assert rep["residual"] <= 1e-10
    assert rep["third_term"] <= 1e-10
    assert rep["target_norm"] > 1.0


def test_printed_orientation_leaves_c_number():
    space, _, wt, _ = _setup(q=0.3)
    printed = gb.dressing(0.3, space, CUT, sign=1.0)
    f = Smearing.gaussian(space.fock.grid, width=0.8)
    rep = gb.simplify_check(0.3, f, space, printed, wt, TruncationBudget(3, 2))
    assert rep["residual"] > 1e-3


def test_simplify_needs_guard_two(small):
    space, _, wt, dg = small
    f = Smearing.gaussian(space.fock.grid, width=0.8)
    with pytest.raises(TruncationError):
        gb.simplify_check(0.0, f, space, dg, wt, TruncationBudget(4, 1))


# ---------------------------------------------------------------------------
# physical subspace

def _plus_parts(space, q, times=(0.0, 0.4)):
    f = Smearing.gaussian(space.fock.grid, width=0.8)
    return [frequency_split(f.multiply(np.exp(1j * k)), t, space, q, CUT)[0]
            for k, t in enumerate(times)]


def test_physical_subspace_is_annihilated_and_semidefinite(small):
    space, hams, wt, dg = small
    sub = gb.build_physical_subspace(space, dg, wt, 1)
    assert gb.annihilation_residual(sub, _plus_parts(space, hams.q)) <= 1e-10
    assert sub.min_eigenvalue >= -1e-10
    assert sub.kernel_dim == sub.null_count > 0


def test_transverse_one_photon_states_have_unit_norm(small):
    space, _, wt, dg = small
    sub = gb.build_physical_subspace(space, dg, wt, 1)
    one = sub.transverse_mask & (sub.occupations.sum(axis=1) == 1)
    assert one.any()
    np.testing.assert_allclose(np.real(np.diag(sub.gram))[one], 1.0, atol=1e-13)


def test_annihilation_residual_shrinks_with_cutoff():
    res = []
    for n0 in (4, 5, 6):
        space, hams, wt, dg = _setup(n0=n0, q=0.3)
        sub = gb.build_physical_subspace(space, dg, wt, 1)
        res.append(gb.annihilation_residual(sub, _plus_parts(space, 0.3)))
    assert res[0] > res[1] > res[2]


def test_evolution_preserves_physical_subspace(small):
    space, hams, wt, dg = small
    sub = gb.build_physical_subspace(space, dg, wt, 1)
    ev = gb.evolution_invariance(space, hams, dg, wt, sub, 0.5, 1)
    assert ev["leak"] <= 1e-10
    assert ev["gram_change"] <= 1e-10


# ---------------------------------------------------------------------------
# physical Hamiltonian

def test_physical_hamiltonian_structure():
    space, hams, wt, dg = _setup(n0=4, q=0.3)
    r = gb.physical_hamiltonian(space, hams, dg, wt, TruncationBudget(1, 3)).record()
    assert r["comm_G_H1"] <= 1e-11
    assert r["third_order"] <= 1e-11
    for key in ("structure", "invariance_phys", "invariance_null", "coulomb_residual"):
        assert r[key] <= 1e-10, key
    assert r["q0_in_wHL"] <= 1e-12
    assert r["qk_in_wHT"] <= 1e-12


def test_physical_hamiltonian_needs_guard_three(small):
    space, hams, wt, dg = small
    with pytest.raises(TruncationError):
        gb.physical_hamiltonian(space, hams, dg, wt, TruncationBudget(3, 2))


@pytest.mark.parametrize("q", [0.1, 0.3, 1.0])
def test_ec_operator_matches_coulomb_grid_sum(q):
    space, _, _, dg = _setup(n0=1, q=q, modes=TWO_MODES)
    diag = gb.ec_operator(space, dg).mat.diagonal()
    ref = ec_grid(space.fock.grid, CUT, np.array(POS), q)
    np.testing.assert_allclose(diag, ref, rtol=1e-13)
