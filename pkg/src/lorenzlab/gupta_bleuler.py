"""W transform, dressing e^{iG}, physical subspace and the physical Hamiltonian.

Slot conventions follow the fock module: occupation slot 4 j + mu holds
photons of mode j in Lorentz slot mu; c^dagger(F) creates F[j, mu] b^dagger_{j mu}.
"""

from __future__ import annotations

import itertools
from math import factorial
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .coulomb import ec_grid, triviality_diagnostic
from .coupling import CoupledSpace, Hamiltonians, commutator, current, restricted_norm
from .errors import InfraredError, TruncationError
from .fock import ETA_DIAG, FockOperator, FockSpace, TruncationBudget
from .freefield import frequency_split
from .kinematics import CutoffProfile, Smearing, ir_integral

__all__ = [
    "W_BAR",
    "W_MATRIX",
    "ETA_BAR",
    "WTransform",
    "w_transform",
    "DressingG",
    "dressing",
    "simplify_check",
    "PhysicalSubspace",
    "build_physical_subspace",
    "annihilation_residual",
    "evolution_invariance",
    "PhysicalHamiltonianReport",
    "physical_hamiltonian",
]

S = 1.0 / np.sqrt(2.0)
W_BAR = np.array([[S, 0, 0, -S], [0, 1, 0, 0], [0, 0, 1, 0], [S, 0, 0, S]])
# one-photon map lifted to W; equals eta @ W_BAR, a symmetric orthogonal involution
W_MATRIX = np.array([[-S, 0, 0, S], [0, 1, 0, 0], [0, 0, 1, 0], [S, 0, 0, S]])
ETA_BAR = np.array([[0, 0, 0, -1], [0, 1, 0, 0], [0, 0, 1, 0], [-1, 0, 0, 0]], dtype=float)


# ---------------------------------------------------------------------------
# W transform

@dataclass
class WTransform:
    w_bar: np.ndarray
    w: np.ndarray
    fock_op: FockOperator

    def e_bar(self, grid) -> np.ndarray:
        """bar e_nu = sum_rho w_bar[nu, rho] e_rho, shape (n_modes, 4 [mu], 4 [nu])."""
        E = grid.polarization  # [j, mu, lam]
        return np.einsum("jmr,nr->jmn", E, self.w_bar)

    def eta_bar_defect(self, grid) -> float:
        eb = self.e_bar(grid)
        gram = np.einsum("jmn,m,jml->jnl", eb, ETA_DIAG, eb)
        return float(np.abs(gram - ETA_BAR[None]).max())

    def kappa_bar(self, grid) -> np.ndarray:
        """bar e^mu_nu k_mu per mode, shape (n_modes, 4)."""
        k_low = np.column_stack([-grid.omega, grid.modes])
        return np.einsum("jmn,jm->jn", self.e_bar(grid), k_low)

    def unitarity_defect(self) -> float:
        M = self.fock_op.mat
        d = M.conj().T @ M - sp.identity(M.shape[0])
        return float(abs(d).max()) if d.nnz else 0.0

    def lift(self, space: CoupledSpace) -> FockOperator:
        return space.fock_op(self.fock_op)


def w_transform(fock: FockSpace) -> WTransform:
    """Second quantization of the W one-photon map on the truncated Fock space."""
    return WTransform(W_BAR.copy(), W_MATRIX.copy(), fock.second_quantize(W_MATRIX))


# ---------------------------------------------------------------------------
# dressing

def _slot3_blocks(max_total: int, n_modes: int):
    """Occupation vectors of the longitudinal slots with total <= K, and index maps."""
    states = [np.zeros(n_modes, dtype=int)]
    for tot in range(1, max_total + 1):
        for combo in itertools.combinations_with_replacement(range(n_modes), tot):
            v = np.zeros(n_modes, dtype=int)
            np.add.at(v, list(combo), 1)
            states.append(v)
    states = np.array(states)
    index = {tuple(s): i for i, s in enumerate(states)}
    return states, index


def _displacement_generator(beta: np.ndarray, states: np.ndarray, index: dict) -> np.ndarray:
    """sum_j conj(beta_j) b_j + beta_j b_j^dagger on slot-3 occupations (dense)."""
    n = len(states)
    G = np.zeros((n, n), dtype=complex)
    for col, s in enumerate(states):
        for j in range(len(beta)):
            if s[j] > 0:
                t = s.copy()
                t[j] -= 1
                row = index[tuple(t)]
                G[row, col] += np.conj(beta[j]) * np.sqrt(s[j])
                G[col, row] += beta[j] * np.sqrt(s[j])
    return G


@dataclass
class DressingG:
    """G = sign * (-q/sqrt 2) sum_a [c^3(g^a) + c^dagger_3(g^a)], g^a = i hat(chi^{x_a})/w^(3/2)."""

    q: float
    cutoff: CutoffProfile
    space: CoupledSpace
    sign: float
    beta: np.ndarray          # per fiber: coefficient of b^dagger_{j3}
    fiber_of: np.ndarray      # fiber index per Dirac basis state
    ir_report: object = None

    @cached_property
    def generator(self) -> FockOperator:
        fock = self.space.fock
        lower, upper = fock.basis.lowering, fock.basis.raising
        total = sp.csr_matrix((self.space.dim, self.space.dim), dtype=complex)
        for j in range(fock.grid.n_modes):
            b = self.beta[self.fiber_of, j]
            if not np.any(b):
                continue
            total = total + sp.kron(sp.diags(np.conj(b)), lower[4 * j + 3], format="csr")
            total = total + sp.kron(sp.diags(b), upper[4 * j + 3], format="csr")
        return FockOperator(total.tocsr(), (-1, 1))

    def fiber_unitary(self, fiber: int, s: float = 1.0) -> sp.csr_matrix:
        """exp(i s G) on the Fock factor of one fiber, built block by block.

        G only moves longitudinal photons, so the truncated space splits into
        blocks labelled by the spectator occupations; each block is a slot-3
        space with total <= n0 - (spectator photons) and is exponentiated densely.
        """
        fock = self.space.fock
        M = fock.grid.n_modes
        n0 = fock.max_total
        states = fock.basis.states
        slot3 = states[:, 3::4]
        spect = states.copy()
        spect[:, 3::4] = 0
        rest = spect.sum(axis=1)
        beta = self.beta[fiber]
        cache = {}
        rows, cols, vals = [], [], []
        keys = {}
        for idx, key in enumerate(map(tuple, spect)):
            keys.setdefault(key, []).append(idx)
        for key, members in keys.items():
            K = n0 - int(rest[members[0]])
            if K not in cache:
                st, ind = _slot3_blocks(K, M)
                U = sla.expm(1j * s * _displacement_generator(beta, st, ind))
                cache[K] = (st, ind, U)
            st, ind, U = cache[K]
            local = np.array([ind[tuple(slot3[m])] for m in members])
            sub = U[np.ix_(local, local)]
            r, c = np.nonzero(np.abs(sub) > 0)
            rows.extend(np.asarray(members)[r])
            cols.extend(np.asarray(members)[c])
            vals.extend(sub[r, c])
        return sp.csr_matrix((vals, (rows, cols)), shape=(fock.dim, fock.dim))

    def unitary(self, s: float = 1.0) -> FockOperator:
        """exp(i s G) on the coupled space (block diagonal over position fibers)."""
        total = None
        for fib in range(len(self.beta)):
            ind = (self.fiber_of == fib).astype(float)
            if not ind.any():
                continue
            term = sp.kron(sp.diags(ind), self.fiber_unitary(fib, s), format="csr")
            total = term if total is None else total + term
        return FockOperator(total.tocsr(), (-self.space.max_total, self.space.max_total))

    def hermiticity_defect(self) -> float:
        d = self.generator.mat - self.generator.mat.conj().T
        return float(abs(d).max()) if d.nnz else 0.0

    def unitarity_defect(self, U: FockOperator | None = None) -> float:
        U = self.unitary(1.0) if U is None else U
        d = U.mat.conj().T @ U.mat - sp.identity(U.shape[0])
        return float(abs(d).max()) if d.nnz else 0.0

    def eta_defect(self, U: FockOperator | None = None) -> float:
        U = self.unitary(1.0) if U is None else U
        eta = self.space.eta.mat
        d = U.mat @ eta - eta @ U.mat
        return float(abs(d).max()) if d.nnz else 0.0

    def coherent_vacuum(self, fiber: int = 0) -> np.ndarray:
        """Closed-form e^{iG} Omega_vac on the Fock factor: coherent state with alpha_j = i beta_j."""
        fock = self.space.fock
        alpha = 1j * self.beta[fiber]
        states = fock.basis.states
        out = np.full(fock.dim, np.exp(-0.5 * np.sum(np.abs(alpha) ** 2)), dtype=complex)
        others = np.delete(states, np.arange(3, states.shape[1], 4), axis=1).sum(axis=1)
        n3 = states[:, 3::4]
        fact = np.array([[np.sqrt(float(factorial(int(n)))) for n in row] for row in n3])
        out *= np.prod(alpha[None, :] ** n3 / fact, axis=1)
        out[others > 0] = 0.0
        return out


def _fibers(space: CoupledSpace):
    """Point sets per fiber and the fiber index of every Dirac basis state."""
    if not space.quantum:
        return [tuple(range(space.n_particles))], np.zeros(1, dtype=int)
    n = space.lattice.n_sites
    if space.n_particles == 1:
        return [(s,) for s in range(n)], np.arange(space.dirac_dim) // 4
    d = space.lattice.dim
    pairs = [(i // 4, j // 4) for i in range(d) for j in range(i + 1, d)]
    uniq = sorted(set(pairs))
    pos = {p: k for k, p in enumerate(uniq)}
    return uniq, np.array([pos[p] for p in pairs])


def dressing(q: float, space: CoupledSpace, cutoff: CutoffProfile, sign: float = -1.0,
             ir_ceiling: float = 1e6, decades: int = 3) -> DressingG:
    """Build G after checking that the profile is infrared admissible at the grid's scale.

    ``sign = -1`` is the orientation for which the conjugated positive-frequency
    part loses its c-number; ``sign = +1`` reproduces the printed generator.
    """
    grid = space.fock.grid
    k_min = float(grid.omega.min())
    schedule = k_min * 10.0 ** -np.arange(decades + 1)
    rep = triviality_diagnostic(cutoff, schedule)
    if not rep.admissible:
        raise InfraredError(
            f"profile is GB-trivial: |chi|^2/w^3 grows like ln(1/eps) with slope {rep.slopes[-1]:.3e}")
    load = ir_integral(cutoff, 1.5, grid)
    if load > ir_ceiling:
        raise InfraredError(f"||chi/w^(3/2)||^2 = {load:.3e} exceeds the ceiling {ir_ceiling:.3e}")
    groups, fiber_of = _fibers(space)
    pts = space.particle_points()
    chi = cutoff.values(grid)
    g = 1j * chi[None, :] * grid.phases(pts) / grid.omega[None, :] ** 1.5
    sw = np.sqrt(grid.weights)
    beta = np.array([sign * (-q / np.sqrt(2.0)) * sw * g[list(grp)].sum(axis=0) for grp in groups])
    return DressingG(q, cutoff, space, sign, beta, fiber_of, rep)


# ---------------------------------------------------------------------------
# simplification of the positive-frequency part

def _w_lift(space: CoupledSpace, wt: WTransform) -> FockOperator:
    return wt.lift(space)


def target_annihilator(f: Smearing, t: float, space: CoupledSpace) -> FockOperator:
    """c^mu(h_mu) with h = (i sqrt(w) e^{iwt} hat(f^*), 0, 0, 0)."""
    w = space.fock.grid.omega
    h0 = 1j * np.sqrt(w) * np.exp(1j * w * t) * f.hat_conj()
    return space.fock_op(space.fock.c(0, ETA_DIAG[0] * h0))


def simplify_check(t: float, f: Smearing, space: CoupledSpace, dg: DressingG, wt: WTransform,
                   budget: TruncationBudget) -> dict:
    """Residuals of W e^{iG} Omega^+(t,f) e^{-iG} W^{-1} = c^mu(h_mu) on V_L.

    The conjugation is evaluated through the terminating series
    Omega^+ + [iG, Omega^+] (the next commutator is also reported).
    """
    if budget.guard < 2:
        raise TruncationError("the conjugation check needs guard >= 2")
    budget.check(space.max_total)
    plus, _ = frequency_split(f, t, space, dg.q, dg.cutoff)
    iG = 1j * dg.generator
    first = commutator(iG, plus)
    second = commutator(iG, first)
    conj = plus + first
    W = _w_lift(space, wt)
    lhs = W @ conj @ W
    diff = lhs - target_annihilator(f, t, space)
    cols = space.guarded_columns(budget.base_level)
    return {"residual": restricted_norm(diff, cols),
            "third_term": restricted_norm(second, cols),
            "target_norm": restricted_norm(target_annihilator(f, t, space), cols)}


# ---------------------------------------------------------------------------
# physical subspace

@dataclass
class PhysicalSubspace:
    vectors: np.ndarray          # columns: e^{-iG} W |d, n> for n in F_TL
    occupations: np.ndarray
    null_mask: np.ndarray        # at least one longitudinal-null photon
    transverse_mask: np.ndarray
    gram: np.ndarray
    eigenvalues: np.ndarray = field(default=None)

    @property
    def kernel_dim(self) -> int:
        return int(np.sum(np.abs(self.eigenvalues) < 1e-10))

    @property
    def null_count(self) -> int:
        return int(self.null_mask.sum())

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues.min())


def build_physical_subspace(space: CoupledSpace, dg: DressingG, wt: WTransform,
                            level: int, dirac_states=None) -> PhysicalSubspace:
    """Basis of V_phys up to photon level ``level``; the Gram matrix is the eta pairing."""
    fock = space.fock
    occ = fock.basis.states
    tl = (occ[:, 0::4].sum(axis=1) == 0) & (fock.levels <= level)
    idx = np.flatnonzero(tl)
    nullm = occ[idx][:, 3::4].sum(axis=1) > 0
    dsel = np.arange(space.dirac_dim) if dirac_states is None else np.asarray(dirac_states)
    E = sp.identity(fock.dim, format="csr")[:, idx]
    D = sp.identity(space.dirac_dim, format="csr")[:, dsel]
    cols = sp.kron(D, E, format="csr")
    W = _w_lift(space, wt).mat
    U = dg.unitary(-1.0).mat
    vecs = (U @ (W @ cols)).toarray()
    gram = vecs.conj().T @ (space.eta.mat @ vecs)
    evals = np.linalg.eigvalsh(0.5 * (gram + gram.conj().T))
    null_all = np.tile(nullm, len(dsel))
    return PhysicalSubspace(vecs, np.tile(occ[idx], (len(dsel), 1)), null_all, ~null_all,
                            gram, evals)


def annihilation_residual(sub: PhysicalSubspace, ops) -> float:
    """max over basis vectors and operators of ||Omega^+ v|| / ||v||."""
    norms = np.linalg.norm(sub.vectors, axis=0)
    worst = 0.0
    for op in ops:
        r = np.linalg.norm(op.mat @ sub.vectors, axis=0) / norms
        worst = max(worst, float(r.max()))
    return worst


def evolution_invariance(space: CoupledSpace, hams: Hamiltonians, dg: DressingG, wt: WTransform,
                         sub: PhysicalSubspace, t: float, level: int) -> dict:
    """Leak of e^{-itH} V_phys out of V_phys (below ``level``) and the change of the Gram matrix."""
    from scipy.sparse.linalg import expm_multiply
    psi = expm_multiply(-1j * t * hams.H.mat, sub.vectors)
    back = _w_lift(space, wt).mat @ (dg.unitary(1.0).mat @ psi)
    occ = space.fock.basis.states
    bad = np.tile((occ[:, 0::4].sum(axis=1) > 0) & (space.fock.levels <= level), space.dirac_dim)
    leak = float(np.linalg.norm(back[bad], axis=0).max(initial=0.0))
    gram = psi.conj().T @ (space.eta.mat @ psi)
    return {"leak": leak, "gram_change": float(np.abs(gram - sub.gram).max())}


# ---------------------------------------------------------------------------
# physical Hamiltonian

@dataclass
class PhysicalHamiltonianReport:
    comm_G_H1: float
    third_order: float
    structure: float
    q0_in_wHL: float
    qk_in_wHT: float
    invariance_phys: float
    invariance_null: float
    coulomb_residual: float
    ec: float
    transformed: FockOperator = field(repr=False, default=None)

    def record(self) -> dict:
        d = dict(vars(self))
        d.pop("transformed")
        return d


def _q_vectors(space: CoupledSpace, dg: DressingG, point) -> np.ndarray:
    """Q_mu^nu(x)[j] = i k_mu g^nu + e_mu^nu hat(chi^x)/sqrt w, shape (4 [mu], n_modes, 4 [nu]).

    The nu index labels the b^dagger_{j nu} coefficient, so c^dagger_nu(Q_mu^nu)
    carries Q directly and c^nu(Q_{mu nu}) carries eta_{nu nu} conj(Q).
    """
    fock = space.fock
    grid = fock.grid
    X = dg.cutoff.values(grid) * grid.phases(np.atleast_2d(point))[0] / np.sqrt(grid.omega)
    g = np.zeros((grid.n_modes, 4), dtype=complex)
    # the printed g enters Q; only the overall orientation of G is flipped
    g[:, 3] = -dg.sign * 1j * dg.cutoff.values(grid) * grid.phases(np.atleast_2d(point))[0] \
        / grid.omega ** 1.5
    k_low = np.column_stack([-grid.omega, grid.modes])
    sw = np.sqrt(grid.weights)
    Q = np.empty((4, grid.n_modes, 4), dtype=complex)
    for mu in range(4):
        Q[mu] = 1j * k_low[:, mu][:, None] * g + fock.a_dag_coeff(mu, X) / sw[:, None]
    return Q


def _coupling_from_q(space: CoupledSpace, dg: DressingG, hams: Hamiltonians,
                     transverse_only: bool = False, spatial_only: bool = False) -> FockOperator:
    """q sum_a alpha^{a mu} (1/sqrt 2)[c^nu(Q_{mu nu}(x_a)) + c^dagger_nu(Q_mu^nu(x_a))]."""
    fock = space.fock
    sw = np.sqrt(fock.grid.weights)
    pts = space.particle_points()
    lower, upper = fock.basis.lowering, fock.basis.raising
    Qs = np.array([_q_vectors(space, dg, p) for p in pts])  # [point, mu, j, nu]
    if transverse_only:
        Qs[..., 0] = 0.0
        Qs[..., 3] = 0.0
    mus = range(1, 4) if spatial_only else range(4)
    total = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    alpha = space.matrices.alpha4
    for j in range(fock.grid.n_modes):
        for nu in range(4):
            ann = np.sqrt(0.5) * hams.q * sw[j] * np.conj(ETA_DIAG[nu] * Qs[:, :, j, nu])
            cre = np.sqrt(0.5) * hams.q * sw[j] * Qs[:, :, j, nu]
            for coeff, mats in ((ann, lower), (cre, upper)):
                if space.quantum:
                    D = sum(sp.kron(sp.diags(coeff[:, mu]), alpha[mu]) for mu in mus)
                    D = space.lift(D)
                else:
                    D = sp.csr_matrix([[sum(space.source[mu] * coeff[:, mu].sum() for mu in mus)]])
                if D.nnz:
                    total = total + sp.kron(D, mats[4 * j + nu], format="csr")
    return FockOperator(total.tocsr(), (-1, 1))


def ec_operator(space: CoupledSpace, dg: DressingG) -> FockOperator:
    """-(q^2/2) sum_{a,b} alpha^{a mu} <k_mu g^a_nu, g^{b nu}> (N = 1 or fixed positions)."""
    if space.quantum and space.n_particles != 1:
        raise NotImplementedError("the scalar E^C operator is implemented for N = 1")
    grid = space.fock.grid
    pts = space.particle_points()
    g = 1j * dg.cutoff.values(grid)[None, :] * grid.phases(pts) / grid.omega[None, :] ** 1.5
    k_low = np.column_stack([-grid.omega, grid.modes])
    out = FockOperator.zero(space.dim)
    q2 = dg.q ** 2
    for mu in range(4):
        if space.quantum:
            vals = np.array([np.sum(grid.weights * k_low[:, mu] * np.abs(g[a]) ** 2)
                             for a in range(len(pts))])
        else:
            tot = g.sum(axis=0)
            vals = np.array([np.sum(grid.weights * k_low[:, mu] * np.conj(g[a]) * tot)
                             for a in range(len(pts))])
        vals = -0.5 * q2 * vals
        if np.any(np.abs(vals) > 0):
            out = out + current(vals, mu, space, 1.0).operator
    return out


def physical_hamiltonian(space: CoupledSpace, hams: Hamiltonians, dg: DressingG,
                         wt: WTransform, budget: TruncationBudget,
                         dirac_cols=None) -> PhysicalHamiltonianReport:
    """Check the transformed Hamiltonian and compare its transverse block with the Coulomb form.

    In quantum mode the lattice momentum only commutes exactly with the plane
    waves in G on band-limited spinors; pass their isometry as ``dirac_cols``.
    The invariance and Coulomb blocks are always evaluated on all Dirac states.
    """
    if budget.guard < 3:
        raise TruncationError("the double commutator with G needs guard >= 3")
    budget.check(space.max_total)
    fock = space.fock
    L = budget.base_level
    cols = space.guarded_columns(L, dirac_cols)
    iG = 1j * dg.generator
    c1 = commutator(iG, hams.H)
    c2 = commutator(iG, c1)
    c3 = commutator(iG, c2)
    Ht = hams.H + c1 + 0.5 * c2
    ECop = ec_operator(space, dg)
    model = hams.H0 + _coupling_from_q(space, dg, hams) + ECop
    structure = restricted_norm(Ht - model, cols)

    Q0 = np.array([_q_vectors(space, dg, p)[0] for p in space.particle_points()])
    Qk = np.array([_q_vectors(space, dg, p)[1:] for p in space.particle_points()])
    q0_def = float(max(np.abs(Q0[..., 0] - Q0[..., 3]).max(), np.abs(Q0[..., 1:3]).max()))
    qk_def = float(max(np.abs(Qk[..., 0]).max(), np.abs(Qk[..., 3]).max()))

    # invariance of W F_TL and of its null part, in the dressed frame
    W = _w_lift(space, wt)
    Hw = W @ Ht @ W
    occ = fock.basis.states
    tl_f = occ[:, 0::4].sum(axis=1) == 0
    long_f = occ[:, 3::4].sum(axis=1) > 0
    lev_f = fock.levels <= L
    tile = lambda m: np.tile(m, space.dirac_dim)
    inv_phys = _cross_block(Hw, tile(tl_f), _columns(space, tl_f & lev_f, dirac_cols))
    inv_null = _cross_block(Hw, tile(tl_f & long_f), _columns(space, tl_f & long_f & lev_f, dirac_cols))

    # transverse block against the Coulomb-gauge form
    trans = tl_f & ~long_f
    coul = hams.H0 + _coupling_from_q(space, dg, hams, transverse_only=True, spatial_only=True) + ECop
    diff = sp.diags(tile(trans).astype(float)) @ ((Hw.mat - coul.mat) @ _columns(space, trans & lev_f, dirac_cols))
    coulomb_res = float(np.abs(diff).max()) if diff.nnz else 0.0
    ec = ec_grid(fock.grid, dg.cutoff, space.particle_points(), dg.q) if not space.quantum else \
        float(np.real(ECop.mat.diagonal()[0]))
    return PhysicalHamiltonianReport(
        comm_G_H1=restricted_norm(commutator(iG, hams.H1), cols),
        third_order=restricted_norm(c3, cols),
        structure=structure, q0_in_wHL=q0_def, qk_in_wHT=qk_def,
        invariance_phys=inv_phys, invariance_null=inv_null,
        coulomb_residual=coulomb_res, ec=ec, transformed=Ht)


def _columns(space: CoupledSpace, fock_mask: np.ndarray, dirac_cols=None) -> sp.csr_matrix:
    E = sp.identity(space.fock.dim, format="csr")[:, np.flatnonzero(fock_mask)]
    D = sp.identity(space.dirac_dim, format="csr") if dirac_cols is None else sp.csr_matrix(dirac_cols)
    return sp.kron(D, E, format="csr")


def _cross_block(op: FockOperator, target: np.ndarray, cols: sp.csr_matrix) -> float:
    """Largest entry of op applied to ``cols`` that lands outside the ``target`` rows."""
    M = sp.diags((~target).astype(float)) @ (op.mat @ cols)
    return float(np.abs(M).max()) if M.nnz else 0.0
