"""Coupled Dirac x Fock space, gauge fields, currents and Hamiltonians.

Vectors of the coupled space are stored with index ``d * dim_fock + n``
(Dirac factor first).  In fixed-position mode there is no Dirac factor; the
particles sit at given points and couple through the constant current weight
``u = (1, 0, 0, 0)`` (a static scalar source).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dirac import (DiracMatrices, PotentialField, SpinorLattice, antisymmetric_isometry,
                    build_dirac_hamiltonian)
from .errors import AliasingError, GridError, TruncationError
from .fock import ETA_DIAG, FockOperator, FockSpace, TruncationBudget
from .kinematics import CutoffProfile, Smearing

__all__ = [
    "CoupledSpace",
    "GaugeFieldOp",
    "CurrentOp",
    "Hamiltonians",
    "gauge_field_smeared",
    "gauge_field_point",
    "conjugate_momentum",
    "build_hamiltonians",
    "current",
    "commutator",
    "guarded",
    "restricted_norm",
    "conservation_check",
    "equation_of_motion_check",
    "divergence_field",
]

SQRT_HALF = np.sqrt(0.5)


class CoupledSpace:
    """Dirac sector (N = 1 or 2 on a lattice, or fixed positions) times photon Fock space."""

    def __init__(self, fock: FockSpace, lattice: SpinorLattice | None = None,
                 n_particles: int = 1, positions=None,
                 matrices: DiracMatrices | None = None):
        self.fock = fock
        self.lattice = lattice
        self.matrices = matrices or DiracMatrices.dirac()
        if lattice is None:
            if positions is None:
                raise ValueError("fixed-position mode needs particle positions")
            self.positions = np.atleast_2d(np.asarray(positions, dtype=float))
            self.n_particles = len(self.positions)
            self.mode = "fixed"
        else:
            if n_particles not in (1, 2):
                raise ValueError("only N = 1 or N = 2 particles are supported")
            self.positions = None
            self.n_particles = n_particles
            self.mode = "quantum"
        self.source = np.array([1.0, 0.0, 0.0, 0.0])

    # dimensions -----------------------------------------------------------
    @property
    def quantum(self) -> bool:
        return self.mode == "quantum"

    @cached_property
    def isometry(self) -> sp.csr_matrix | None:
        if self.quantum and self.n_particles == 2:
            return antisymmetric_isometry(self.lattice.dim)
        return None

    @property
    def dirac_dim(self) -> int:
        if not self.quantum:
            return 1
        d = self.lattice.dim
        return d if self.n_particles == 1 else d * (d - 1) // 2

    @property
    def dim(self) -> int:
        return self.dirac_dim * self.fock.dim

    @cached_property
    def levels(self) -> np.ndarray:
        return np.tile(self.fock.levels, self.dirac_dim)

    @property
    def max_total(self) -> int:
        return self.fock.max_total

    @cached_property
    def eta(self) -> FockOperator:
        return self.fock_op(self.fock.eta)

    # lifting --------------------------------------------------------------
    def lift(self, one_body) -> sp.csr_matrix:
        """N-particle version sum_a O^a of a one-particle Dirac operator."""
        O = sp.csr_matrix(one_body)
        if self.n_particles == 1:
            return O
        d = self.lattice.dim
        I = sp.identity(d, format="csr")
        Q = self.isometry
        return (Q.T @ (sp.kron(O, I) + sp.kron(I, O)) @ Q).tocsr()

    def kron(self, dirac, fock: FockOperator) -> FockOperator:
        return FockOperator(sp.kron(sp.csr_matrix(dirac), fock.mat, format="csr"), fock.shift)

    def fock_op(self, F: FockOperator) -> FockOperator:
        return self.kron(sp.identity(self.dirac_dim, format="csr"), F)

    def dirac_op(self, one_body, lifted: bool = False) -> FockOperator:
        D = sp.csr_matrix(one_body) if lifted else self.lift(one_body)
        return FockOperator(sp.kron(D, sp.identity(self.fock.dim), format="csr"), (0, 0))

    def guard_mask(self, level: int) -> np.ndarray:
        return self.levels <= level

    def guarded_columns(self, level: int, dirac_cols=None) -> sp.csr_matrix:
        """Isometry onto (dirac_cols) x V_level; ``dirac_cols`` defaults to all Dirac states."""
        fmask = self.fock.levels <= level
        E = sp.identity(self.fock.dim, format="csr")[:, np.flatnonzero(fmask)]
        if dirac_cols is None:
            D = sp.identity(self.dirac_dim, format="csr")
        else:
            D = sp.csr_matrix(dirac_cols)
        return sp.kron(D, E, format="csr")

    def random_state(self, rng: np.random.Generator, level: int | None = None) -> np.ndarray:
        v = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        if level is not None:
            v[self.levels > level] = 0.0
        return v / np.linalg.norm(v)

    def particle_points(self) -> np.ndarray:
        """Lattice sites (quantum mode) or the fixed positions."""
        return self.lattice.coords if self.quantum else self.positions


# ---------------------------------------------------------------------------
# gauge fields

@dataclass
class GaugeFieldOp:
    """Components A_0..A_3 as Fock operators, with the data that built them."""

    components: list
    smearing: object = None
    cutoff: object = None

    def __getitem__(self, mu: int) -> FockOperator:
        return self.components[mu]


def _field_from(fock: FockSpace, u, v, mu: int) -> FockOperator:
    """(1/sqrt 2)(a_mu(u) + a^dagger_mu(v))."""
    return SQRT_HALF * (fock.a(mu, u) + fock.a_dag(mu, v))


def gauge_field_smeared(fock: FockSpace, f: Smearing) -> GaugeFieldOp:
    """A_mu(f) = (1/sqrt 2)(a_mu(hat(f^*)/sqrt w) + a^dagger_mu(hat f/sqrt w))."""
    if f.grid is not fock.grid:
        raise GridError("smearing lives on a different mode grid")
    sw = np.sqrt(fock.grid.omega)
    u, v = f.hat_conj() / sw, f.fhat / sw
    return GaugeFieldOp([_field_from(fock, u, v, mu) for mu in range(4)], smearing=f)


def conjugate_momentum(fock: FockSpace, f: Smearing) -> GaugeFieldOp:
    """Pi_mu(f) = (1/sqrt 2)(a_mu(i w hat(f^*)/sqrt w) + a^dagger_mu(i w hat f/sqrt w))."""
    w = fock.grid.omega
    sw = np.sqrt(w)
    u, v = 1j * w * f.hat_conj() / sw, 1j * w * f.fhat / sw
    return GaugeFieldOp([_field_from(fock, u, v, mu) for mu in range(4)], smearing=f)


def point_field_coefficients(fock: FockSpace, points, cutoff: CutoffProfile):
    """Ladder coefficients of A_mu(x) for each point.

    Returns ``(ann, cre)`` of shape (4, n_points, n_modes, 4): the coefficient
    of b_{j nu} (resp. b^dagger_{j nu}) in A_mu(x_p).  The profile is real and
    radial, so hat((chi^x)^*) = hat(chi^x) = exp(-i k.x) chi_hat.
    """
    grid = fock.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    F = cutoff.values(grid)[None, :] * grid.phases(pts) / np.sqrt(grid.omega)[None, :]
    E = grid.polarization  # [j, mu, nu]
    sw = np.sqrt(grid.weights)
    base = SQRT_HALF * sw[None, :, None] * np.transpose(E, (1, 0, 2))  # [mu, j, nu]
    base = ETA_DIAG[:, None, None] * base
    ann = base[:, None] * np.conj(F)[None, :, :, None]
    cre = base[:, None] * ETA_DIAG[None, None, None, :] * F[None, :, :, None]
    return ann, cre


def gauge_field_point(fock: FockSpace, x, cutoff: CutoffProfile) -> GaugeFieldOp:
    """Point-like field A_mu(chi^x) with the phase-shifted profile."""
    ann, cre = point_field_coefficients(fock, [x], cutoff)
    comps = []
    for mu in range(4):
        mat = fock.ladder_sum(ann[mu, 0], False) + fock.ladder_sum(cre[mu, 0], True)
        comps.append(FockOperator(mat, (-1, 1)))
    return GaugeFieldOp(comps, cutoff=cutoff)


# ---------------------------------------------------------------------------
# currents and Hamiltonians

@dataclass
class CurrentOp:
    """j^mu(f) as an operator on the coupled space."""

    operator: FockOperator
    mu: int
    bound: float


def _site_values(space: CoupledSpace, f) -> np.ndarray:
    pts = space.particle_points()
    if isinstance(f, Smearing):
        return f.at(pts)
    if callable(f):
        return np.asarray(f(pts), dtype=complex)
    vals = np.asarray(f, dtype=complex)
    if vals.shape != (len(pts),):
        raise ValueError(f"expected {len(pts)} point values, got {vals.shape}")
    return vals


def current_dirac(space: CoupledSpace, f, mu: int, q: float) -> sp.csr_matrix:
    """Dirac-factor matrix of j^mu(f) (already N-particle, or 1x1 in fixed mode)."""
    vals = _site_values(space, f)
    if space.quantum:
        one = q * sp.kron(sp.diags(vals), space.matrices.alpha4[mu], format="csr")
        return space.lift(one)
    return sp.csr_matrix(np.array([[q * space.source[mu] * vals.sum()]]))


def current(f, mu: int, space: CoupledSpace, q: float) -> CurrentOp:
    """j^mu(f) = q sum_a alpha^{a mu} f(x^a)."""
    D = current_dirac(space, f, mu, q)
    vals = _site_values(space, f)
    op = FockOperator(sp.kron(D, sp.identity(space.fock.dim), format="csr"), (0, 0))
    return CurrentOp(op, mu, abs(q) * space.n_particles * float(np.abs(vals).max(initial=0.0)))


@dataclass
class Hamiltonians:
    H0: FockOperator
    H1: FockOperator
    H: FockOperator
    HD: sp.csr_matrix | None = None
    q: float = 0.0
    mass: float = 0.0
    cutoff: CutoffProfile | None = None

    def mass_term(self, space: CoupledSpace) -> FockOperator:
        """sum_a beta^a M (zero in fixed mode)."""
        if not space.quantum:
            return FockOperator.zero(space.dim)
        beta = space.lattice.spinor_field(space.matrices.beta)
        return self.mass * space.dirac_op(beta)


def interaction(space: CoupledSpace, q: float, cutoff: CutoffProfile) -> FockOperator:
    """H_1 = q sum_a alpha^{a mu} A_mu(x^a) as a fibered operator."""
    fock = space.fock
    pts = space.particle_points()
    ann, cre = point_field_coefficients(fock, pts, cutoff)
    lower, upper = fock.basis.lowering, fock.basis.raising
    total = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    alpha = space.matrices.alpha4
    for j in range(fock.grid.n_modes):
        for nu in range(4):
            s = 4 * j + nu
            if space.quantum:
                Dann = sum(sp.kron(sp.diags(ann[mu, :, j, nu]), alpha[mu]) for mu in range(4))
                Dcre = sum(sp.kron(sp.diags(cre[mu, :, j, nu]), alpha[mu]) for mu in range(4))
                Dann, Dcre = space.lift(q * Dann), space.lift(q * Dcre)
            else:
                u = space.source
                Dann = sp.csr_matrix([[q * np.einsum("m,mp->", u, ann[:, :, j, nu])]])
                Dcre = sp.csr_matrix([[q * np.einsum("m,mp->", u, cre[:, :, j, nu])]])
            if Dann.nnz:
                total = total + sp.kron(Dann, lower[s], format="csr")
            if Dcre.nnz:
                total = total + sp.kron(Dcre, upper[s], format="csr")
    return FockOperator(total.tocsr(), (-1, 1))


def build_hamiltonians(q: float, space: CoupledSpace, V: PotentialField | None = None,
                       M: float = 0.0, cutoff: CutoffProfile | None = None) -> Hamiltonians:
    """H_0 = H_D(V, N) + dGamma(w), H_1 = q sum_a alpha^{a mu} A_mu(x^a), H = H_0 + H_1."""
    if cutoff is None:
        raise ValueError("a cutoff profile is required")
    fock = space.fock
    hph = space.fock_op(fock.dgamma(fock.grid.omega))
    HD = None
    if space.quantum:
        if V is not None and V.values.shape[0] != space.lattice.n_sites:
            raise GridError("potential does not match the lattice")
        HD = space.lift(build_dirac_hamiltonian(V, M, space.lattice, space.matrices))
        H0 = FockOperator(sp.kron(HD, sp.identity(fock.dim), format="csr"), (0, 0)) + hph
    else:
        H0 = hph
    H1 = interaction(space, q, cutoff) if q != 0 else FockOperator(
        sp.csr_matrix((space.dim, space.dim), dtype=complex), (-1, 1))
    return Hamiltonians(H0, H1, H0 + H1, HD, q, M, cutoff)


# ---------------------------------------------------------------------------
# commutator identities

def commutator(A: FockOperator, B: FockOperator, factor: complex = 1.0) -> FockOperator:
    """factor * (AB - BA) on the full truncated space, with summed shifts."""
    C = A @ B - B @ A
    return factor * C


def guarded(op: FockOperator, space: CoupledSpace, budget: TruncationBudget,
            need: int) -> FockOperator:
    """Restrict to V_L after checking that ``need`` photon raises fit into the guard."""
    if need > budget.guard:
        raise TruncationError(f"guard {budget.guard} too small: needs {need}")
    budget.check(space.max_total)
    return op.restricted(space.guard_mask(budget.base_level))


def restricted_norm(op, cols) -> float:
    """Frobenius norm of ``op @ cols`` (an upper bound on the restricted operator norm)."""
    M = op.mat if isinstance(op, FockOperator) else op
    prod = M @ cols
    if sp.issparse(prod):
        return float(spla.norm(prod))
    return float(np.linalg.norm(prod))


def _band_columns(space: CoupledSpace, f_harm: list[int], level: int):
    lat = space.lattice
    bounds = []
    for P, h in zip(lat.extent, f_harm):
        b = (P - 1) // 2 - h
        if b < 0:
            raise AliasingError("function harmonics leave no alias-free states")
        bounds.append(b)
    Q = lat.band_limited_isometry(bounds)
    if space.n_particles == 2:
        raise NotImplementedError("band-limited checks are single-particle")
    return space.guarded_columns(level, sp.csr_matrix(Q))


def _axis_harmonics(lattice: SpinorLattice, vals) -> list[int]:
    out = []
    spec = np.fft.fftn(np.asarray(vals, dtype=complex).reshape(lattice.extent))
    nz = np.abs(spec) > 1e-12 * max(1.0, np.abs(spec).max())
    for ax in range(3):
        m = np.abs(lattice.harmonics[ax])
        shape = [1, 1, 1]
        shape[ax] = -1
        mm = np.broadcast_to(m.reshape(shape), lattice.extent)
        out.append(int(mm[nz].max()) if nz.any() else 0)
    return out


def check_band_limit(lattice: SpinorLattice, vals) -> list[int]:
    """Per-axis harmonic content; rejects anything above P/4 on any axis."""
    harm = _axis_harmonics(lattice, vals)
    for P, h in zip(lattice.extent, harm):
        if h > P / 4:
            raise AliasingError(f"harmonic {h} exceeds the alias-free bound P/4 = {P / 4}")
    return harm


def conservation_check(space: CoupledSpace, hams: Hamiltonians, f_sites, budget: TruncationBudget,
                       q: float | None = None) -> float:
    """|| [iH, j^0(f)] - j^k(d_k f) || on guarded band-limited states."""
    if not space.quantum:
        raise ValueError("current conservation needs the quantum (lattice) mode")
    q = hams.q if q is None else q
    lat = space.lattice
    vals = np.asarray(f_sites, dtype=complex)
    harm = check_band_limit(lat, vals)
    j0 = current(vals, 0, space, q).operator
    lhs = commutator(hams.H, j0, 1j)
    rhs = FockOperator.zero(space.dim)
    for k in range(3):
        if lat.extent[k] == 1:
            continue
        rhs = rhs + current(lat.spectral_derivative(vals, k), k + 1, space, q).operator
    cols = _band_columns(space, harm, budget.base_level)
    return restricted_norm(lhs - rhs, cols)


def equation_of_motion_check(space: CoupledSpace, hams: Hamiltonians, f: Smearing, mu: int,
                             budget: TruncationBudget, band_limited: bool = False) -> tuple:
    """Residuals of ad(A_mu(f)) = Pi_mu(f) and ad^2(A_mu(f)) = A_mu(Laplacian f) - j_mu(chi*f).

    Both are measured on V_L (times band-limited Dirac states if requested).
    """
    fock = space.fock
    if budget.guard < 3:
        raise TruncationError("nested commutator ad^2 needs guard >= 3")
    budget.check(space.max_total)
    A = space.fock_op(gauge_field_smeared(fock, f)[mu])
    Pi = space.fock_op(conjugate_momentum(fock, f)[mu])
    adA = commutator(hams.H, A, 1j)
    ad2A = commutator(hams.H, adA, 1j)
    g = f.convolved(hams.cutoff)
    j_lower = ETA_DIAG[mu] * current(g, mu, space, hams.q).operator
    rhs2 = space.fock_op(gauge_field_smeared(fock, f.laplacian())[mu]) - j_lower
    if band_limited and space.quantum:
        cols = _band_columns(space, [0, 0, 0], budget.base_level)
    else:
        cols = space.guarded_columns(budget.base_level)
    return restricted_norm(adA - Pi, cols), restricted_norm(ad2A - rhs2, cols)


def divergence_field(space: CoupledSpace, hams: Hamiltonians, f: Smearing,
                     budget: TruncationBudget) -> FockOperator:
    """d^mu A_mu(f) at t = 0 from commutators: -ad(A_0(f)) - sum_k A_k(d_k f)."""
    fock = space.fock
    A0 = space.fock_op(gauge_field_smeared(fock, f)[0])
    out = -1.0 * commutator(hams.H, A0, 1j)
    for k in range(3):
        out = out - space.fock_op(gauge_field_smeared(fock, f.derivative(k))[k + 1])
    return guarded(out, space, budget, 2)
