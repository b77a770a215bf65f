"""First-quantized lattice Dirac sector.

Sites of a periodic ``P1 x P2 x P3`` lattice are enumerated in C order and a
lattice spinor is stored with index ``4 * site + spinor``.  Coordinates are
minimal-image, ``x = ((n + P//2) mod P - P//2) * a``, so ``n -> -n mod P`` is
the parity map.  Momentum is the spectral (Fourier multiplier) derivative with
the Nyquist harmonic set to zero, which keeps ``p`` odd under parity.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import AliasingError

__all__ = [
    "DiracMatrices",
    "SpinorLattice",
    "PotentialField",
    "CPConjugation",
    "build_dirac_hamiltonian",
    "coulomb_potential_field",
    "pauli_conjugation",
    "check_cp_commutation",
    "antisymmetrizer",
    "antisymmetric_isometry",
]

SIGMA = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)

# average of 1/r over the unit cube centred at the origin: 3 ln(2 + sqrt 3) - pi/2
CUBE_INVERSE_DISTANCE = 3.0 * np.log(2.0 + np.sqrt(3.0)) - np.pi / 2.0


@dataclass(frozen=True, eq=False)
class DiracMatrices:
    """alpha^1..alpha^3 and beta, 4x4 Hermitian."""

    alpha: np.ndarray
    beta: np.ndarray
    name: str = "dirac"

    def __post_init__(self):
        defect = self.clifford_defect()
        if defect > 1e-14:
            raise ValueError(f"matrices violate the Clifford relations (defect {defect:.2e})")

    @classmethod
    def dirac(cls) -> "DiracMatrices":
        z = np.zeros((2, 2))
        alpha = np.array([np.block([[z, s], [s, z]]) for s in SIGMA])
        beta = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
        return cls(alpha, beta, "dirac")

    @classmethod
    def weyl(cls) -> "DiracMatrices":
        z = np.zeros((2, 2))
        alpha = np.array([np.block([[-s, z], [z, s]]) for s in SIGMA])
        beta = np.block([[z, np.eye(2)], [np.eye(2), z]]).astype(complex)
        return cls(alpha, beta, "weyl")

    @classmethod
    def named(cls, name: str) -> "DiracMatrices":
        return {"dirac": cls.dirac, "weyl": cls.weyl}[name]()

    def clifford_defect(self) -> float:
        I = np.eye(4)
        out = np.linalg.norm(self.beta @ self.beta - I)
        for i in range(3):
            out = max(out, np.linalg.norm(self.alpha[i] @ self.beta + self.beta @ self.alpha[i]))
            for j in range(3):
                ac = self.alpha[i] @ self.alpha[j] + self.alpha[j] @ self.alpha[i]
                out = max(out, np.linalg.norm(ac - 2.0 * (i == j) * I))
        return float(out)

    @property
    def alpha4(self) -> np.ndarray:
        """(alpha^0 = Id, alpha^1, alpha^2, alpha^3)."""
        return np.concatenate([np.eye(4, dtype=complex)[None], self.alpha])

    @property
    def gamma(self) -> np.ndarray:
        """gamma^0 = beta, gamma^j = beta alpha^j."""
        return np.concatenate([self.beta[None], np.array([self.beta @ a for a in self.alpha])])


class SpinorLattice:
    """Periodic position lattice carrying 4-component spinors."""

    def __init__(self, extent, spacing: float = 1.0):
        if np.isscalar(extent):
            extent = (int(extent),) * 3
        self.extent = tuple(int(p) for p in extent)
        if len(self.extent) != 3 or min(self.extent) < 1:
            raise ValueError("extent must be three positive integers")
        self.spacing = float(spacing)
        self.n_sites = int(np.prod(self.extent))
        self.spinor_dim = 4

    @property
    def dim(self) -> int:
        return 4 * self.n_sites

    @cached_property
    def harmonics(self) -> list[np.ndarray]:
        """Integer harmonic m (DFT order) along each axis."""
        return [np.rint(np.fft.fftfreq(P) * P).astype(int) for P in self.extent]

    @cached_property
    def axis_coords(self) -> list[np.ndarray]:
        return [(((np.arange(P) + P // 2) % P) - P // 2) * self.spacing for P in self.extent]

    @cached_property
    def momentum_values(self) -> list[np.ndarray]:
        """Dual-lattice momenta per axis; the Nyquist value is replaced by 0."""
        out = []
        for P, m in zip(self.extent, self.harmonics):
            k = 2.0 * np.pi * m / (P * self.spacing)
            if P % 2 == 0:
                k[m == -P // 2] = 0.0
            out.append(k)
        return out

    @cached_property
    def coords(self) -> np.ndarray:
        """Site coordinates, shape (n_sites, 3)."""
        g = np.meshgrid(*self.axis_coords, indexing="ij")
        return np.stack([c.reshape(-1) for c in g], axis=1)

    @cached_property
    def parity(self) -> np.ndarray:
        """Permutation n -> -n mod P (site index of -x)."""
        idx = np.meshgrid(*[(-np.arange(P)) % P for P in self.extent], indexing="ij")
        return np.ravel_multi_index([i.reshape(-1) for i in idx], self.extent)

    def dft(self, axis: int) -> np.ndarray:
        """Unitary DFT along one axis: F[m, n] = exp(-i k_m x_n)/sqrt(P)."""
        P = self.extent[axis]
        k = 2.0 * np.pi * self.harmonics[axis] / (P * self.spacing)
        return np.exp(-1j * np.outer(k, self.axis_coords[axis])) / np.sqrt(P)

    def _embed(self, mats: list[np.ndarray]) -> sp.csr_matrix:
        out = sp.csr_matrix(np.ones((1, 1)))
        for m in mats:
            out = sp.kron(out, sp.csr_matrix(m), format="csr")
        return out

    def _axis_operator(self, axis: int, op: np.ndarray) -> sp.csr_matrix:
        mats = [np.eye(P) for P in self.extent]
        mats[axis] = op
        return self._embed(mats)

    def momentum_scalar(self, axis: int) -> sp.csr_matrix:
        """Spectral momentum p_axis on scalar lattice functions."""
        F = self.dft(axis)
        p = F.conj().T @ np.diag(self.momentum_values[axis]) @ F
        p[np.abs(p) < 1e-15] = 0.0
        return self._axis_operator(axis, p)

    def momentum(self, axis: int) -> sp.csr_matrix:
        """p_axis acting on lattice spinors."""
        return sp.kron(self.momentum_scalar(axis), sp.identity(4), format="csr")

    def position_scalar(self, axis: int) -> sp.csr_matrix:
        """Position operator of the trigonometric interpolant along ``axis``.

        In the Fourier basis its entries are (-1)^(m'-m) / (i (k_m' - k_m)) off
        the diagonal, zero on it, and the Nyquist row and column vanish.  Then
        i[p, x] = Pi - |s><s| with s_m = (-1)^m and Pi the projector removing
        the Nyquist harmonic: the identity on band-limited spinors up to a
        rank-one term that only sees the interpolant's value at the periodic seam.
        """
        P = self.extent[axis]
        m = self.harmonics[axis]
        k = 2.0 * np.pi * m / (P * self.spacing)
        d = m[None, :] - m[:, None]
        dk = k[None, :] - k[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            X = np.where(d != 0, (-1.0) ** d / (1j * dk), 0.0)
        if P % 2 == 0:
            nyq = m == -P // 2
            X[nyq, :] = 0.0
            X[:, nyq] = 0.0
        F = self.dft(axis)
        x = (F.conj().T @ X @ F).real
        return self._axis_operator(axis, x)

    def position(self, axis: int) -> sp.csr_matrix:
        return sp.kron(self.position_scalar(axis), sp.identity(4), format="csr")

    def seam_vector(self, axis: int) -> np.ndarray:
        """Fourier-space vector s_m = (-1)^m (zero on Nyquist) mapped to sites."""
        P = self.extent[axis]
        m = self.harmonics[axis]
        s = (-1.0) ** m
        if P % 2 == 0:
            s[m == -P // 2] = 0.0
        return self.dft(axis).conj().T @ s

    def multiplication(self, values) -> sp.csr_matrix:
        """Diagonal multiplication by a scalar site function, on spinors."""
        values = np.asarray(values)
        return sp.kron(sp.diags(values), sp.identity(4), format="csr")

    def spinor_field(self, mats) -> sp.csr_matrix:
        """Block-diagonal operator with a 4x4 matrix per site."""
        mats = np.asarray(mats, dtype=complex)
        if mats.shape == (4, 4):
            mats = np.broadcast_to(mats, (self.n_sites, 4, 4))
        return sp.block_diag(list(mats), format="csr")

    def harmonic_mask(self, bound) -> np.ndarray:
        """Fourier-space mask |m_axis| <= bound_axis (Nyquist excluded); int or per-axis bounds."""
        bounds = [bound] * 3 if np.isscalar(bound) else list(bound)
        masks = []
        for P, m, b in zip(self.extent, self.harmonics, bounds):
            ok = np.abs(m) <= b
            if P % 2 == 0:
                ok &= m != -P // 2
            masks.append(ok)
        g = np.meshgrid(*masks, indexing="ij")
        return np.logical_and.reduce([x.reshape(-1) for x in g])

    def band_limited_isometry(self, bound) -> np.ndarray:
        """Columns spanning spinors whose harmonics obey |m| <= bound on every axis."""
        F = np.ones((1, 1))
        for ax in range(3):
            F = np.kron(F, self.dft(ax))
        cols = np.flatnonzero(self.harmonic_mask(bound))
        basis = F.conj().T[:, cols]
        return np.kron(basis, np.eye(4))

    def function_harmonics(self, values) -> int:
        """Largest |m| (over axes) carried by a scalar site function."""
        vals = np.asarray(values, dtype=complex).reshape(self.extent)
        spec = np.fft.fftn(vals)
        g = np.meshgrid(*self.harmonics, indexing="ij")
        mags = np.max(np.abs(np.stack(g)), axis=0)
        nz = np.abs(spec) > 1e-12 * max(1.0, np.abs(spec).max())
        return int(mags[nz].max()) if nz.any() else 0

    def spectral_derivative(self, values, axis: int) -> np.ndarray:
        """d/dx_axis of a band-limited site function (rejects Nyquist content)."""
        vals = np.asarray(values, dtype=complex).reshape(self.extent)
        P = self.extent[axis]
        spec = np.fft.fft(vals, axis=axis)
        if P % 2 == 0:
            nyq = np.take(spec, [P // 2], axis=axis)
            if np.abs(nyq).max() > 1e-12 * max(1.0, np.abs(spec).max()):
                raise AliasingError("function carries the Nyquist harmonic")
        k = 2.0 * np.pi * self.harmonics[axis] / (P * self.spacing)
        shape = [1, 1, 1]
        shape[axis] = P
        deriv = np.fft.ifft(1j * k.reshape(shape) * spec, axis=axis)
        return deriv.reshape(-1)


@dataclass(eq=False)
class PotentialField:
    """Per-site 4x4 Hermitian potential matrix."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 3 or v.shape[1:] != (4, 4):
            raise ValueError("potential must have shape (n_sites, 4, 4)")
        herm = np.abs(v - np.conj(np.swapaxes(v, 1, 2))).max(initial=0.0)
        if herm > 1e-13 * max(1.0, np.abs(v).max(initial=0.0)):
            raise ValueError(f"potential is not Hermitian per site (defect {herm:.2e})")
        self.values = v

    @classmethod
    def zero(cls, lattice: SpinorLattice) -> "PotentialField":
        return cls(np.zeros((lattice.n_sites, 4, 4)))

    @classmethod
    def scalar(cls, lattice: SpinorLattice, values) -> "PotentialField":
        values = np.asarray(values, dtype=float)
        return cls(values[:, None, None] * np.eye(4)[None])

    def operator(self, lattice: SpinorLattice) -> sp.csr_matrix:
        return lattice.spinor_field(self.values)


def coulomb_potential_field(Z: float, q: float, lattice: SpinorLattice) -> PotentialField:
    """-Z q^2 / |x| on minimal-image distances; the origin gets the cell average of 1/r."""
    r = np.linalg.norm(lattice.coords, axis=1)
    inv = np.empty_like(r)
    nz = r > 0
    inv[nz] = 1.0 / r[nz]
    inv[~nz] = CUBE_INVERSE_DISTANCE / lattice.spacing
    return PotentialField.scalar(lattice, -Z * q**2 * inv)


def build_dirac_hamiltonian(V: PotentialField | None, M: float, lattice: SpinorLattice,
                            matrices: DiracMatrices | None = None) -> sp.csr_matrix:
    """H_D = alpha.p + M beta + V on lattice spinors."""
    matrices = matrices or DiracMatrices.dirac()
    H = sp.csr_matrix((lattice.dim, lattice.dim), dtype=complex)
    for ax in range(3):
        H = H + sp.kron(lattice.momentum_scalar(ax), matrices.alpha[ax], format="csr")
    H = H + M * lattice.spinor_field(matrices.beta)
    if V is not None:
        H = H + V.operator(lattice)
    H = H.tocsr()
    herm = abs(H - H.conj().T).max() if H.nnz else 0.0
    if herm > 1e-12 * max(1.0, abs(H).max()):
        raise ValueError(f"Dirac Hamiltonian not Hermitian (defect {herm:.2e})")
    return H


@dataclass(frozen=True, eq=False)
class CPConjugation:
    """Antilinear map psi(x) -> U psi(-x)^* with Pauli's matrix U."""

    U: np.ndarray

    def defects(self, matrices: DiracMatrices) -> dict:
        U = self.U
        Ui = np.linalg.inv(U)
        out = {
            "U^2 - 1": np.abs(U @ U - np.eye(4)).max(),
            "U - conj(U)": np.abs(U - U.conj()).max(),
            "unitarity": np.abs(U.conj().T @ U - np.eye(4)).max(),
            "beta": np.abs(Ui @ matrices.beta @ U + matrices.beta).max(),
        }
        for j in range(3):
            out[f"alpha{j + 1}"] = np.abs(Ui @ matrices.alpha[j] @ U - matrices.alpha[j].conj()).max()
        return {k: float(v) for k, v in out.items()}

    def apply(self, psi: np.ndarray, lattice: SpinorLattice, fock_dim: int = 1) -> np.ndarray:
        """J applied to a vector on lattice spinors (tensor a Fock factor of ``fock_dim``).

        On the Fock factor J is complex conjugation of occupation amplitudes.
        """
        v = np.asarray(psi).reshape(lattice.n_sites, 4, fock_dim)
        v = v[lattice.parity]
        v = np.einsum("st,ntf->nsf", self.U, np.conj(v))
        return v.reshape(-1)


def pauli_conjugation(matrices: DiracMatrices, tol: float = 1e-14) -> CPConjugation:
    """Real unitary U with U^2 = 1, U^-1 alpha U = conj(alpha), U^-1 beta U = -beta."""
    if matrices.name == "dirac":
        U = (1j * matrices.alpha[1] @ matrices.beta).real.astype(complex)
    else:
        # solve the linear constraints for a real U and normalize
        rows = []
        for j in range(3):
            rows.append(np.kron(np.eye(4), matrices.alpha[j]) - np.kron(matrices.alpha[j].conj().T, np.eye(4)))
        rows.append(np.kron(np.eye(4), matrices.beta) + np.kron(matrices.beta.T, np.eye(4)))
        A = np.vstack(rows)
        A = np.vstack([A.real, A.imag])
        ns = sla.null_space(A)
        if ns.shape[1] == 0:
            raise ValueError("no Pauli conjugation matrix for this representation")
        U = ns[:, 0].reshape(4, 4, order="F")
        U = U / np.sqrt(np.abs(np.linalg.eigvals(U.T @ U)).mean())
        U = U.astype(complex)
        if np.abs(U @ U + np.eye(4)).max() < 1e-10:
            raise ValueError("Pauli matrix squares to -1 in this representation")
    cp = CPConjugation(U)
    bad = {k: v for k, v in cp.defects(matrices).items() if v > tol}
    if bad:
        raise ValueError(f"Pauli conjugation verification failed: {bad}")
    return cp


def check_cp_commutation(H_minus_mass, apply_J, vectors) -> float:
    """max over ``vectors`` of ||J (H - beta M) psi - (H - beta M) J psi||."""
    worst = 0.0
    for psi in vectors:
        lhs = apply_J(H_minus_mass @ psi)
        rhs = H_minus_mass @ apply_J(psi)
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst


def antisymmetrizer(d: int) -> sp.csr_matrix:
    """(1 - SWAP)/2 on C^d tensor C^d."""
    i, j = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    swap = sp.csr_matrix((np.ones(d * d), ((j * d + i).ravel(), (i * d + j).ravel())),
                         shape=(d * d, d * d))
    return (0.5 * (sp.identity(d * d) - swap)).tocsr()


def antisymmetric_isometry(d: int) -> sp.csr_matrix:
    """Columns (|ij> - |ji>)/sqrt 2 for i < j."""
    i, j = np.triu_indices(d, k=1)
    n = len(i)
    rows = np.concatenate([i * d + j, j * d + i])
    cols = np.concatenate([np.arange(n), np.arange(n)])
    vals = np.concatenate([np.full(n, 1.0), np.full(n, -1.0)]) / np.sqrt(2.0)
    return sp.csr_matrix((vals, (rows, cols)), shape=(d * d, n))
