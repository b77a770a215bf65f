"""Truncated boson Fock space over the 4-component photon one-particle space.

Slots are ordered by (mode index, Lorentz index), slot ``4*j + mu``.  Basis
states are occupation multi-indices with total photon number at most
``max_total``, enumerated by total number first and lexicographically within
each number.  With that ordering the basis of a smaller cutoff is a prefix of
the basis of a larger one, which is what the guard checks rely on.

Storage uses the positive (auxiliary) inner product; the indefinite metric
``eta = Gamma(diag(-1, 1, 1, 1))`` is applied explicitly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import TruncationError
from .kinematics import ETA, ModeGrid

__all__ = [
    "OccupationBasis",
    "FockOperator",
    "TruncationBudget",
    "FockSpace",
    "creation_c",
    "annihilation_c",
    "creation_a",
    "annihilation_a",
    "metric_eta",
    "eta_adjoint",
    "guarded_commutator",
    "pairing",
]

ETA_DIAG = np.diag(ETA)


class OccupationBasis:
    """Occupation-number basis of the truncated Fock space."""

    def __init__(self, n_modes: int, max_total: int):
        if n_modes < 0 or max_total < 0:
            raise ValueError("n_modes and max_total must be non-negative")
        self.n_modes = int(n_modes)
        self.slot_count = 4 * self.n_modes
        self.max_total = int(max_total)
        states = [np.zeros(self.slot_count, dtype=np.int64)]
        for m in range(1, self.max_total + 1):
            for combo in itertools.combinations_with_replacement(range(self.slot_count), m):
                states.append(np.bincount(combo, minlength=self.slot_count))
        self.states = np.array(states, dtype=np.int64).reshape(-1, self.slot_count)
        self.states.setflags(write=False)
        self._base = self.max_total + 1
        keys = self._keys(self.states)
        self._order = np.argsort(keys, kind="stable")
        self._sorted_keys = keys[self._order]

    def _keys(self, occ: np.ndarray) -> np.ndarray:
        powers = self._base ** np.arange(self.slot_count, dtype=np.int64)
        return occ @ powers

    @property
    def dim(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return self.dim

    @staticmethod
    def expected_dim(slots: int, max_total: int) -> int:
        return sum(math.comb(slots + m - 1, m) for m in range(max_total + 1))

    @cached_property
    def levels(self) -> np.ndarray:
        """Total photon number of every basis state."""
        lv = self.states.sum(axis=1)
        lv.setflags(write=False)
        return lv

    def index(self, occ) -> int:
        """Basis index of an occupation tuple."""
        occ = np.asarray(occ, dtype=np.int64).reshape(1, -1)
        if occ.shape[1] != self.slot_count or occ.min() < 0 or occ.sum() > self.max_total:
            raise KeyError(tuple(occ.ravel()))
        return int(self.indices(occ)[0])

    def indices(self, occ: np.ndarray) -> np.ndarray:
        """Vectorized index lookup for valid occupation rows."""
        keys = self._keys(np.asarray(occ, dtype=np.int64))
        pos = np.searchsorted(self._sorted_keys, keys)
        return self._order[pos]

    def slot(self, mode: int, mu: int) -> int:
        return 4 * mode + mu

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    def level_mask(self, level: int) -> np.ndarray:
        return self.levels <= level

    @cached_property
    def raising(self) -> list[sp.csr_matrix]:
        """Canonical ladder ``b_s^dagger`` for every slot (truncated at max_total)."""
        out = []
        room = self.levels < self.max_total
        src = np.flatnonzero(room)
        for s in range(self.slot_count):
            occ = self.states[src].copy()
            occ[:, s] += 1
            dst = self.indices(occ)
            data = np.sqrt(occ[:, s].astype(float))
            out.append(sp.csr_matrix((data, (dst, src)), shape=(self.dim, self.dim)))
        return out

    @cached_property
    def lowering(self) -> list[sp.csr_matrix]:
        return [m.T.tocsr() for m in self.raising]


@dataclass
class FockOperator:
    """Sparse operator together with the photon-number shift interval it can cause."""

    mat: sp.csr_matrix
    shift: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if not sp.issparse(self.mat):
            self.mat = sp.csr_matrix(self.mat)
        self.mat = self.mat.tocsr().astype(complex)
        self.shift = (int(self.shift[0]), int(self.shift[1]))

    @property
    def shape(self):
        return self.mat.shape

    @property
    def width(self) -> int:
        return max(abs(self.shift[0]), abs(self.shift[1]))

    def dense(self) -> np.ndarray:
        return self.mat.toarray()

    def apply(self, v):
        return self.mat @ v

    __call__ = apply

    @property
    def H(self) -> "FockOperator":
        return FockOperator(self.mat.conj().T.tocsr(), (-self.shift[1], -self.shift[0]))

    def __add__(self, other):
        if isinstance(other, FockOperator):
            lo = min(self.shift[0], other.shift[0])
            hi = max(self.shift[1], other.shift[1])
            return FockOperator(self.mat + other.mat, (lo, hi))
        return NotImplemented

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, c):
        if np.isscalar(c):
            return FockOperator(c * self.mat, self.shift)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            return FockOperator(self.mat @ other.mat,
                                (self.shift[0] + other.shift[0], self.shift[1] + other.shift[1]))
        return self.mat @ other

    def respects_shift(self, levels: np.ndarray) -> bool:
        """True if every stored entry changes the photon number within ``shift``."""
        coo = self.mat.tocoo()
        nz = np.abs(coo.data) > 0
        d = levels[coo.row[nz]] - levels[coo.col[nz]]
        return bool(np.all((d >= self.shift[0]) & (d <= self.shift[1])))

    def restricted(self, mask: np.ndarray) -> "FockOperator":
        """Operator with every column outside ``mask`` set to zero."""
        return FockOperator(self.mat @ sp.diags(mask.astype(float)), self.shift)

    @staticmethod
    def zero(dim: int) -> "FockOperator":
        return FockOperator(sp.csr_matrix((dim, dim), dtype=complex), (0, 0))

    @staticmethod
    def identity(dim: int) -> "FockOperator":
        return FockOperator(sp.identity(dim, dtype=complex, format="csr"), (0, 0))


@dataclass(frozen=True)
class TruncationBudget:
    """Base photon level L and guard g; exact checks need max_total >= L + g."""

    base_level: int = 1
    guard: int = 2

    def __post_init__(self):
        if self.base_level < 0 or self.guard < 0:
            raise TruncationError("base level and guard must be non-negative")

    @property
    def required_total(self) -> int:
        return self.base_level + self.guard

    def check(self, max_total: int) -> None:
        if max_total < self.required_total:
            raise TruncationError(
                f"truncation n0={max_total} below base level + guard = {self.required_total}")


class FockSpace:
    """Truncated Fock space over a mode grid, with cached ladder operators."""

    def __init__(self, grid: ModeGrid, max_total: int = 3):
        self.grid = grid
        self.basis = OccupationBasis(grid.n_modes, max_total)
        self._sqrt_w = np.sqrt(grid.weights)

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def max_total(self) -> int:
        return self.basis.max_total

    @property
    def levels(self) -> np.ndarray:
        return self.basis.levels

    def _check(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=complex)
        if f.shape != (self.grid.n_modes,):
            raise ValueError(f"mode function has shape {f.shape}, grid has {self.grid.n_modes} modes")
        return f

    def ladder_sum(self, coeff: np.ndarray, raising: bool) -> sp.csr_matrix:
        """``sum_{j,nu} coeff[j, nu] b_{j nu}`` (or with b^dagger)."""
        mats = self.basis.raising if raising else self.basis.lowering
        dim = self.dim
        out = sp.csr_matrix((dim, dim), dtype=complex)
        for j in range(self.grid.n_modes):
            for nu in range(4):
                c = coeff[j, nu]
                if c != 0:
                    out = out + c * mats[4 * j + nu]
        return out.tocsr()

    # c-operators ------------------------------------------------------
    def c_dag(self, mu: int, f) -> FockOperator:
        """c^dagger_mu(f): creates the mode function ``f`` in Lorentz slot ``mu``."""
        coeff = np.zeros((self.grid.n_modes, 4), dtype=complex)
        coeff[:, mu] = self._sqrt_w * self._check(f)
        return FockOperator(self.ladder_sum(coeff, True), (1, 1))

    def c(self, mu: int, f) -> FockOperator:
        """c^mu(f): annihilation, antilinear in ``f``."""
        coeff = np.zeros((self.grid.n_modes, 4), dtype=complex)
        coeff[:, mu] = self._sqrt_w * np.conj(self._check(f))
        return FockOperator(self.ladder_sum(coeff, False), (-1, -1))

    def c_dag_vector(self, F) -> FockOperator:
        """c^dagger(F) for F[j, mu] with upper Lorentz index."""
        F = np.asarray(F, dtype=complex)
        return FockOperator(self.ladder_sum(self._sqrt_w[:, None] * F, True), (1, 1))

    def c_vector(self, F) -> FockOperator:
        """c(F), antilinear; the partner of ``c_dag_vector`` in the positive product."""
        F = np.asarray(F, dtype=complex)
        return FockOperator(self.ladder_sum(self._sqrt_w[:, None] * np.conj(F), False), (-1, -1))

    # a-operators ------------------------------------------------------
    def a_coeff(self, mu: int, f) -> np.ndarray:
        """Coefficients of a_mu(f) on the lowering operators b_{j nu}."""
        E = self.grid.polarization
        f = self._check(f)
        return ETA_DIAG[mu] * self._sqrt_w[:, None] * E[:, mu, :] * np.conj(f)[:, None]

    def a_dag_coeff(self, mu: int, f) -> np.ndarray:
        """Coefficients of a^dagger_mu(f) on the raising operators b^dagger_{j sigma}."""
        E = self.grid.polarization
        f = self._check(f)
        return (ETA_DIAG[mu] * ETA_DIAG[None, :] * self._sqrt_w[:, None]
                * E[:, mu, :] * f[:, None])

    def a(self, mu: int, f) -> FockOperator:
        """a_mu(f) = eta_{mu mu} c^nu(e^mu_nu f)."""
        return FockOperator(self.ladder_sum(self.a_coeff(mu, f), False), (-1, -1))

    def a_dag(self, mu: int, f) -> FockOperator:
        """a^dagger_mu(f) = eta^{sigma lam} c^dagger_sigma(e_{mu lam} f)."""
        return FockOperator(self.ladder_sum(self.a_dag_coeff(mu, f), True), (1, 1))

    # diagonal operators -------------------------------------------------
    @cached_property
    def eta(self) -> FockOperator:
        scalar = self.basis.states[:, 0::4].sum(axis=1)
        return FockOperator(sp.diags((-1.0) ** scalar).tocsr(), (0, 0))

    @cached_property
    def number(self) -> FockOperator:
        return FockOperator(sp.diags(self.levels.astype(float)).tocsr(), (0, 0))

    def dgamma(self, one_particle) -> FockOperator:
        """Second quantization of a diagonal one-particle operator.

        ``one_particle`` has shape (n_modes,) (same for every Lorentz slot) or
        (n_modes, 4).
        """
        h = np.asarray(one_particle, dtype=float)
        if h.ndim == 1:
            h = np.repeat(h[:, None], 4, axis=1)
        diag = self.basis.states @ h.reshape(-1)
        return FockOperator(sp.diags(diag).tocsr(), (0, 0))

    @cached_property
    def free_energy(self) -> np.ndarray:
        """Diagonal of dGamma(omega)."""
        return self.basis.states @ np.repeat(self.grid.omega, 4)

    def field_momentum(self) -> list[FockOperator]:
        """dGamma(k_i) for the three momentum components."""
        return [self.dgamma(self.grid.modes[:, i]) for i in range(3)]

    def second_quantize(self, U) -> FockOperator:
        """Gamma(U) for a one-photon map acting on the Lorentz slot of each mode.

        ``U`` is a 4x4 matrix (same for all modes) or an array (n_modes, 4, 4).
        Photon number per mode is conserved, so the truncated space is invariant.
        """
        U = np.asarray(U, dtype=complex)
        if U.ndim == 2:
            U = np.broadcast_to(U, (self.grid.n_modes, 4, 4))
        blocks = [_symmetric_powers(U[j], self.max_total) for j in range(self.grid.n_modes)]
        rows, cols, vals = [], [], []
        states = self.basis.states
        for col, occ in enumerate(states):
            images = []
            for j in range(self.grid.n_modes):
                local = tuple(occ[4 * j:4 * j + 4])
                images.append(blocks[j][sum(local)][local])
            for combo in itertools.product(*[list(im.items()) for im in images]):
                amp = 1.0 + 0.0j
                new = []
                for loc, c in combo:
                    amp *= c
                    new.extend(loc)
                if amp != 0:
                    rows.append(self.basis.index(new))
                    cols.append(col)
                    vals.append(amp)
        mat = sp.csr_matrix((vals, (rows, cols)), shape=(self.dim, self.dim))
        return FockOperator(mat, (0, 0))

    def random_state(self, rng: np.random.Generator, level: int | None = None) -> np.ndarray:
        """Random complex vector supported on photon levels <= ``level``."""
        v = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        if level is not None:
            v[self.levels > level] = 0.0
        return v / np.linalg.norm(v)


def _symmetric_powers(u: np.ndarray, max_m: int) -> list[dict]:
    """Action of Gamma(u) on the occupation states of one 4-slot mode.

    Returns a list indexed by total number m of dicts mapping an occupation
    tuple to {image occupation tuple: amplitude}.
    """
    out = []
    for m in range(max_m + 1):
        table = {}
        for combo in itertools.combinations_with_replacement(range(4), m):
            occ = tuple(np.bincount(combo, minlength=4))
            # prod_s (sum_t u[t, s] b_t^dag)^{n_s} / sqrt(n_s!) |0>
            poly = {(0, 0, 0, 0): 1.0 + 0.0j}
            for s in range(4):
                for _ in range(occ[s]):
                    nxt = {}
                    for mono, c in poly.items():
                        for t in range(4):
                            if u[t, s] == 0:
                                continue
                            key = list(mono)
                            key[t] += 1
                            key = tuple(key)
                            nxt[key] = nxt.get(key, 0.0) + c * u[t, s]
                    poly = nxt
            norm_in = math.sqrt(math.prod(math.factorial(n) for n in occ))
            image = {}
            for mono, c in poly.items():
                amp = c * math.sqrt(math.prod(math.factorial(n) for n in mono)) / norm_in
                if abs(amp) > 0:
                    image[mono] = amp
            table[occ] = image
        out.append(table)
    return out


# ---------------------------------------------------------------------------
# module-level functional interface

def creation_c(space: FockSpace, mu: int, f) -> FockOperator:
    return space.c_dag(mu, f)


def annihilation_c(space: FockSpace, mu: int, f) -> FockOperator:
    return space.c(mu, f)


def creation_a(space: FockSpace, mu: int, f) -> FockOperator:
    return space.a_dag(mu, f)


def annihilation_a(space: FockSpace, mu: int, f) -> FockOperator:
    return space.a(mu, f)


def metric_eta(space: FockSpace) -> FockOperator:
    return space.eta


def eta_adjoint(T: FockOperator, eta: FockOperator) -> FockOperator:
    """Physical adjoint ``eta T^* eta``."""
    return FockOperator((eta.mat @ T.mat.conj().T @ eta.mat).tocsr(), (-T.shift[1], -T.shift[0]))


def pairing(u, v, eta: FockOperator) -> complex:
    """Indefinite pairing <u|v> = <u, eta v>."""
    return complex(np.vdot(u, eta.mat @ v))


def guarded_commutator(A: FockOperator, B: FockOperator, budget: TruncationBudget,
                       levels: np.ndarray, max_total: int) -> FockOperator:
    """[A, B] restricted to V_L, exact when max_total >= L + g.

    Columns outside V_L are zeroed.  The product AB on V_L only passes through
    photon levels up to L + |shift A| + |shift B|, so no truncated matrix
    element is ever touched when the guard covers that raise.
    """
    need = A.width + B.width
    if need > budget.guard:
        raise TruncationError(f"guard {budget.guard} too small: commutator needs {need}")
    budget.check(max_total)
    C = A @ B - B @ A
    return C.restricted(levels <= budget.base_level)
