"""Dyson series, interaction-picture integration, Heisenberg evolution and ad-chains.

Conventions: W(t) = exp(-itH), H_1(tau) = exp(i tau H_0) H_1 exp(-i tau H_0) and
U(t, t0) solves i dU/dt = H_1(t) U with U(t0, t0) = Id, so W(t) = exp(-itH_0) U(t, 0).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .coupling import CoupledSpace, Hamiltonians, commutator
from .errors import GridError, TruncationError
from .fock import FockOperator, TruncationBudget

__all__ = [
    "EvolutionConfig",
    "EvolutionResult",
    "FreeEvolution",
    "AdChain",
    "integration_matrix",
    "dyson_term",
    "dyson_term_bruteforce",
    "basic_estimate",
    "relative_bound",
    "evolve_W",
    "heisenberg",
    "ad_chain",
    "guarded_ad_chain",
    "fd_weights",
    "fd_derivative",
    "taylor_evolve",
    "growth_envelope",
    "velocity_check",
    "state_level",
]


@dataclass(frozen=True)
class EvolutionConfig:
    order: int = 6
    method: str = "ode"
    rtol: float = 1e-11
    atol: float = 1e-13
    nodes: int = 16
    ode_method: str = "RK45"

    def __post_init__(self):
        if self.method not in ("series", "ode", "dense"):
            raise ValueError(f"unknown evolution method {self.method!r}")
        if self.order < 0 or self.nodes < 1:
            raise ValueError("order must be >= 0 and nodes >= 1")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")

    def echo(self) -> dict:
        return {"order": self.order, "method": self.method, "rtol": self.rtol,
                "atol": self.atol, "nodes": self.nodes, "ode_method": self.ode_method,
                "quadrature": "gauss-legendre"}


@dataclass
class EvolutionResult:
    state: np.ndarray
    method: str
    remainder: float = 0.0
    term_norms: list = field(default_factory=list)


def state_level(space: CoupledSpace, xi, tol: float = 0.0) -> int:
    """Largest photon level carrying a nonzero component of ``xi``."""
    nz = np.abs(xi) > tol
    return int(space.levels[nz].max()) if nz.any() else 0


class FreeEvolution:
    """exp(-itH_0) using H_0 = H_D x Id + Id x dGamma(w) (both factors diagonalized once)."""

    def __init__(self, space: CoupledSpace, hams: Hamiltonians):
        self.space = space
        self.fock_energy = space.fock.free_energy
        if hams.HD is None:
            self.evals = np.zeros(1)
            self.evecs = np.ones((1, 1))
        else:
            HD = hams.HD.toarray()
            self.evals, self.evecs = np.linalg.eigh(HD)

    def apply(self, t: float, psi) -> np.ndarray:
        dD, dF = self.space.dirac_dim, self.space.fock.dim
        X = np.asarray(psi, dtype=complex).reshape(dD, dF)
        Y = self.evecs.conj().T @ X
        Y *= np.exp(-1j * t * self.evals)[:, None]
        Y *= np.exp(-1j * t * self.fock_energy)[None, :]
        return (self.evecs @ Y).reshape(-1)


def _interaction(hams: Hamiltonians, free: FreeEvolution, tau: float, psi) -> np.ndarray:
    """H_1(tau) psi."""
    return free.apply(-tau, hams.H1.mat @ free.apply(tau, psi))


def integration_matrix(nodes: np.ndarray) -> np.ndarray:
    """S with (S g)_k = integral of the interpolant of g from nodes[0]-edge -1 to nodes[k].

    Nodes live on [-1, 1]; the interpolant is exact for polynomials of degree < len(nodes).
    """
    m = len(nodes)
    V = np.polynomial.legendre.legvander(nodes, m - 1)
    Vinv = np.linalg.inv(V)
    # antiderivatives of P_j vanishing at -1
    A = np.zeros((m, m))
    for j in range(m):
        c = np.zeros(m)
        c[j] = 1.0
        ci = np.polynomial.legendre.legint(c, lbnd=-1.0)
        A[:, j] = np.polynomial.legendre.legval(nodes, ci)
    return A @ Vinv


def dyson_term(n: int, t: float, t0: float, xi, space: CoupledSpace, hams: Hamiltonians,
               cfg: EvolutionConfig | None = None, free: FreeEvolution | None = None,
               check: bool = True) -> np.ndarray:
    """U_n(t, t0) xi by nested Gauss-Legendre collocation."""
    cfg = cfg or EvolutionConfig()
    xi = np.asarray(xi, dtype=complex)
    if check:
        L = state_level(space, xi)
        if space.max_total < L + n:
            raise TruncationError(f"Dyson order {n} from level {L} needs n0 >= {L + n}")
    if n == 0:
        return xi.copy()
    free = free or FreeEvolution(space, hams)
    x, w = np.polynomial.legendre.leggauss(cfg.nodes)
    half = 0.5 * (t - t0)
    taus = t0 + half * (x + 1.0)
    S = half * integration_matrix(x)
    psi = np.stack([-1j * _interaction(hams, free, tau, xi) for tau in taus])
    for _ in range(n - 1):
        inner = S @ psi
        psi = np.stack([-1j * _interaction(hams, free, tau, v) for tau, v in zip(taus, inner)])
    return half * (w @ psi)


def dyson_term_bruteforce(n: int, t: float, t0: float, xi, space: CoupledSpace,
                          hams: Hamiltonians, nodes: int = 12) -> np.ndarray:
    """Independent nested Gauss-Legendre product rule (fresh nodes per level); small n only."""
    free = FreeEvolution(space, hams)
    x, w = np.polynomial.legendre.leggauss(nodes)

    def level(k, upper, vec_fn):
        half = 0.5 * (upper - t0)
        out = 0.0
        for xs, ws in zip(x, w):
            tau = t0 + half * (xs + 1.0)
            out = out + half * ws * (-1j) * _interaction(hams, free, tau, vec_fn(k, tau))
        return out

    def inner(k, tau):
        if k == n:
            return np.asarray(xi, dtype=complex)
        return level(k + 1, tau, inner)

    if n == 0:
        return np.asarray(xi, dtype=complex).copy()
    return level(1, t, inner)


def relative_bound(space: CoupledSpace, op: FockOperator, iters: int = 3000, tol: float = 1e-13,
                   seed: int = 0) -> float:
    """Power iteration for ||op (N_b + 1)^(-1/2)|| on columns below the truncation top."""
    lev = space.levels
    d = np.where(lev < space.max_total, 1.0 / np.sqrt(lev + 1.0), 0.0)
    M = op.mat @ sp.diags(d)
    MH = M.conj().T.tocsr()
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[1]) + 1j * rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        u = MH @ (M @ v)
        new = np.linalg.norm(u)
        if new == 0.0:
            return 0.0
        v = u / new
        if abs(new - lam) <= tol * new:
            lam = new
            break
        lam = new
    return float(np.sqrt(lam))


def basic_estimate(n: int, t: float, C: float, L: int, b: int = 1) -> float:
    """(C^n / n!) |t|^n prod_{m<n} (L + m b + 1)^(1/2)."""
    prod = math.prod(math.sqrt(L + m * b + 1) for m in range(n))
    return C ** n * abs(t) ** n / math.factorial(n) * prod


def _series_tail(n_max: int, t: float, C: float, L: int, extra: int = 200) -> float:
    tail = 0.0
    for n in range(n_max + 1, n_max + 1 + extra):
        term = basic_estimate(n, t, C, L)
        tail += term
        if term < 1e-300 or (n > n_max + 5 and term < 1e-18 * max(tail, 1e-300)):
            break
    return tail


def evolve_W(t: float, xi, space: CoupledSpace, hams: Hamiltonians,
             cfg: EvolutionConfig | None = None, C: float | None = None) -> EvolutionResult:
    """W(t) xi by truncated Dyson series, interaction-picture ODE or dense exponential."""
    cfg = cfg or EvolutionConfig()
    xi = np.asarray(xi, dtype=complex)
    free = FreeEvolution(space, hams)
    if cfg.method == "dense":
        out = spla.expm_multiply(-1j * t * hams.H.mat, xi)
        return EvolutionResult(out, "dense")
    if cfg.method == "series":
        L = state_level(space, xi)
        if space.max_total < L + cfg.order:
            raise TruncationError(
                f"series order {cfg.order} from level {L} needs n0 >= {L + cfg.order}")
        total = np.zeros_like(xi)
        norms = []
        for n in range(cfg.order + 1):
            term = dyson_term(n, t, 0.0, xi, space, hams, cfg, free, check=False)
            norms.append(float(np.linalg.norm(term)))
            total += term
        C = relative_bound(space, hams.H1) if C is None else C
        rem = _series_tail(cfg.order, t, C, L) * float(np.linalg.norm(xi))
        return EvolutionResult(free.apply(t, total), "series", rem, norms)

    def rhs(tau, y):
        return -1j * _interaction(hams, free, tau, y)

    if t == 0:
        return EvolutionResult(xi.copy(), "ode")
    sol = solve_ivp(rhs, (0.0, t), xi, method=cfg.ode_method, rtol=cfg.rtol, atol=cfg.atol)
    if not sol.success:
        raise RuntimeError(f"interaction-picture integration failed: {sol.message}")
    return EvolutionResult(free.apply(t, sol.y[:, -1]), "ode")


def schrodinger_residual(t: float, xi, space: CoupledSpace, hams: Hamiltonians,
                         cfg: EvolutionConfig, h: float = 1e-3) -> float:
    """|| d/dt W(t) xi + i H W(t) xi || by a fourth-order central difference."""
    pts = [evolve_W(t + s * h, xi, space, hams, cfg).state for s in (-2, -1, 1, 2)]
    deriv = (pts[0] - 8 * pts[1] + 8 * pts[2] - pts[3]) / (12 * h)
    now = evolve_W(t, xi, space, hams, cfg).state
    return float(np.linalg.norm(deriv + 1j * (hams.H.mat @ now)))


# ---------------------------------------------------------------------------
# Heisenberg picture

@dataclass
class AdChain:
    """ad^0(B) .. ad^n(B) with their photon shifts."""

    ops: list
    shifts: list

    def __len__(self) -> int:
        return len(self.ops)

    def __getitem__(self, k: int) -> FockOperator:
        return self.ops[k]


def ad_chain(B: FockOperator, hams: Hamiltonians, n: int) -> AdChain:
    """Iterated commutators [iH, .] of the truncated matrices (truncation-consistent)."""
    ops = [B]
    for _ in range(n):
        ops.append(commutator(hams.H, ops[-1], 1j))
    return AdChain(ops, [op.shift for op in ops])


def guarded_ad_chain(B: FockOperator, hams: Hamiltonians, n: int, space: CoupledSpace,
                     budget: TruncationBudget) -> AdChain:
    """ad^k(B) restricted to V_L; exact when L + width(B) + k width(H) <= n0 for every k."""
    need = B.width + n * hams.H.width
    if need > budget.guard:
        raise TruncationError(f"ad^{n} of a width-{B.width} operator needs guard {need}")
    budget.check(space.max_total)
    chain = ad_chain(B, hams, n)
    mask = space.guard_mask(budget.base_level)
    return AdChain([op.restricted(mask) for op in chain.ops], chain.shifts)


class _DenseFlow:
    """exp(-itH) applied with expm_multiply; cached for repeated Heisenberg evaluations."""

    def __init__(self, hams: Hamiltonians):
        self.A = (-1j * hams.H.mat).tocsc()

    def __call__(self, t: float, v):
        if t == 0:
            return np.asarray(v, dtype=complex).copy()
        return spla.expm_multiply(t * self.A, v)


def heisenberg(B: FockOperator, t: float, xi, space: CoupledSpace, hams: Hamiltonians,
               budget: TruncationBudget | None = None, flow=None) -> np.ndarray:
    """B(t) xi = W(-t) B W(t) xi at truncation."""
    xi = np.asarray(xi, dtype=complex)
    if budget is not None:
        L = state_level(space, xi)
        if L + B.width > space.max_total:
            raise TruncationError(f"level {L} plus shift {B.width} exceeds n0={space.max_total}")
        budget.check(space.max_total)
    flow = flow or _DenseFlow(hams)
    return flow(-t, B.mat @ flow(t, xi))


def fd_weights(k: int, offsets) -> np.ndarray:
    """Weights c with sum_i c_i f(t + s_i h) ~ h^k f^(k)(t)."""
    s = np.asarray(offsets, dtype=float)
    V = np.vander(s, increasing=True).T
    rhs = np.zeros(len(s))
    rhs[k] = math.factorial(k)
    return np.linalg.solve(V, rhs)


def fd_derivative(fn, t: float, k: int, h: float, half_width: int | None = None,
                  richardson: bool = True):
    """k-th derivative of a vector function by a central stencil plus one Richardson step."""
    p = half_width if half_width is not None else k // 2 + 3
    offs = np.arange(-p, p + 1)
    c = fd_weights(k, offs)
    cache = {}

    def val(x):
        key = round(x / h * 2)
        if key not in cache:
            cache[key] = fn(t + x)
        return cache[key]

    def D(step):
        return sum(ci * val(o * step) for ci, o in zip(c, offs) if ci != 0) / step ** k

    coarse = D(h)
    if not richardson:
        return coarse
    fine = D(h / 2)
    order = 2 * p + 1 - k + (1 if (2 * p + 1 - k) % 2 else 0)
    factor = 2.0 ** order
    return (factor * fine - coarse) / (factor - 1.0)


def heisenberg_derivative_check(B: FockOperator, k: int, t: float, xi, space: CoupledSpace,
                                hams: Hamiltonians, h: float | None = None) -> float:
    """|| d^k/dt^k B(t) xi - W(-t) ad^k(B) W(t) xi ||."""
    flow = _DenseFlow(hams)
    if h is None:
        scale = spla.norm(hams.H.mat, 1)
        h = min(0.05, 0.3 / max(scale, 1e-12))
    fd = fd_derivative(lambda s: heisenberg(B, s, xi, space, hams, flow=flow), t, k, h)
    adk = ad_chain(B, hams, k)[k]
    exact = heisenberg(adk, t, xi, space, hams, flow=flow)
    return float(np.linalg.norm(fd - exact))


def growth_envelope(chain: AdChain, space: CoupledSpace) -> tuple[float, float, np.ndarray]:
    """Fit a_n <= C R^n to a_n = ||ad^n(B)(N_b+1)^(-1/2)||; returns (C, R, a)."""
    a = np.array([relative_bound(space, op) for op in chain.ops])
    n = np.arange(len(a))
    if a[0] == 0.0:
        return 0.0, 0.0, a
    ratios = [(a[k] / a[0]) ** (1.0 / k) for k in n[1:] if a[k] > 0]
    R = max(ratios) if ratios else 0.0
    C = float(max(a[k] / R ** k if R > 0 else a[k] for k in n))
    return C, float(R), a


def taylor_evolve(B: FockOperator, t: float, xi, space: CoupledSpace, hams: Hamiltonians,
                  n_max: int = 20, smearing=None, band: tuple | None = None):
    """sum_{n <= n_max} t^n/n! ad^n(B) xi and the tail envelope from the C_omega coefficients."""
    if smearing is not None:
        w = smearing.grid.omega
        lo, hi = band if band is not None else (w.min(), w.max())
        live = np.abs(smearing.fhat) > 0
        if np.any(live & ((w < lo) | (w > hi))):
            raise GridError("smearing is not band-limited to the requested frequency window")
    xi = np.asarray(xi, dtype=complex)
    total = np.zeros_like(xi)
    v = B.mat @ xi
    chain_ops = [B]
    for n in range(n_max + 1):
        if n > 0:
            chain_ops.append(commutator(hams.H, chain_ops[-1], 1j))
            v = chain_ops[-1].mat @ xi
        total += t ** n / math.factorial(n) * v
    C, R, _ = growth_envelope(AdChain(chain_ops, [o.shift for o in chain_ops]), space)
    weight = float(np.linalg.norm(np.sqrt(space.levels + 1.0) * xi))
    tail = 0.0
    for n in range(n_max + 1, n_max + 400):
        term = C * (R * abs(t)) ** n / math.factorial(n)
        tail += term
        if term < 1e-30:
            break
    return total, tail * weight


# ---------------------------------------------------------------------------
# velocity identity

def velocity_check(j: int, t: float, xi, space: CoupledSpace, hams: Hamiltonians,
                   h: float = 1e-3, margin: float | None = None) -> float:
    """|| d/dt W(-t) x^j W(t) xi - W(-t) alpha^j W(t) xi || (j = 0, 1, 2 for x, y, z)."""
    if not space.quantum:
        raise ValueError("the velocity identity needs the quantum (lattice) mode")
    lat = space.lattice
    X = space.dirac_op(lat.position(j))
    alpha = space.dirac_op(lat.spinor_field(space.matrices.alpha[j]))
    # light-cone warning: mass near the seam within |t| lattice units
    P = lat.extent[j]
    half = P * lat.spacing / 2.0
    dens = np.abs(np.asarray(xi).reshape(space.dirac_dim, -1)) ** 2
    site_w = dens.sum(axis=1).reshape(lat.n_sites, 4).sum(axis=1)
    coord = np.abs(lat.coords[:, j])
    margin = abs(t) if margin is None else margin
    near = site_w[coord >= half - margin].sum() / max(site_w.sum(), 1e-300)
    if near > 1e-6:
        warnings.warn(f"packet weight {near:.2e} within {margin} of the periodic seam",
                      RuntimeWarning, stacklevel=2)
    flow = _DenseFlow(hams)
    fd = fd_derivative(lambda s: heisenberg(X, s, xi, space, hams, flow=flow), t, 1, h)
    exact = heisenberg(alpha, t, xi, space, hams, flow=flow)
    return float(np.linalg.norm(fd - exact))
