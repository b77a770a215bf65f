"""Photon momentum grids, polarization frames, cutoff profiles and spectral calculus.

A one-photon mode function is stored as its values on a finite list of
momenta ``k_j`` with quadrature weights ``w_j``; the L2 pairing is
``<f, g> = sum_j w_j conj(f_j) g_j``.  Fourier conventions follow

    f(x) = (2 pi)^(-3/2) * integral exp(i k.x) fhat(k) d^3k,

so that a position shift by ``x`` multiplies ``fhat`` by ``exp(-i k.x)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.special import roots_legendre

from .errors import GridError

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])
FOURIER_NORM = (2.0 * np.pi) ** -1.5

__all__ = [
    "ETA",
    "FOURIER_NORM",
    "ModeGrid",
    "PolarizationFrame",
    "build_polarization_frame",
    "CutoffProfile",
    "Smearing",
    "spectral_multiplier",
    "cos_symbol",
    "sinc_symbol",
    "power_symbol",
    "phase_symbol",
    "ir_integral",
]


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# polarization

@dataclass(frozen=True)
class PolarizationFrame:
    """Four real 4-vectors e_0..e_3 attached to one photon momentum."""

    e0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        """4x4 array ``E[mu, lam] = e^mu_lam`` (columns are the vectors)."""
        return np.column_stack([self.e0, self.e1, self.e2, self.e3])

    def gram(self) -> np.ndarray:
        """Minkowski Gram matrix ``e_lam . e_sig``; equals diag(-1, 1, 1, 1)."""
        E = self.matrix
        return E.T @ ETA @ E


def build_polarization_frame(k, axis_tol: float = 1e-12) -> PolarizationFrame:
    """Polarization frame of momentum ``k`` in spherical (azimuthal) form.

    For k along the z-axis the azimuth is undefined and the fixed pair
    e1 = (0,1,0,0), e2 = (0,0,1,0) is used instead.
    """
    k = np.asarray(k, dtype=float)
    if k.shape != (3,):
        raise GridError(f"momentum must be a 3-vector, got shape {k.shape}")
    norm = np.linalg.norm(k)
    if not norm > 0.0:
        raise GridError("polarization frame undefined at zero momentum")
    khat = k / norm
    rho = np.hypot(khat[0], khat[1])
    if rho <= axis_tol:
        t1 = np.array([1.0, 0.0, 0.0])
        t2 = np.array([0.0, 1.0, 0.0])
    else:
        cos_t, sin_t = khat[2], rho
        cos_p, sin_p = khat[0] / rho, khat[1] / rho
        t1 = np.array([cos_t * cos_p, cos_t * sin_p, -sin_t])
        t2 = np.array([-sin_p, cos_p, 0.0])
    return PolarizationFrame(
        e0=_frozen([1.0, 0.0, 0.0, 0.0]),
        e1=_frozen(np.r_[0.0, t1]),
        e2=_frozen(np.r_[0.0, t2]),
        e3=_frozen(np.r_[0.0, khat]),
    )


# ---------------------------------------------------------------------------
# grids

@dataclass(frozen=True, eq=False)
class ModeGrid:
    """Finite list of photon momenta with positive quadrature weights."""

    modes: np.ndarray
    weights: np.ndarray
    exclusion_policy: str = "z-axis-fallback"

    def __post_init__(self):
        modes = np.atleast_2d(np.asarray(self.modes, dtype=float))
        if modes.ndim != 2 or modes.shape[1] != 3:
            raise GridError(f"modes must have shape (n, 3), got {modes.shape}")
        weights = np.broadcast_to(np.asarray(self.weights, dtype=float), (len(modes),))
        if np.any(~np.isfinite(modes)) or np.any(~np.isfinite(weights)):
            raise GridError("non-finite mode data")
        if np.any(weights <= 0.0):
            raise GridError("quadrature weights must be strictly positive")
        omega = np.linalg.norm(modes, axis=1)
        if np.any(omega == 0.0):
            bad = int(np.flatnonzero(omega == 0.0)[0])
            raise GridError(f"mode {bad} is the excluded zero mode")
        object.__setattr__(self, "modes", _frozen(modes))
        object.__setattr__(self, "weights", _frozen(weights))

    # constructors -----------------------------------------------------
    @classmethod
    def from_momenta(cls, momenta, weight=1.0, symmetric: bool = True) -> "ModeGrid":
        """Grid from explicit momenta; ``symmetric`` appends missing ``-k``."""
        ks = np.atleast_2d(np.asarray(momenta, dtype=float))
        if symmetric:
            out, wts = [], []
            w = np.broadcast_to(np.asarray(weight, dtype=float), (len(ks),))
            for k, wk in zip(ks, w):
                out.append(k)
                wts.append(wk)
            for k, wk in zip(ks, w):
                if not any(np.allclose(-k, q, atol=1e-14) for q in out):
                    out.append(-k)
                    wts.append(wk)
            return cls(np.array(out), np.array(wts))
        return cls(ks, weight)

    @classmethod
    def cubic(cls, spacing: float, kmax: float, kmin: float = 0.0) -> "ModeGrid":
        """Cubic lattice points with kmin <= |k| <= kmax, uniform weight spacing**3."""
        n = int(np.floor(kmax / spacing))
        r = spacing * np.arange(-n, n + 1)
        K = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
        kn = np.linalg.norm(K, axis=1)
        keep = (kn > 0.0) & (kn >= kmin) & (kn <= kmax)
        return cls(K[keep], spacing**3)

    @classmethod
    def spherical(cls, kmin: float, kmax: float, n_radial: int = 16,
                  n_polar: int = 8, n_azimuth: int = 8) -> "ModeGrid":
        """Product Gauss grid on the shell kmin <= |k| <= kmax.

        Radial and polar directions use Gauss-Legendre nodes, the azimuth a
        uniform trapezoid; the node set is symmetric under k -> -k.
        """
        if not 0.0 <= kmin < kmax:
            raise GridError("need 0 <= kmin < kmax")
        if n_azimuth % 2:
            raise GridError("n_azimuth must be even for a k -> -k symmetric grid")
        x, wx = roots_legendre(n_radial)
        r = 0.5 * (kmax - kmin) * (x + 1.0) + kmin
        wr = 0.5 * (kmax - kmin) * wx * r**2
        c, wc = roots_legendre(n_polar)
        phi = 2.0 * np.pi * (np.arange(n_azimuth) + 0.5) / n_azimuth
        wphi = 2.0 * np.pi / n_azimuth
        R, C, P = np.meshgrid(r, c, phi, indexing="ij")
        WR, WC = np.meshgrid(wr, wc, indexing="ij")
        S = np.sqrt(1.0 - C**2)
        K = np.stack([R * S * np.cos(P), R * S * np.sin(P), R * C], axis=-1).reshape(-1, 3)
        W = (WR[..., None] * WC[..., None] * wphi * np.ones_like(P)).reshape(-1)
        return cls(K, W)

    # derived data -----------------------------------------------------
    def __len__(self) -> int:
        return len(self.modes)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @cached_property
    def omega(self) -> np.ndarray:
        return _frozen(np.linalg.norm(self.modes, axis=1))

    @cached_property
    def frames(self) -> list[PolarizationFrame]:
        return [build_polarization_frame(k) for k in self.modes]

    @cached_property
    def polarization(self) -> np.ndarray:
        """Array ``E[j, mu, lam] = e^mu_lam(k_j)``."""
        return _frozen(np.stack([fr.matrix for fr in self.frames]))

    @cached_property
    def neg_index(self) -> np.ndarray | None:
        """Index of -k_j for every j, or None if the grid is not symmetric."""
        out = np.empty(len(self.modes), dtype=int)
        for j, k in enumerate(self.modes):
            d = np.linalg.norm(self.modes + k, axis=1)
            i = int(np.argmin(d))
            if d[i] > 1e-12 * max(1.0, self.omega[j]) or not np.isclose(
                    self.weights[i], self.weights[j], rtol=1e-12):
                return None
            out[j] = i
        out.setflags(write=False)
        return out

    @property
    def is_symmetric(self) -> bool:
        return self.neg_index is not None

    def require_symmetric(self) -> np.ndarray:
        if self.neg_index is None:
            raise GridError("operation needs a grid symmetric under k -> -k")
        return self.neg_index

    def inner(self, f, g) -> complex:
        """L2 pairing ``sum_j w_j conj(f_j) g_j``."""
        return complex(np.sum(self.weights * np.conj(f) * g))

    def norm(self, f) -> float:
        return float(np.sqrt(np.sum(self.weights * np.abs(f) ** 2)))

    def phases(self, x) -> np.ndarray:
        """``exp(-i k_j . x)`` for one point or an array of points (last axis 3)."""
        x = np.asarray(x, dtype=float)
        return np.exp(-1j * (x @ self.modes.T))


# ---------------------------------------------------------------------------
# cutoff profiles

@dataclass(frozen=True)
class CutoffProfile:
    """Real radial form factor chi_hat(|k|) of the photon cutoff.

    ``sharp-shell``: normalization on eps <= |k| <= lam, zero elsewhere.
    ``gaussian``: normalization * exp(-sigma^2 |k|^2 / 2), optionally cut to
    zero below ``eps`` (``eps = 0`` leaves the profile flat at k = 0).
    """

    kind: str
    params: tuple = ()
    normalization: float = FOURIER_NORM

    @classmethod
    def sharp_shell(cls, eps: float, lam: float, normalization: float = FOURIER_NORM):
        if not 0.0 <= eps < lam:
            raise GridError("sharp shell needs 0 <= eps < lam")
        return cls("sharp-shell", (("eps", float(eps)), ("lam", float(lam))), normalization)

    @classmethod
    def gaussian(cls, sigma: float, eps: float = 0.0, normalization: float = FOURIER_NORM):
        if not sigma > 0.0 or eps < 0.0:
            raise GridError("gaussian profile needs sigma > 0 and eps >= 0")
        return cls("gaussian", (("sigma", float(sigma)), ("eps", float(eps))), normalization)

    @property
    def p(self) -> dict:
        return dict(self.params)

    @property
    def ir_cut(self) -> float:
        """Momentum below which the profile vanishes identically (0 if none)."""
        return self.p["eps"]

    def radial(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        p = self.p
        if self.kind == "sharp-shell":
            inside = (k >= p["eps"]) & (k <= p["lam"])
            return np.where(inside, self.normalization, 0.0)
        if self.kind == "gaussian":
            val = self.normalization * np.exp(-0.5 * (p["sigma"] * k) ** 2)
            return np.where(k >= p["eps"], val, 0.0)
        raise GridError(f"unknown profile kind {self.kind!r}")

    def values(self, grid: ModeGrid) -> np.ndarray:
        return self.radial(grid.omega)

    def support_max(self) -> float:
        """Momentum beyond which the profile is negligible."""
        p = self.p
        if self.kind == "sharp-shell":
            return p["lam"]
        return 40.0 / p["sigma"]


# ---------------------------------------------------------------------------
# smearing functions

class Smearing:
    """Position-space test function stored through its Fourier data on a grid.

    Evaluation at a point uses the grid sum, so every identity written in
    Fourier space (derivatives, Laplacian, convolution) is exact for it.
    """

    def __init__(self, grid: ModeGrid, fhat):
        fhat = np.asarray(fhat, dtype=complex)
        if fhat.shape != (grid.n_modes,):
            raise GridError(f"expected {grid.n_modes} Fourier values, got {fhat.shape}")
        if np.any(~np.isfinite(fhat)):
            raise GridError("non-finite Fourier data")
        self.grid = grid
        self.fhat = fhat

    @classmethod
    def zero(cls, grid: ModeGrid) -> "Smearing":
        return cls(grid, np.zeros(grid.n_modes))

    @classmethod
    def gaussian(cls, grid: ModeGrid, center=(0.0, 0.0, 0.0), width: float = 1.0,
                 amplitude: float = 1.0) -> "Smearing":
        """Real Gaussian bump; its transform is exp(-width^2 k^2/2 - i k.center)."""
        fhat = amplitude * np.exp(-0.5 * (width * grid.omega) ** 2) * grid.phases(center)
        return cls(grid, fhat)

    @classmethod
    def plane_waves(cls, grid: ModeGrid, coeffs: dict) -> "Smearing":
        """Function with ``fhat_j = coeffs[j]`` on selected modes, zero elsewhere."""
        fhat = np.zeros(grid.n_modes, dtype=complex)
        for j, c in coeffs.items():
            fhat[j] = c
        return cls(grid, fhat)

    def hat_conj(self) -> np.ndarray:
        """Fourier data of the complex conjugate function: conj(fhat(-k))."""
        neg = self.grid.require_symmetric()
        return np.conj(self.fhat[neg])

    def conj(self) -> "Smearing":
        return Smearing(self.grid, self.hat_conj())

    def is_real(self, tol: float = 1e-13) -> bool:
        if not self.grid.is_symmetric:
            return False
        return bool(np.max(np.abs(self.hat_conj() - self.fhat), initial=0.0)
                    <= tol * max(1.0, np.max(np.abs(self.fhat), initial=0.0)))

    def multiply(self, mult) -> "Smearing":
        """Apply a spectral multiplier (per-mode array)."""
        return Smearing(self.grid, np.asarray(mult) * self.fhat)

    def laplacian(self) -> "Smearing":
        return self.multiply(-self.grid.omega**2)

    def derivative(self, axis: int) -> "Smearing":
        return self.multiply(1j * self.grid.modes[:, axis])

    def convolved(self, profile: CutoffProfile) -> "Smearing":
        """chi * f with chi the position-space form of ``profile``."""
        return self.multiply((2.0 * np.pi) ** 1.5 * profile.values(self.grid))

    def at(self, x) -> np.ndarray:
        """Values f(x) at one point or an array of points."""
        x = np.asarray(x, dtype=float)
        ph = np.exp(1j * (x @ self.grid.modes.T))
        return FOURIER_NORM * ph @ (self.grid.weights * self.fhat)

    def __add__(self, other: "Smearing") -> "Smearing":
        return Smearing(self.grid, self.fhat + other.fhat)

    def __sub__(self, other: "Smearing") -> "Smearing":
        return Smearing(self.grid, self.fhat - other.fhat)

    def __mul__(self, c) -> "Smearing":
        return Smearing(self.grid, c * self.fhat)

    __rmul__ = __mul__

    def __neg__(self) -> "Smearing":
        return Smearing(self.grid, -self.fhat)


# ---------------------------------------------------------------------------
# spectral calculus

def spectral_multiplier(symbol: Callable[[np.ndarray], np.ndarray], grid: ModeGrid) -> np.ndarray:
    """Per-mode values ``symbol(omega_j)``, i.e. the diagonal action of symbol(T)."""
    with np.errstate(all="ignore"):
        vals = np.asarray(symbol(grid.omega))
    vals = np.broadcast_to(vals, grid.omega.shape)
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        j = int(bad[0])
        raise GridError(f"symbol singular at mode {j} (omega={grid.omega[j]:.6g})")
    return np.array(vals)


def cos_symbol(t: float):
    return lambda w: np.cos(t * w)


def sinc_symbol(t: float, switch: float = 1e-4):
    """sin(t w)/w, with its Taylor series where |t w| < ``switch``."""
    def sym(w):
        w = np.asarray(w, dtype=float)
        x = t * w
        small = np.abs(x) < switch
        with np.errstate(all="ignore"):
            direct = np.sin(x) / w
        series = t * (1.0 - x**2 / 6.0 + x**4 / 120.0)
        return np.where(small, series, direct)
    return sym


def power_symbol(p: float):
    return lambda w: np.asarray(w, dtype=float) ** p


def phase_symbol(t: float, sign: int = -1):
    """exp(sign * i t w)."""
    return lambda w: np.exp(sign * 1j * t * np.asarray(w, dtype=float))


def ir_integral(profile: CutoffProfile, s: float, grid: ModeGrid) -> float:
    """Grid value of ``sum_j |chi_hat(k_j)|^2 omega_j^(-2s) w_j``."""
    chi = profile.values(grid)
    return float(np.sum(grid.weights * chi**2 * grid.omega ** (-2.0 * s)))
