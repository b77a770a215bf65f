"""The free field Omega(f), its commutator with H, Klein-Gordon evolution and frequency split.

Smearings may be complex; Omega is complex-linear in f through the pair
(hat(f^*), hat f).  Everything acts on a CoupledSpace: ladder parts live in
the Fock factor, the c-number part of ad[Omega] is a current-like operator on
the Dirac factor (a scalar in fixed-position mode).
"""

from __future__ import annotations

import numpy as np

from .coupling import CoupledSpace, current
from .errors import TruncationError
from .fock import ETA_DIAG, FockOperator, TruncationBudget
from .kinematics import CutoffProfile, Smearing, cos_symbol, sinc_symbol, spectral_multiplier

__all__ = [
    "four_momentum",
    "omega_ladder",
    "omega_field",
    "omega_scalar",
    "ad_omega",
    "kg_evolve",
    "frequency_split",
    "omega_plus_displayed",
    "shell_excluded",
]

SQRT_HALF = np.sqrt(0.5)


def four_momentum(grid) -> np.ndarray:
    """k^mu = (omega, k) per mode, shape (4, n_modes)."""
    return np.vstack([grid.omega, grid.modes.T])


def omega_ladder(space: CoupledSpace, u, v) -> FockOperator:
    """-(1/sqrt 2)[a_mu(i k^mu u/sqrt w) + a^dagger_mu(i k^mu v/sqrt w)] on the coupled space."""
    fock = space.fock
    grid = fock.grid
    k = four_momentum(grid)
    sw = np.sqrt(grid.omega)
    out = None
    for mu in range(4):
        term = fock.a(mu, 1j * k[mu] * u / sw) + fock.a_dag(mu, 1j * k[mu] * v / sw)
        out = term if out is None else out + term
    return space.fock_op(-SQRT_HALF * out)


def omega_field(f: Smearing, space: CoupledSpace) -> FockOperator:
    """Omega(f) = -(1/sqrt 2)[a_mu(i k^mu hat(f^*)/sqrt w) + a^dagger_mu(i k^mu hat f/sqrt w)]."""
    return omega_ladder(space, f.hat_conj(), f.fhat)


def _profile_points(space: CoupledSpace, cutoff: CutoffProfile) -> np.ndarray:
    """hat(chi^x)/sqrt(w) for every particle point, shape (n_points, n_modes)."""
    grid = space.fock.grid
    pts = space.particle_points()
    return cutoff.values(grid)[None, :] * grid.phases(pts) / np.sqrt(grid.omega)[None, :]


def omega_scalar(space: CoupledSpace, u, v, q: float, cutoff: CutoffProfile) -> FockOperator:
    """-(iq/2) sum_a alpha^{a mu}[<X_a, i k_mu v/sqrt w> - <i k_mu u/sqrt w, X_a>], X_a = hat(chi^{x_a})/sqrt w."""
    grid = space.fock.grid
    X = _profile_points(space, cutoff)
    k_low = ETA_DIAG[:, None] * four_momentum(grid)
    sw = np.sqrt(grid.omega)
    wts = grid.weights
    out = FockOperator.zero(space.dim)
    for mu in range(4):
        left = (np.conj(X) * (wts * 1j * k_low[mu] * v / sw)[None, :]).sum(axis=1)
        right = (np.conj(1j * k_low[mu] * u / sw)[None, :] * wts * X).sum(axis=1)
        vals = -0.5j * q * (left - right)
        if np.any(vals != 0):
            out = out + current(vals, mu, space, 1.0).operator
    return out


def _check_guard(space: CoupledSpace, budget: TruncationBudget | None, need: int):
    if budget is None:
        return
    if budget.guard < need:
        raise TruncationError(f"guard {budget.guard} below the required {need}")
    budget.check(space.max_total)


def ad_omega(f: Smearing, space: CoupledSpace, q: float, cutoff: CutoffProfile,
             budget: TruncationBudget | None = None) -> FockOperator:
    """Closed form of [iH, Omega(f)]: phase-shifted ladder part plus the c-number current term.

    With a ``budget`` the guard must cover the single commutator it replaces.
    """
    _check_guard(space, budget, 1)
    w = space.fock.grid.omega
    u, v = f.hat_conj(), f.fhat
    return omega_ladder(space, 1j * w * u, 1j * w * v) + omega_scalar(space, u, v, q, cutoff)


def kg_evolve(f: Smearing, t: float, space: CoupledSpace, q: float,
              cutoff: CutoffProfile) -> FockOperator:
    """Omega(t, f) = Omega(cos(tT) f) + ad[Omega(sin(tT)/T f)]."""
    grid = space.fock.grid
    fc = f.multiply(spectral_multiplier(cos_symbol(t), grid))
    fs = f.multiply(spectral_multiplier(sinc_symbol(t), grid))
    return omega_field(fc, space) + ad_omega(fs, space, q, cutoff)


def shell_excluded(f: Smearing, min_shell: float) -> Smearing:
    """Drop the Fourier data on modes with |k| <= min_shell (strict D(T^-1) emulation)."""
    return f.multiply(np.where(f.grid.omega > min_shell, 1.0, 0.0))


def frequency_split(f: Smearing, t: float, space: CoupledSpace, q: float, cutoff: CutoffProfile,
                    min_shell: float | None = None) -> tuple[FockOperator, FockOperator]:
    """Omega^{+/-}(t, f) = Omega(e^{-/+ itT} f/2) -/+ ad[Omega(e^{-/+ itT} f/(2iT))]."""
    if min_shell is not None:
        f = shell_excluded(f, min_shell)
    w = space.fock.grid.omega
    out = []
    for sign in (-1, 1):
        ph = np.exp(sign * 1j * w * t)
        g = f.multiply(ph / 2.0)
        h = f.multiply(ph / (2j * w))
        part = omega_field(g, space) + (sign * 1.0) * ad_omega(h, space, q, cutoff)
        out.append(part)
    return out[0], out[1]


def omega_plus_displayed(f: Smearing, t: float, space: CoupledSpace, q: float,
                         cutoff: CutoffProfile, sign: float = 1.0) -> FockOperator:
    """Annihilation part plus sign * (iq/2) sum_a <X_a, e^{-iwt} hat f/sqrt w> as printed."""
    fock = space.fock
    grid = fock.grid
    k = four_momentum(grid)
    w = grid.omega
    sw = np.sqrt(w)
    lad = None
    for mu in range(4):
        term = fock.a(mu, 1j * k[mu] * np.exp(1j * w * t) * f.hat_conj() / sw)
        lad = term if lad is None else lad + term
    X = _profile_points(space, cutoff)
    vals = (np.conj(X) * (grid.weights * np.exp(-1j * w * t) * f.fhat / sw)[None, :]).sum(axis=1)
    scal = current(sign * 0.5j * q * vals, 0, space, 1.0).operator
    return space.fock_op(-SQRT_HALF * lad) + scal
