"""Gauge-transformation energy E^C, its renormalized Coulomb limit and infrared diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .kinematics import CutoffProfile, ModeGrid

__all__ = [
    "sine_integral",
    "pair_integral",
    "ec_energy",
    "ec_definition",
    "ec_grid",
    "CoulombRow",
    "CoulombReport",
    "renormalized_limit",
    "coulomb_envelope",
    "IRReport",
    "triviality_diagnostic",
]

FOUR_PI = 4.0 * np.pi


def _panel(a: float, b: float, x: np.ndarray, w: np.ndarray) -> float:
    half = 0.5 * (b - a)
    y = a + half * (x + 1.0)
    return half * float(w @ np.sinc(y / np.pi))


def sine_integral(x: float, nodes: int = 20) -> tuple[float, float]:
    """Si(x) = int_0^x sin(y)/y dy by Gauss-Legendre per half period.

    Returns (value, error estimate); the estimate compares ``nodes`` against
    ``nodes + 8`` on every panel.  The integrand is entire, so each panel is
    resolved to rounding level.
    """
    if x < 0:
        v, e = sine_integral(-x, nodes)
        return -v, e
    if x == 0:
        return 0.0, 0.0
    xa, wa = np.polynomial.legendre.leggauss(nodes)
    xb, wb = np.polynomial.legendre.leggauss(nodes + 8)
    edges = np.arange(0.0, x, np.pi)
    edges = np.append(edges, x)
    total, err = 0.0, 0.0
    comp = 0.0  # Kahan compensation for long alternating sums
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        pa = _panel(a, b, xa, wa)
        pb = _panel(a, b, xb, wb)
        err += abs(pa - pb)
        y = pb - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total, err + 1e-16 * len(edges)


def pair_integral(r: float, eps: float, lam: float) -> tuple[float, float]:
    """int_eps^lam sin(r k)/(r k) dk = (Si(r lam) - Si(r eps))/r."""
    hi, e1 = sine_integral(r * lam)
    lo, e2 = sine_integral(r * eps)
    return (hi - lo) / r, (e1 + e2) / r


def _pairs(positions) -> list[float]:
    pts = np.atleast_2d(np.asarray(positions, dtype=float))
    out = []
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            r = float(np.linalg.norm(pts[a] - pts[b]))
            if r == 0.0:
                raise ValueError("coincident positions: pair term undefined")
            out.append(r)
    return out


def ec_energy(eps: float, lam: float, positions, q: float, with_error: bool = False):
    """-(q^2/4pi)(2/pi) sum_{a<b} int_eps^lam sin(rk)/(rk) dk - q^2 (lam - eps)/(8 pi^2)."""
    if not 0 <= eps < lam:
        raise ValueError("need 0 <= eps < lam")
    pair, err = 0.0, 0.0
    for r in _pairs(positions):
        v, e = pair_integral(r, eps, lam)
        pair += v
        err += e
    pref = q * q / FOUR_PI * (2.0 / np.pi)
    val = -pref * pair - q * q * (lam - eps) / (8.0 * np.pi ** 2)
    return (val, pref * err) if with_error else val


def ec_definition(eps: float, lam: float, positions, q: float) -> float:
    """E^C from its defining inner product, for a sharp shell of height (2 pi)^(-3/2).

    +(q^2/4pi)(2/pi) sum_{a<b} int sin(rk)/(rk) dk + N q^2 (lam - eps)/(4 pi^2).
    """
    pts = np.atleast_2d(np.asarray(positions, dtype=float))
    pair = sum(pair_integral(r, eps, lam)[0] for r in _pairs(pts))
    return q * q / FOUR_PI * (2.0 / np.pi) * pair + len(pts) * q * q * (lam - eps) / (4.0 * np.pi ** 2)


def ec_grid(grid: ModeGrid, cutoff: CutoffProfile, positions, q: float) -> float:
    """(q^2/2) sum_j w_j |sum_a hat chi(k_j) e^{-i k_j.x_a}|^2 / w_j^2 on the mode grid."""
    pts = np.atleast_2d(np.asarray(positions, dtype=float))
    amp = (cutoff.values(grid)[None, :] * grid.phases(pts)).sum(axis=0)
    return 0.5 * q * q * float(np.sum(grid.weights * np.abs(amp) ** 2 / grid.omega ** 2))


# ---------------------------------------------------------------------------
# renormalized limit

def coulomb_envelope(r: float, lam: float) -> float:
    """4/(pi r lam): bound on the relative error from |int_x^inf sin p/p dp| <= 2/x."""
    return 4.0 / (np.pi * r * lam)


@dataclass
class CoulombRow:
    eps: float
    lam: float
    r: float
    ec: float
    self_energy: float
    e_ren: float
    target: float
    rel_error: float
    envelope: float
    quad_error: float

    @property
    def within(self) -> bool:
        return abs(self.rel_error) <= self.envelope + self.quad_error / max(abs(self.target), 1e-300)


@dataclass
class CoulombReport:
    q: float
    rows: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(row.within for row in self.rows)

    @property
    def max_quad_error(self) -> float:
        return max((row.quad_error for row in self.rows), default=0.0)

    def table(self) -> list[dict]:
        return [dict(vars(row)) for row in self.rows]


def renormalized_limit(r: float, q: float, lam_schedule, eps: float = 0.0) -> CoulombReport:
    """E_ren(lam) = E^C(eps, lam) + q^2 lam/(8 pi^2) against -q^2/(4 pi r).

    The IR limit is taken first (eps = 0 by default, where the integrand is bounded).
    """
    lams = list(lam_schedule)
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValueError("Lambda schedule must be increasing")
    target = -q * q / (FOUR_PI * r)
    report = CoulombReport(q)
    for lam in lams:
        ec, err = ec_energy(eps, lam, [[0, 0, 0], [r, 0, 0]], q, with_error=True)
        self_energy = q * q * lam / (8.0 * np.pi ** 2)
        e_ren = ec + self_energy
        rel = (e_ren - target) / target if target != 0 else 0.0
        report.rows.append(CoulombRow(eps, lam, r, ec, self_energy, e_ren, target, rel,
                                      coulomb_envelope(r, lam), err))
    return report


# ---------------------------------------------------------------------------
# infrared triviality

@dataclass
class IRReport:
    eps: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    analytic_slope: float
    admissible: bool

    @property
    def slope_deviation(self) -> np.ndarray:
        if self.analytic_slope == 0:
            return np.abs(self.slopes)
        return np.abs(self.slopes / self.analytic_slope - 1.0)


def _radial_ir(profile: CutoffProfile, eps: float) -> float:
    """4 pi int_eps^K |chi(k)|^2 / k dk in log variable u = ln k."""
    top = profile.support_max()
    lo = max(eps, profile.ir_cut)
    if lo >= top:
        return 0.0
    f = lambda u: float(profile.radial(np.exp(u)) ** 2)
    val, _ = integrate.quad(f, np.log(lo), np.log(top), limit=400, epsabs=1e-15, epsrel=1e-12)
    return FOUR_PI * val


def triviality_diagnostic(profile: CutoffProfile, eps_schedule, decay_ratio: float = 0.5,
                          abs_tol: float = 1e-12) -> IRReport:
    """Tabulate int_{|k| >= eps} |chi|^2/w^3 d^3k and classify the infrared behaviour.

    The slope dI/d ln(1/eps) between consecutive entries tends to 4 pi |chi(0)|^2;
    a profile is GB-trivial when that slope does not die out over the schedule.
    """
    eps = np.asarray(list(eps_schedule), dtype=float)
    if len(eps) < 2 or np.any(np.diff(eps) >= 0) or eps[-1] <= 0:
        raise ValueError("schedule must decrease strictly towards 0 with at least two entries")
    vals = np.array([_radial_ir(profile, e) for e in eps])
    slopes = np.diff(vals) / np.diff(np.log(1.0 / eps))
    analytic = FOUR_PI * float(profile.radial(np.array([eps[-1] * 1e-6]))[0] ** 2) \
        if profile.ir_cut == 0 else 0.0
    last, first = slopes[-1], slopes[0]
    trivial = last > abs_tol and (first <= 0 or last >= decay_ratio * first)
    return IRReport(eps, vals, slopes, analytic, not trivial)
