"""Scenario implementations; each returns a list of Quantity records."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .. import gupta_bleuler as gb
from ..coulomb import ec_grid, renormalized_limit, triviality_diagnostic
from ..coupling import (CoupledSpace, build_hamiltonians, commutator,
                        conservation_check, divergence_field, equation_of_motion_check,
                        gauge_field_smeared, restricted_norm)
from ..dirac import SpinorLattice, check_cp_commutation, coulomb_potential_field, pauli_conjugation
from ..dyson import (EvolutionConfig, basic_estimate, evolve_W, heisenberg,
                     heisenberg_derivative_check, relative_bound, state_level, taylor_evolve,
                     velocity_check)
from ..errors import AliasingError, ConfigError, GridError, InfraredError, LabError, TruncationError
from ..fock import ETA_DIAG, FockSpace, TruncationBudget, guarded_commutator
from ..freefield import ad_omega, frequency_split, kg_evolve, omega_field, omega_plus_displayed
from ..kinematics import CutoffProfile, ModeGrid, Smearing
from .config import ExperimentConfig, SCENARIO_NAMES
from .records import Quantity, ResultRecord

__all__ = ["Scenario", "SCENARIOS", "run_scenario", "REMEDIES"]


@dataclass(frozen=True)
class Scenario:
    name: str
    run: Callable
    tolerances: dict
    runtime: float          # wall-clock budget in seconds


REMEDIES = {
    TruncationError: "raise [truncation] n0 or guard, or lower the base level",
    AliasingError: "use smoother lattice functions or a larger lattice extent",
    GridError: "check [grid] modes and the cutoff parameters",
    InfraredError: "use a profile that vanishes near k = 0 (sharp-shell eps > 0 or gaussian cutoff_eps > 0)",
    ConfigError: "fix the configuration file",
}


# ---------------------------------------------------------------------------
# builders

def build_grid(cfg: ExperimentConfig) -> ModeGrid:
    modes = np.asarray(cfg.modes, dtype=float)
    if cfg.commensurate:
        modes = 2.0 * np.pi * modes / (np.asarray(cfg.extent, dtype=float) * cfg.spacing)
    return ModeGrid.from_momenta(modes, weight=cfg.mode_weight)


def build_cutoff(cfg: ExperimentConfig) -> CutoffProfile:
    if cfg.cutoff == "sharp-shell":
        return CutoffProfile.sharp_shell(cfg.cutoff_eps, cfg.cutoff_lam)
    return CutoffProfile.gaussian(cfg.cutoff_sigma, cfg.cutoff_eps)


def build_space(cfg: ExperimentConfig, fock: FockSpace) -> CoupledSpace:
    if cfg.mode == "fixed":
        return CoupledSpace(fock, positions=cfg.positions)
    return CoupledSpace(fock, SpinorLattice(cfg.extent, cfg.spacing), n_particles=cfg.n_particles)


def build_potential(cfg: ExperimentConfig, space: CoupledSpace, q: float):
    if not space.quantum or cfg.Z == 0.0:
        return None
    return coulomb_potential_field(cfg.Z, q, space.lattice)


def _setup(cfg: ExperimentConfig, q: float | None = None):
    q = cfg.q[0] if q is None else q
    grid = build_grid(cfg)
    cut = build_cutoff(cfg)
    fock = FockSpace(grid, cfg.n0)
    space = build_space(cfg, fock)
    hams = build_hamiltonians(q, space, build_potential(cfg, space, q), cfg.mass, cut)
    return grid, cut, fock, space, hams


def _smearing(cfg: ExperimentConfig, grid: ModeGrid) -> Smearing:
    return Smearing.gaussian(grid, width=float(cfg.params.get("width", 1.0)))


def _max_entry(op) -> float:
    M = op.mat if hasattr(op, "mat") else op
    return float(abs(M).max()) if M.nnz else 0.0


class _Tol:
    def __init__(self, defaults: dict, cfg: ExperimentConfig):
        self.values = {**defaults, **cfg.tolerances}

    def __call__(self, key: str) -> float:
        return self.values[key]


# ---------------------------------------------------------------------------
# scenarios

def run_ccr(cfg, rng, tol):
    grid = build_grid(cfg)
    fock = FockSpace(grid, cfg.n0)
    budget = TruncationBudget(cfg.level, cfg.guard)
    lev, M = fock.levels, grid.n_modes
    mask = sp.diags((lev <= cfg.level).astype(float))
    worst = {"mixed": 0.0, "aa": 0.0, "adad": 0.0}
    cvec = lambda: rng.standard_normal(M) + 1j * rng.standard_normal(M)
    for mu in range(4):
        for nu in range(4):
            f, g = cvec(), cvec()
            C = guarded_commutator(fock.a(mu, f), fock.a_dag(nu, g), budget, lev, cfg.n0)
            target = (mu == nu) * ETA_DIAG[mu] * grid.inner(f, g) * mask
            worst["mixed"] = max(worst["mixed"], float(abs(C.mat - target).max()))
            C = guarded_commutator(fock.a(mu, f), fock.a(nu, g), budget, lev, cfg.n0)
            worst["aa"] = max(worst["aa"], _max_entry(C))
            C = guarded_commutator(fock.a_dag(mu, f), fock.a_dag(nu, g), budget, lev, cfg.n0)
            worst["adad"] = max(worst["adad"], _max_entry(C))
    return [Quantity(f"ccr_{k}", v, tol("ccr")) for k, v in worst.items()]


def run_eta_sa(cfg, rng, tol):
    out = []
    for q in cfg.q:
        grid, cut, fock, space, hams = _setup(cfg, q)
        eta = space.eta.mat
        out.append(Quantity(f"eta_squared[q={q}]", abs(eta @ eta - sp.identity(space.dim)).max(), 0.0))
        eH = eta @ hams.H.mat
        out.append(Quantity(f"eta_H_symmetry[q={q}]", abs(eH - eH.conj().T).max(), tol("eta_H")))
        if space.quantum:
            cp = pauli_conjugation(space.matrices)
            Hm = (hams.H - hams.mass_term(space)).mat
            vecs = [space.random_state(rng, cfg.level) for _ in range(3)]
            res = check_cp_commutation(Hm, lambda v: cp.apply(v, space.lattice, fock.dim), vecs)
            out.append(Quantity(f"cp_commutation[q={q}]", res, tol("cp")))
    return out


def run_dyson(cfg, rng, tol):
    grid, cut, fock, space, hams = _setup(cfg)
    xi = space.random_state(rng, cfg.level)
    zeta = space.random_state(rng, cfg.level)
    L = state_level(space, xi)
    C = relative_bound(space, hams.H1)
    out = [Quantity("relative_bound_C", C)]
    series = EvolutionConfig(order=cfg.order, method="series")
    ode = EvolutionConfig(method="ode", rtol=cfg.rtol, atol=cfg.atol)
    dense = EvolutionConfig(method="dense")
    agree = {"series_vs_dense": 0.0, "ode_vs_dense": 0.0, "series_vs_ode": 0.0}
    ratio = 0.0
    for t in cfg.times:
        rs = evolve_W(t, xi, space, hams, series, C=C)
        ro = evolve_W(t, xi, space, hams, ode).state
        rd = evolve_W(t, xi, space, hams, dense).state
        agree["series_vs_dense"] = max(agree["series_vs_dense"], np.linalg.norm(rs.state - rd))
        agree["ode_vs_dense"] = max(agree["ode_vs_dense"], np.linalg.norm(ro - rd))
        agree["series_vs_ode"] = max(agree["series_vs_ode"], np.linalg.norm(rs.state - ro))
        for n, norm in enumerate(rs.term_norms):
            bound = basic_estimate(n, t, C, L) * np.linalg.norm(xi)
            if bound > 0:
                ratio = max(ratio, norm / bound)
    out += [Quantity(k, v, tol("agreement")) for k, v in agree.items()]
    out.append(Quantity("term_over_basic_estimate", ratio, 1.0))
    cfg_g = {"series": series, "ode": ode, "dense": dense}[cfg.method]
    t, s = cfg.times[0], float(cfg.params.get("group_s", 0.2))
    lhs = evolve_W(t + s, xi, space, hams, cfg_g).state
    rhs = evolve_W(t, evolve_W(s, xi, space, hams, cfg_g).state, space, hams, cfg_g).state
    out.append(Quantity("group_property", np.linalg.norm(lhs - rhs), tol("group")))
    a = evolve_W(t, xi, space, hams, cfg_g).state
    b = evolve_W(t, zeta, space, hams, cfg_g).state
    eta = space.eta.mat
    iso = abs(np.vdot(a, eta @ b) - np.vdot(xi, eta @ zeta))
    out.append(Quantity("eta_isometry", iso, tol("eta_isometry")))
    return out


def run_heisenberg(cfg, rng, tol):
    grid, cut, fock, space, hams = _setup(cfg)
    f = _smearing(cfg, grid)
    B = space.fock_op(gauge_field_smeared(fock, f)[0])
    xi = space.random_state(rng, cfg.level)
    out = []
    for t in cfg.times:
        for k in range(1, int(cfg.params.get("k_max", 3)) + 1):
            res = heisenberg_derivative_check(B, k, t, xi, space, hams)
            out.append(Quantity(f"derivative[k={k},t={t}]", res, tol("derivative")))
    return out


def run_taylor(cfg, rng, tol):
    grid, cut, fock, space, hams = _setup(cfg)
    f = _smearing(cfg, grid)
    B = omega_field(f, space)
    xi = space.random_state(rng, cfg.level)
    out = []
    for t in cfg.times:
        approx, tail = taylor_evolve(B, t, xi, space, hams, int(cfg.params.get("n_max", 24)), smearing=f)
        exact = heisenberg(B, t, xi, space, hams)
        err = float(np.linalg.norm(approx - exact))
        out.append(Quantity(f"tail_bound[t={t}]", tail))
        out.append(Quantity(f"taylor_excess[t={t}]", err - tail, tol("taylor")))
    return out


def _zero_momentum_state(space: CoupledSpace, rng) -> np.ndarray:
    Q = space.lattice.band_limited_isometry(0)
    spin = rng.standard_normal(Q.shape[1]) + 1j * rng.standard_normal(Q.shape[1])
    xi = np.kron(Q @ spin, space.fock.basis.vacuum())
    return xi / np.linalg.norm(xi)


def run_kg(cfg, rng, tol):
    grid, cut, fock, space, hams = _setup(cfg)
    f = _smearing(cfg, grid)
    Om = omega_field(f, space)
    if space.quantum:
        xi = _zero_momentum_state(space, rng)
        cols = space.guarded_columns(cfg.level, sp.csr_matrix(space.lattice.band_limited_isometry(0)))
    else:
        xi = space.random_state(rng, cfg.level)
        cols = space.guarded_columns(cfg.level)
    out = []
    for t in cfg.times:
        a = heisenberg(Om, t, xi, space, hams)
        b = kg_evolve(f, t, space, hams.q, cut).mat @ xi
        out.append(Quantity(f"kg_vs_heisenberg[t={t}]", np.linalg.norm(a - b), tol("kg")))
    ad = commutator(hams.H, Om, 1j)
    out.append(Quantity("ad_omega_closed_form", restricted_norm(ad - ad_omega(f, space, hams.q, cut), cols),
                        tol("ad")))
    ad2 = commutator(hams.H, ad, 1j)
    out.append(Quantity("ad2_omega_laplacian", restricted_norm(ad2 - omega_field(f.laplacian(), space), cols),
                        tol("ad")))
    return out


def run_split(cfg, rng, tol):
    grid, cut, fock, space, hams = _setup(cfg)
    f = _smearing(cfg, grid)
    out = []
    for t in cfg.times:
        plus, minus = frequency_split(f, t, space, hams.q, cut)
        full = kg_evolve(f, t, space, hams.q, cut)
        out.append(Quantity(f"split_residual[t={t}]", _max_entry(plus + minus - full), tol("split")))
        flipped = omega_plus_displayed(f, t, space, hams.q, cut, sign=-1.0)
        out.append(Quantity(f"plus_vs_closed_form[t={t}]", _max_entry(plus - flipped), tol("split")))
        printed = omega_plus_displayed(f, t, space, hams.q, cut, sign=1.0)
        out.append(Quantity(f"plus_vs_printed_sign[t={t}]", _max_entry(plus - printed)))
    return out


def _gb_setup(cfg):
    grid, cut, fock, space, hams = _setup(cfg)
    wt = gb.w_transform(fock)
    dg = gb.dressing(hams.q, space, cut)
    return grid, cut, fock, space, hams, wt, dg


def run_gb_build(cfg, rng, tol):
    grid, cut, fock, space, hams, wt, dg = _gb_setup(cfg)
    f = _smearing(cfg, grid)
    U = dg.unitary(1.0)
    out = [
        Quantity("w_bar_orthogonality", np.abs(wt.w_bar @ wt.w_bar.T - np.eye(4)).max(), tol("exact")),
        Quantity("W_unitarity", wt.unitarity_defect(), tol("w_unitary")),
        Quantity("eta_bar_defect", wt.eta_bar_defect(grid), tol("exact")),
        Quantity("kappa_bar_defect", np.abs(wt.kappa_bar(grid) - np.column_stack(
            [-np.sqrt(2.0) * grid.omega, np.zeros((grid.n_modes, 3))])).max(), tol("exact")),
        Quantity("G_hermiticity", dg.hermiticity_defect(), tol("hermitian")),
        Quantity("expiG_unitarity", dg.unitarity_defect(U), tol("unitary")),
        Quantity("expiG_eta_commutator", dg.eta_defect(U), tol("hermitian")),
    ]
    if not space.quantum:
        coh = np.abs(U.mat[:, 0].toarray().ravel() - dg.coherent_vacuum()).max()
        out.append(Quantity("coherent_state_oracle", coh, tol("coherent")))
    sub = gb.build_physical_subspace(space, dg, wt, cfg.level)
    ops = [frequency_split(f.multiply(np.exp(1j * k)), t, space, hams.q, cut)[0]
           for k, t in enumerate(cfg.times)]
    out.append(Quantity("annihilation_residual", gb.annihilation_residual(sub, ops), tol("annihilation")))
    out.append(Quantity("gram_negativity", max(0.0, -sub.min_eigenvalue), tol("gram")))
    out.append(Quantity("kernel_dim", sub.kernel_dim))
    out.append(Quantity("null_count", sub.null_count))
    out.append(Quantity("kernel_mismatch", abs(sub.kernel_dim - sub.null_count), 0.0))
    trans = np.flatnonzero(sub.transverse_mask)
    one = [i for i in trans if sub.occupations[i].sum() == 1]
    if one:
        norms = np.real(np.diag(sub.gram))[one]
        out.append(Quantity("transverse_one_photon_norm", np.abs(norms - 1.0).max(), tol("exact")))
    ev = gb.evolution_invariance(space, hams, dg, wt, sub, float(cfg.params.get("evolve_t", 0.5)), cfg.level)
    out.append(Quantity("evolution_leak", ev["leak"], tol("evolution")))
    out.append(Quantity("gram_preservation", ev["gram_change"], tol("evolution")))
    return out


def run_gb_simplify(cfg, rng, tol):
    grid, cut, fock, space, hams, wt, dg = _gb_setup(cfg)
    printed = gb.dressing(hams.q, space, cut, sign=1.0)
    f = _smearing(cfg, grid)
    budget = TruncationBudget(cfg.level, cfg.guard)
    out = []
    for k, t in enumerate(cfg.times):
        g = f.multiply(np.exp(0.5j * k))
        rep = gb.simplify_check(t, g, space, dg, wt, budget)
        out.append(Quantity(f"conjugation_residual[t={t}]", rep["residual"], tol("simplify")))
        out.append(Quantity(f"third_commutator[t={t}]", rep["third_term"], tol("simplify")))
        out.append(Quantity(f"printed_sign_residual[t={t}]",
                            gb.simplify_check(t, g, space, printed, wt, budget)["residual"]))
    return out


def run_gb_hamiltonian(cfg, rng, tol):
    grid, cut, fock, space, hams, wt, dg = _gb_setup(cfg)
    budget = TruncationBudget(cfg.level, cfg.guard)
    dirac_cols = None
    if space.quantum:
        dirac_cols = space.lattice.band_limited_isometry(int(cfg.params.get("band", 1)))
    rep = gb.physical_hamiltonian(space, hams, dg, wt, budget, dirac_cols=dirac_cols)
    r = rep.record()
    out = [
        Quantity("comm_G_H1", r["comm_G_H1"], tol("comm_G_H1")),
        Quantity("bch_third_order", r["third_order"], tol("comm_G_H1")),
        Quantity("structure_residual", r["structure"], tol("structure")),
        Quantity("Q0_in_wHL", r["q0_in_wHL"], tol("exact")),
        Quantity("Qk_in_wHT", r["qk_in_wHT"], tol("exact")),
        Quantity("invariance_phys", r["invariance_phys"], tol("invariance")),
        Quantity("invariance_null", r["invariance_null"], tol("invariance")),
        Quantity("coulomb_projection", r["coulomb_residual"], tol("structure")),
        Quantity("E_C", r["ec"]),
    ]
    if not space.quantum:
        diag = np.real(gb.ec_operator(space, dg).mat.diagonal()[0])
        ref = ec_grid(grid, cut, space.particle_points(), hams.q)
        out.append(Quantity("E_C_vs_coulomb_module", abs(diag - ref), tol("exact")))
    return out


def run_conserve(cfg, rng, tol):
    grid, cut, fock, space, hams = _setup(cfg)
    lat = space.lattice
    m = float(cfg.params.get("harmonic", 1))
    L = np.asarray(lat.extent) * lat.spacing
    f = np.cos(2 * np.pi * m * lat.coords[:, 0] / L[0]) + 0.5 * np.sin(2 * np.pi * lat.coords[:, 0] / L[0])
    budget = TruncationBudget(cfg.level, cfg.guard)
    return [Quantity("conservation_residual", conservation_check(space, hams, f, budget), tol("conserve"))]


def run_eom(cfg, rng, tol):
    grid, cut, fock, space, hams = _setup(cfg)
    f = _smearing(cfg, grid)
    budget = TruncationBudget(cfg.level, cfg.guard)
    out = []
    for mu in range(4):
        r1, r2 = equation_of_motion_check(space, hams, f, mu, budget, band_limited=True)
        out.append(Quantity(f"ad_A_equals_Pi[mu={mu}]", r1, tol("eom")))
        out.append(Quantity(f"ad2_A_equation[mu={mu}]", r2, tol("eom")))
    div = divergence_field(space, hams, f, TruncationBudget(cfg.level, max(cfg.guard, 2)))
    ref = omega_field(f, space).restricted(space.guard_mask(cfg.level))
    out.append(Quantity("divergence_vs_omega", _max_entry(div - ref), tol("divergence")))
    return out


def cos4_packet(space: CoupledSpace, rng) -> np.ndarray:
    lat = space.lattice
    L = np.asarray(lat.extent) * lat.spacing
    prof = np.prod(np.cos(np.pi * lat.coords / L) ** 4, axis=1)
    spin = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    xi = np.kron(np.kron(prof, spin / np.linalg.norm(spin)), space.fock.basis.vacuum())
    return xi / np.linalg.norm(xi)


def run_velocity(cfg, rng, tol):
    grid, cut, fock, space, hams = _setup(cfg)
    xi = cos4_packet(space, rng)
    h = float(cfg.params.get("h", 1e-3))
    out = []
    for t in cfg.times:
        worst = max(velocity_check(j, t, xi, space, hams, h=h) for j in range(3))
        out.append(Quantity(f"velocity_residual[t={t}]", worst, tol("velocity")))
    return out


def run_coulomb(cfg, rng, tol):
    lams = cfg.params.get("lam", [10.0, 30.0, 100.0, 300.0, 1000.0])
    lams = [lams] if np.isscalar(lams) else list(lams)
    r = float(cfg.params.get("r", 1.0))
    rep = renormalized_limit(r, cfg.q[0], lams, float(cfg.params.get("eps", 0.0)))
    out = [Quantity("target", rep.rows[0].target)]
    for row in rep.rows:
        out.append(Quantity(f"E_ren[lam={row.lam:g}]", row.e_ren))
        out.append(Quantity(f"rel_error[lam={row.lam:g}]", abs(row.rel_error), row.envelope, row.within))
    out.append(Quantity("quadrature_error", rep.max_quad_error, tol("quadrature")))
    return out


def run_ir(cfg, rng, tol):
    flat = build_cutoff(cfg)
    eps = cfg.params.get("eps", [1e-1, 1e-2, 1e-3, 1e-4])
    rep = triviality_diagnostic(flat, eps)
    out = [Quantity("analytic_slope", rep.analytic_slope)]
    for e, dev in zip(rep.eps[1:], rep.slope_deviation):
        out.append(Quantity(f"slope_deviation[eps={e:g}]", dev, tol("slope")))
    out.append(Quantity("classified_trivial", float(not rep.admissible), passed=not rep.admissible))
    fock = FockSpace(build_grid(cfg), 1)
    space = CoupledSpace(fock, positions=cfg.positions)
    q = cfg.q[0]
    try:
        gb.dressing(q, space, flat)
        rejected = False
    except InfraredError:
        rejected = True
    out.append(Quantity("dressing_rejects_flat", float(rejected), passed=rejected))
    cut = float(cfg.params.get("accept_eps", 0.05))
    for name, prof in (("sharp-shell", CutoffProfile.sharp_shell(cut, 5.0)),
                       ("gaussian", CutoffProfile.gaussian(cfg.cutoff_sigma, cut))):
        try:
            gb.dressing(q, space, prof)
            ok = True
        except InfraredError:
            ok = False
        out.append(Quantity(f"dressing_accepts_{name}", float(ok), passed=ok))
    return out


SCENARIOS = {
    "ccr-check": Scenario("ccr-check", run_ccr, {"ccr": 1e-12}, 5.0),
    "eta-sa-check": Scenario("eta-sa-check", run_eta_sa, {"eta_H": 1e-12, "cp": 1e-11}, 30.0),
    "dyson-evolve": Scenario("dyson-evolve", run_dyson,
                             {"agreement": 1e-8, "group": 1e-8, "eta_isometry": 1e-8}, 120.0),
    "heisenberg-derivative": Scenario("heisenberg-derivative", run_heisenberg, {"derivative": 1e-6}, 120.0),
    "taylor": Scenario("taylor", run_taylor, {"taylor": 1e-8}, 120.0),
    "kg-solve": Scenario("kg-solve", run_kg, {"kg": 1e-6, "ad": 1e-10}, 60.0),
    "frequency-split": Scenario("frequency-split", run_split, {"split": 1e-13}, 60.0),
    "gb-build": Scenario("gb-build", run_gb_build,
                         {"exact": 1e-13, "w_unitary": 1e-13, "hermitian": 1e-12, "unitary": 1e-11,
                          "coherent": 1e-10, "annihilation": 1e-10, "gram": 1e-10, "evolution": 1e-8},
                         300.0),
    "gb-simplify": Scenario("gb-simplify", run_gb_simplify, {"simplify": 1e-10}, 300.0),
    "gb-hamiltonian": Scenario("gb-hamiltonian", run_gb_hamiltonian,
                               {"comm_G_H1": 1e-11, "structure": 1e-9, "exact": 1e-12, "invariance": 1e-10},
                               300.0),
    "conserve": Scenario("conserve", run_conserve, {"conserve": 1e-10}, 60.0),
    "eom": Scenario("eom", run_eom, {"eom": 1e-10, "divergence": 1e-12}, 60.0),
    "velocity": Scenario("velocity", run_velocity, {"velocity": 1e-6}, 60.0),
    "coulomb-limit": Scenario("coulomb-limit", run_coulomb, {"quadrature": 1e-10}, 10.0),
    "ir-diagnose": Scenario("ir-diagnose", run_ir, {"slope": 0.05}, 5.0),
}
assert set(SCENARIOS) == set(SCENARIO_NAMES)


def _version() -> str:
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:
        from .. import __version__
        return __version__


def run_scenario(name: str, cfg: ExperimentConfig, seed: int | None = None) -> ResultRecord:
    """Execute one scenario; library errors become a failed record with a remedy hint."""
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose one of {', '.join(SCENARIO_NAMES)}")
    sc = SCENARIOS[name]
    if seed is not None:
        cfg.seed = int(seed)
    cfg.validate(sc.tolerances)
    rng = np.random.default_rng(cfg.seed)
    record = ResultRecord(name, cfg.echo(), version=_version(), seed=cfg.seed)
    start = time.perf_counter()
    try:
        record.quantities = sc.run(cfg, rng, _Tol(sc.tolerances, cfg))
    except LabError as exc:
        hint = next((h for cls, h in REMEDIES.items() if isinstance(exc, cls)), "")
        record.error = f"{type(exc).__name__}: {exc}" + (f" (remedy: {hint})" if hint else "")
    record.wall_time = time.perf_counter() - start
    return record
