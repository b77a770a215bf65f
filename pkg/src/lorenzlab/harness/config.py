"""INI experiment configuration with per-scenario defaults and validation."""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..errors import ConfigError

__all__ = ["ExperimentConfig", "SCENARIO_NAMES", "MIN_GUARD", "load_config", "default_config"]

SCENARIO_NAMES = (
    "ccr-check", "eta-sa-check", "dyson-evolve", "heisenberg-derivative", "taylor",
    "kg-solve", "frequency-split", "gb-build", "gb-simplify", "gb-hamiltonian",
    "conserve", "eom", "velocity", "coulomb-limit", "ir-diagnose",
)

# smallest guard each scenario's exact commutator checks rely on
MIN_GUARD = {
    "ccr-check": 2, "eta-sa-check": 0, "dyson-evolve": 0, "heisenberg-derivative": 0,
    "taylor": 0, "kg-solve": 0, "frequency-split": 0, "gb-build": 2, "gb-simplify": 2,
    "gb-hamiltonian": 3, "conserve": 1, "eom": 3, "velocity": 0, "coulomb-limit": 0,
    "ir-diagnose": 0,
}


@dataclass
class ExperimentConfig:
    scenario: str
    # grid
    modes: list = field(default_factory=lambda: [[1.0, 0.0, 0.0]])
    commensurate: bool = True       # modes given as integer harmonics 2 pi m / (P a)
    mode_weight: float = 0.5
    extent: tuple = (4, 1, 1)
    spacing: float = 1.0
    # truncation
    n0: int = 3
    guard: int = 2
    level: int = 1
    # physics
    q: list = field(default_factory=lambda: [0.3])
    mass: float = 1.0
    Z: float = 0.0
    cutoff: str = "sharp-shell"
    cutoff_eps: float = 0.1
    cutoff_lam: float = 5.0
    cutoff_sigma: float = 1.0
    n_particles: int = 1
    mode: str = "quantum"
    positions: list = field(default_factory=lambda: [[0.0, 0.0, 0.0]])
    # evolution
    method: str = "ode"
    order: int = 6
    rtol: float = 1e-11
    atol: float = 1e-13
    times: list = field(default_factory=lambda: [0.2])
    # scenario-specific numbers (schedules, widths, ...)
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int = 20240611
    out_dir: str = "results"
    out_format: str = "json"

    def validate(self, declared: dict | None = None) -> None:
        if self.scenario not in SCENARIO_NAMES:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose one of {', '.join(SCENARIO_NAMES)}")
        if self.guard < MIN_GUARD[self.scenario]:
            raise ConfigError(f"{self.scenario} needs guard >= {MIN_GUARD[self.scenario]} (got {self.guard}); "
                              "raise [truncation] guard")
        if self.n0 < 0 or self.level < 0:
            raise ConfigError("n0 and level must be non-negative")
        if self.mode not in ("quantum", "fixed"):
            raise ConfigError("mode must be 'quantum' or 'fixed'")
        if self.cutoff not in ("sharp-shell", "gaussian"):
            raise ConfigError("cutoff must be 'sharp-shell' or 'gaussian'")
        if self.out_format not in ("json", "csv"):
            raise ConfigError("format must be json or csv")
        if len(self.extent) != 3 or min(self.extent) < 1:
            raise ConfigError("extent needs three positive integers")
        for name, tol in {**(declared or {}), **self.tolerances}.items():
            if not tol > 0:
                raise ConfigError(f"tolerance {name} must be strictly positive (got {tol})")

    def echo(self) -> dict:
        d = asdict(self)
        d["extent"] = list(self.extent)
        return d

    @classmethod
    def from_echo(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["extent"] = tuple(d["extent"])
        return cls(**d)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["scenario"] = {"name": self.scenario, "seed": str(self.seed)}
        cp["grid"] = {"modes": _fmt_vectors(self.modes), "commensurate": str(self.commensurate).lower(),
                      "mode_weight": repr(self.mode_weight), "extent": " ".join(map(str, self.extent)),
                      "spacing": repr(self.spacing)}
        cp["truncation"] = {"n0": str(self.n0), "guard": str(self.guard), "level": str(self.level)}
        cp["physics"] = {"q": ", ".join(map(repr, self.q)), "mass": repr(self.mass), "Z": repr(self.Z),
                         "cutoff": self.cutoff, "cutoff_eps": repr(self.cutoff_eps),
                         "cutoff_lam": repr(self.cutoff_lam), "cutoff_sigma": repr(self.cutoff_sigma),
                         "n_particles": str(self.n_particles), "mode": self.mode,
                         "positions": _fmt_vectors(self.positions)}
        cp["evolution"] = {"method": self.method, "order": str(self.order), "rtol": repr(self.rtol),
                           "atol": repr(self.atol), "times": ", ".join(map(repr, self.times))}
        if self.params:
            cp["params"] = {k: ", ".join(map(repr, v)) if isinstance(v, (list, tuple)) else repr(v)
                            for k, v in self.params.items()}
        if self.tolerances:
            cp["tolerances"] = {k: repr(v) for k, v in self.tolerances.items()}
        cp["output"] = {"dir": self.out_dir, "format": self.out_format}
        from io import StringIO
        buf = StringIO()
        cp.write(buf)
        return buf.getvalue()


def _fmt_vectors(vs) -> str:
    return "; ".join(" ".join(repr(float(x)) for x in v) for v in vs)


def _vectors(text: str) -> list:
    out = [[float(x) for x in chunk.split()] for chunk in text.split(";") if chunk.strip()]
    if any(len(v) != 3 for v in out):
        raise ConfigError(f"expected 3-vectors separated by ';', got {text!r}")
    return out


def _floats(text: str) -> list:
    return [float(x) for x in text.replace(",", " ").split()]


def _param(text: str):
    vals = _floats(text)
    return vals[0] if len(vals) == 1 and "," not in text else vals


def default_config(scenario: str) -> ExperimentConfig:
    if scenario not in _DEFAULTS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose one of {', '.join(SCENARIO_NAMES)}")
    return ExperimentConfig(scenario=scenario, **_DEFAULTS[scenario])


def load_config(path: str | Path | None, scenario: str) -> ExperimentConfig:
    """Scenario defaults overridden by the INI file at ``path`` (if any)."""
    cfg = default_config(scenario)
    if path is None:
        cfg.validate()
        return cfg
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if cp.has_section("scenario"):
            s = cp["scenario"]
            name = s.get("name", scenario)
            if name != scenario:
                raise ConfigError(f"config is for scenario {name!r}, not {scenario!r}")
            cfg.seed = s.getint("seed", cfg.seed)
        if cp.has_section("grid"):
            g = cp["grid"]
            if "modes" in g:
                cfg.modes = _vectors(g["modes"])
            cfg.commensurate = g.getboolean("commensurate", cfg.commensurate)
            cfg.mode_weight = g.getfloat("mode_weight", cfg.mode_weight)
            if "extent" in g:
                cfg.extent = tuple(int(x) for x in g["extent"].split())
            cfg.spacing = g.getfloat("spacing", cfg.spacing)
        if cp.has_section("truncation"):
            t = cp["truncation"]
            cfg.n0 = t.getint("n0", cfg.n0)
            cfg.guard = t.getint("guard", cfg.guard)
            cfg.level = t.getint("level", cfg.level)
        if cp.has_section("physics"):
            p = cp["physics"]
            if "q" in p:
                cfg.q = _floats(p["q"])
            for key in ("mass", "Z", "cutoff_eps", "cutoff_lam", "cutoff_sigma"):
                setattr(cfg, key, p.getfloat(key, getattr(cfg, key)))
            cfg.cutoff = p.get("cutoff", cfg.cutoff)
            cfg.n_particles = p.getint("n_particles", cfg.n_particles)
            cfg.mode = p.get("mode", cfg.mode)
            if "positions" in p:
                cfg.positions = _vectors(p["positions"])
        if cp.has_section("evolution"):
            e = cp["evolution"]
            cfg.method = e.get("method", cfg.method)
            cfg.order = e.getint("order", cfg.order)
            cfg.rtol = e.getfloat("rtol", cfg.rtol)
            cfg.atol = e.getfloat("atol", cfg.atol)
            if "times" in e:
                cfg.times = _floats(e["times"])
        if cp.has_section("params"):
            cfg.params = {**cfg.params, **{k: _param(v) for k, v in cp["params"].items()}}
        if cp.has_section("tolerances"):
            cfg.tolerances = {**cfg.tolerances, **{k: float(v) for k, v in cp["tolerances"].items()}}
        if cp.has_section("output"):
            o = cp["output"]
            cfg.out_dir = o.get("dir", cfg.out_dir)
            cfg.out_format = o.get("format", cfg.out_format)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed value in {path}: {exc}") from exc
    cfg.validate()
    return cfg


# Defaults reproduce the acceptance settings of each scenario.
_DEFAULTS = {
    "ccr-check": dict(modes=[[1.0, 0.0, 0.0], [0.0, 0.7, 0.3]], commensurate=False, mode_weight=0.4,
                      n0=3, guard=2, level=1, mode="fixed", q=[0.0]),
    "eta-sa-check": dict(modes=[[1, 0, 0], [0, 1, 1]], extent=(4, 4, 4), mode_weight=0.3, n0=2, guard=0,
                         level=1, q=[0.0, 0.3], Z=0.4, mass=1.0),
    "dyson-evolve": dict(modes=[[1, 0, 0]], extent=(4, 1, 1), n0=7, guard=0, level=1, q=[0.3],
                         order=6, times=[0.5, -0.5, 0.2], params={"group_s": 0.2}),
    "heisenberg-derivative": dict(modes=[[1, 0, 0]], extent=(4, 1, 1), n0=7, guard=0, level=2, q=[0.3],
                                  times=[0.2], params={"k_max": 3.0, "width": 1.0}),
    "taylor": dict(modes=[[1, 0, 0]], extent=(4, 1, 1), n0=2, guard=0, level=1, q=[0.3],
                   times=[0.1, 0.2], params={"n_max": 24.0, "width": 1.0}),
    "kg-solve": dict(modes=[[1, 0, 0]], extent=(10, 1, 1), n0=4, guard=0, level=0, q=[0.6],
                     times=[0.3], params={"width": 1.0}),
    "frequency-split": dict(modes=[[1, 0, 0], [0, 1, 0]], extent=(4, 1, 1), n0=3, guard=0, level=1,
                            q=[0.6], times=[0.0, 0.3, -0.7], params={"width": 1.0}),
    "gb-build": dict(modes=[[1.0, 0.0, 0.0], [0.0, 1.3, 0.4]], commensurate=False, n0=6, guard=4, level=2,
                     q=[0.1], mode="fixed", positions=[[0.0, 0.0, 0.0], [0.7, 0.2, -0.1]],
                     cutoff_eps=0.5, cutoff_lam=3.0, times=[0.0, 0.4, -1.1],
                     params={"evolve_t": 0.5, "width": 0.8}),
    "gb-simplify": dict(modes=[[1.0, 0.0, 0.0], [0.0, 1.3, 0.4]], commensurate=False, n0=4, guard=2,
                        level=2, q=[0.3], mode="fixed", positions=[[0.0, 0.0, 0.0], [0.7, 0.2, -0.1]],
                        cutoff_eps=0.5, cutoff_lam=3.0, times=[0.0, 0.4, -1.1], params={"width": 0.8}),
    "gb-hamiltonian": dict(modes=[[1.0, 0.0, 0.0], [0.0, 1.3, 0.4]], commensurate=False, n0=5, guard=3,
                           level=2, q=[0.3], mode="fixed", positions=[[0.0, 0.0, 0.0], [0.7, 0.2, -0.1]],
                           cutoff_eps=0.5, cutoff_lam=3.0),
    "conserve": dict(modes=[[1, 0, 0]], extent=(8, 1, 1), n0=3, guard=2, level=1, q=[0.5],
                     params={"harmonic": 1.0}),
    "eom": dict(modes=[[1, 0, 0]], extent=(8, 1, 1), n0=3, guard=3, level=0, q=[0.5],
                params={"width": 1.0}),
    "velocity": dict(modes=[[1, 0, 0]], extent=(6, 6, 6), spacing=10.0, n0=0, guard=0, level=0, q=[0.0],
                     mass=0.5, times=[0.0, 0.1, 0.2, -0.2], params={"h": 1e-3}),
    "coulomb-limit": dict(mode="fixed", q=[1.0], params={"r": 1.0, "lam": [10.0, 30.0, 100.0, 300.0, 1000.0],
                                                       "eps": 0.0}),
    "ir-diagnose": dict(mode="fixed", q=[0.3], cutoff="gaussian", cutoff_sigma=1.0, cutoff_eps=0.0,
                        params={"eps": [1e-1, 1e-2, 1e-3, 1e-4], "accept_eps": 0.05}),
}
