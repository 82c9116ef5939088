"""Run configuration: a line-based `key = value` format with [section] headers."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .model import PRESETS, MechanicalContactHamiltonian, TrigPoly, make_spec_from_terms, verify_h3


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


PRESET_PERIODS = {"pendulum_example": 1.0, "piecewise_example": 2.0, "pendulum_classical": 1.0,
                  "free_particle": 1.0, "free_strict": 1.0}


@dataclass(frozen=True)
class HamiltonianConfig:
    preset: str | None = "pendulum_example"
    kind: str | None = None  # mechanical_contact when coefficients are given
    potential_const: float = 0.0
    potential_cos: tuple[tuple[float, float], ...] = ()
    potential_sin: tuple[tuple[float, float], ...] = ()
    coupling_const: float = 0.0
    coupling_cos: tuple[tuple[float, float], ...] = ()
    coupling_sin: tuple[tuple[float, float], ...] = ()
    u_form: str = "linear"
    u0: float = 0.0


@dataclass(frozen=True)
class GridConfig:
    period: float | None = None  # None: taken from the preset (1 for custom specs)
    n_nodes: int = 512
    m_nodes: int = 65
    v_max: float = 4.0


@dataclass(frozen=True)
class SolverConfig:
    dt: float | None = None  # None: 12 h / v_max
    tol_fix: float = 1e-8
    max_iter: int = 200_000
    flow_dt: float = 1e-3


@dataclass(frozen=True)
class MeasureConfig:
    eps_ordinal: float | None = None
    tol_closed: float = 1e-8
    lp_nodes: int = 64
    lp_m_nodes: int = 33
    lp_v_max: float = 2.0


@dataclass(frozen=True)
class ScanConfig:
    theta_min: float = -1.0
    theta_max: float = 2.0
    n_samples: int = 31
    method: str = "lp"


@dataclass(frozen=True)
class RunConfig:
    hamiltonian: HamiltonianConfig = field(default_factory=HamiltonianConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    measure: MeasureConfig = field(default_factory=MeasureConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    output: str = "out"

    @property
    def period(self) -> float:
        if self.grid.period is not None:
            return self.grid.period
        return PRESET_PERIODS.get(self.hamiltonian.preset or "", 1.0)

    def build_spec(self) -> MechanicalContactHamiltonian:
        hc = self.hamiltonian
        if hc.preset is not None:
            return PRESETS[hc.preset]()
        return make_spec_from_terms(
            TrigPoly(hc.potential_const, hc.potential_cos, hc.potential_sin),
            TrigPoly(hc.coupling_const, hc.coupling_cos, hc.coupling_sin),
            self.period, hc.u_form, hc.u0, name="custom")


def _terms(text: str) -> tuple[tuple[float, float], ...]:
    """'nu:amp, nu:amp' -> ((nu, amp), ...)."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        nu, sep, amp = item.partition(":")
        if not sep:
            raise ValueError(f"expected nu:amplitude, got {item!r}")
        out.append((float(nu), float(amp)))
    return tuple(out)


def _positive(v):
    if not v > 0:
        raise ValueError("must be positive")
    return v


def _pos_int(v):
    f = float(v)
    if not f.is_integer():
        raise ValueError("must be an integer")
    n = int(f)
    if n <= 0:
        raise ValueError("must be positive")
    return n


def _pos_float(v):
    return _positive(float(v))


def _choice(*options):
    def parse(v):
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return v
    return parse


def _preset(v):
    if v not in PRESETS:
        raise ValueError(f"unknown preset {v!r} (known: {', '.join(sorted(PRESETS))})")
    return v


_SCHEMA = {
    "hamiltonian": {
        "preset": _preset, "kind": _choice("mechanical_contact"),
        "potential_const": float, "potential_cos": _terms, "potential_sin": _terms,
        "coupling_const": float, "coupling_cos": _terms, "coupling_sin": _terms,
        "u_form": _choice("linear", "affine"), "u0": float,
    },
    "grid": {"period": _pos_float, "n_nodes": _pos_int, "m_nodes": _pos_int, "v_max": _pos_float},
    "solver": {"dt": _pos_float, "tol_fix": _pos_float, "max_iter": _pos_int, "flow_dt": _pos_float},
    "measure": {"eps_ordinal": _pos_float, "tol_closed": _pos_float, "lp_nodes": _pos_int,
                "lp_m_nodes": _pos_int, "lp_v_max": _pos_float},
    "scan": {"theta_min": float, "theta_max": float, "n_samples": _pos_int,
             "method": _choice("lp", "laxoleinik", "both")},
    "output": {"dir": str},
}


def parse_config(text: str) -> RunConfig:
    values: dict[str, dict[str, tuple[object, int]]] = {s: {} for s in _SCHEMA}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if section is None:
            raise ConfigError(f"key {key!r} outside any section", lineno)
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if key in values[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        try:
            values[section][key] = (_SCHEMA[section][key](val), lineno)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key} = {val!r}: {exc}", lineno) from None
    return _assemble(values)


def _line(values, section, key):
    return values[section][key][1] if key in values[section] else None


def _assemble(values) -> RunConfig:
    plain = {s: {k: v for k, (v, _) in d.items()} for s, d in values.items()}
    ham = plain["hamiltonian"]
    coeff_keys = [k for k in ham if k not in ("preset",)]
    if "preset" in ham and coeff_keys:
        raise ConfigError(f"preset cannot be combined with {coeff_keys[0]}",
                          _line(values, "hamiltonian", coeff_keys[0]))
    if coeff_keys and ham.get("kind") != "mechanical_contact":
        raise ConfigError("custom coefficients need kind = mechanical_contact",
                          _line(values, "hamiltonian", coeff_keys[0]))
    hc = HamiltonianConfig(**ham) if "preset" in ham else (
        HamiltonianConfig(preset=None, **ham) if ham else HamiltonianConfig())
    grid = GridConfig(**plain["grid"])
    if grid.n_nodes < 16:
        raise ConfigError("grid.n_nodes must be >= 16", _line(values, "grid", "n_nodes"))
    if grid.m_nodes % 2 == 0:
        raise ConfigError("grid.m_nodes must be odd", _line(values, "grid", "m_nodes"))
    if hc.preset is not None and grid.period is not None and grid.period != PRESET_PERIODS[hc.preset]:
        raise ConfigError(f"preset {hc.preset} needs period {PRESET_PERIODS[hc.preset]:g}, got {grid.period:g}",
                          _line(values, "grid", "period"))
    measure = MeasureConfig(**plain["measure"])
    if measure.lp_m_nodes % 2 == 0:
        raise ConfigError("measure.lp_m_nodes must be odd", _line(values, "measure", "lp_m_nodes"))
    scan = ScanConfig(**plain["scan"])
    if not scan.theta_min < scan.theta_max:
        raise ConfigError("scan.theta_min must be < scan.theta_max", _line(values, "scan", "theta_max"))
    if scan.n_samples < 5:
        raise ConfigError("scan.n_samples must be >= 5", _line(values, "scan", "n_samples"))
    solver = SolverConfig(**plain["solver"])
    if solver.flow_dt > 1e-2:
        raise ConfigError("solver.flow_dt must be <= 1e-2", _line(values, "solver", "flow_dt"))
    cfg = RunConfig(hc, grid, solver, measure, scan, plain["output"].get("dir", "out"))
    if hc.preset is None:
        try:
            spec = cfg.build_spec()
        except ValueError as exc:
            raise ConfigError(f"invalid Hamiltonian: {exc}") from None
        h3 = verify_h3(spec)
        if not h3.passed:
            raise ConfigError(f"Hamiltonian decreases in u (slope {h3.min_slope:.3g} at x={h3.argmin_x:.3g})",
                              _line(values, "hamiltonian", "kind"))
    return cfg


def with_overrides(cfg: RunConfig, **sections) -> RunConfig:
    """Replace fields section-wise, e.g. with_overrides(cfg, grid={"n_nodes": 128})."""
    kw = {}
    for name, fields in sections.items():
        kw[name] = replace(getattr(cfg, name), **fields) if isinstance(fields, dict) else fields
    return replace(cfg, **kw)
