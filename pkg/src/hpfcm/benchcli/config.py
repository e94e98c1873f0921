"""Benchmark and sweep configuration, loaded from YAML and validated field by field."""
from __future__ import annotations

import copy
import itertools
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

import yaml

from ..basis import TENSOR, TRUNK
from ..mgsolver.smoothers import KINDS, canonical_kind

ROTATED_SQUARE = "rotated-square-poisson"
PLATE = "perforated-plate"
PROBLEMS = (ROTATED_SQUARE, PLATE)

MODE_MG = "mg-solver"
MODE_CG = "cg"
MODE_CG_MG = "cg+mg"
MODES = (MODE_MG, MODE_CG, MODE_CG_MG)
_MODE_ALIASES = {"mg": MODE_MG, "cg-mg": MODE_CG_MG}

NO_PRECONDITIONER = "none"


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field, e.g. ``problem.angle_deg``."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ProblemConfig:
    kind: str = ROTATED_SQUARE
    angle_deg: float = 0.0  # rotated square only
    kappa: float = 10.0
    # plate
    length: float = 4.0
    hole_radius: float = 0.3 * 2 ** 0.5
    hole_centers: list = field(default_factory=lambda: [[1.0, 1.0], [3.0, 1.0], [1.0, 3.0], [3.0, 3.0]])
    youngs_modulus: float = 2.069e5
    poisson_ratio: float = 0.29
    model: str = "plane-stress"
    traction: float = 100.0


@dataclass
class DiscretizationConfig:
    h: float = 0.125
    p: int = 2
    space: str = TENSOR
    k: int = 0
    refine: str = "cut"  # which base elements receive k levels: cut | all | none
    recursive: bool = True  # only keep bisecting sub-cells that are still cut
    # plate only: "absolute" makes h the element size (n = length / h); "relative"
    # makes h a fraction of the plate length (n = 1 / h).
    sizing: str = "absolute"


@dataclass
class FcmConfig:
    alpha: float = 1e-8
    beta: float | None = None  # problem default: 1e4 rotated square, 1e8 plate
    quadtree_depth: int = 4


@dataclass
class SolverConfig:
    mode: str = MODE_CG_MG
    smoother: str = "schwarz-patchwise"
    omega: float | None = None
    n_s: int = 5
    tol: float = 1e-9
    max_it: int = 500
    coarse: str = "direct"


@dataclass
class OutputConfig:
    dir: str | None = None
    solution_grid: int = 0  # points per direction of the sampled-solution CSV; 0 disables


@dataclass
class BenchmarkConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    discretization: DiscretizationConfig = field(default_factory=DiscretizationConfig)
    fcm: FcmConfig = field(default_factory=FcmConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def beta(self):
        if self.fcm.beta is not None:
            return self.fcm.beta
        return 1e4 if self.problem.kind == ROTATED_SQUARE else 1e8

    @property
    def elements_per_direction(self):
        return int(round(_grid_span(self) / self.discretization.h))

    def to_dict(self):
        return asdict(self)

    def key(self):
        d, s = self.discretization, self.solver
        return (self.problem.kind, self.problem.angle_deg, d.p, d.h, d.k, s.smoother, s.mode)


# The rotated square sits in a fixed [-0.75, 0.75]^2 background grid.
ROTATED_SQUARE_GRID = 1.5


def _grid_span(cfg):
    """Grid width measured in units of ``h``."""
    if cfg.problem.kind == ROTATED_SQUARE:
        return ROTATED_SQUARE_GRID
    return cfg.problem.length if cfg.discretization.sizing == "absolute" else 1.0


_OPTIONAL_FLOATS = ("fcm.beta", "solver.omega", "discretization.h")

_SECTIONS = {"problem": ProblemConfig, "discretization": DiscretizationConfig, "fcm": FcmConfig,
             "solver": SolverConfig, "output": OutputConfig}


def _coerce(path, value, default):
    """Convert a YAML scalar to the type of ``default``."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float) or path in _OPTIONAL_FLOATS:
        return _number(path, value)
    if isinstance(default, str) or default is None:
        if value is not None and not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    return value


def _number(path, value):
    if value is None:
        return None
    if isinstance(value, str):
        try:
            return float(Fraction(value))  # allows "1/16"
        except (ValueError, ZeroDivisionError):
            raise ConfigError(path, f"expected a number, got {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section")
    parts = {}
    for name, cls in _SECTIONS.items():
        raw = data.get(name) or {}
        if not isinstance(raw, dict):
            raise ConfigError(name, "expected a mapping")
        obj = cls()
        names = {f.name for f in fields(cls)}
        for key, value in raw.items():
            path = f"{name}.{key}"
            if key not in names:
                raise ConfigError(path, "unknown field")
            setattr(obj, key, _coerce(path, value, getattr(obj, key)))
        parts[name] = obj
    cfg = BenchmarkConfig(**parts)
    validate(cfg)
    return cfg


def validate(cfg):
    """Check ranges and enumerations; normalizes aliases in place. Returns ``cfg``."""
    pb, d, f, s = cfg.problem, cfg.discretization, cfg.fcm, cfg.solver
    if pb.kind not in PROBLEMS:
        raise ConfigError("problem.kind", f"expected one of {PROBLEMS}, got {pb.kind!r}")
    if pb.kind == ROTATED_SQUARE and not 0.0 <= pb.angle_deg <= 45.0:
        raise ConfigError("problem.angle_deg", f"must lie in [0, 45], got {pb.angle_deg}")
    for name in ("kappa", "length", "hole_radius", "youngs_modulus"):
        if getattr(pb, name) <= 0:
            raise ConfigError(f"problem.{name}", "must be positive")
    if not 0.0 <= pb.poisson_ratio < 0.5:
        raise ConfigError("problem.poisson_ratio", "must lie in [0, 0.5)")
    if pb.model not in ("plane-stress", "plane-strain"):
        raise ConfigError("problem.model", "expected plane-stress or plane-strain")
    if d.h is None or d.h <= 0:
        raise ConfigError("discretization.h", "must be positive")
    if d.sizing not in ("absolute", "relative"):
        raise ConfigError("discretization.sizing", "expected absolute or relative")
    span = _grid_span(cfg)
    n = span / d.h
    if abs(n - round(n)) > 1e-9 or round(n) < 1:
        raise ConfigError("discretization.h", f"must divide the background grid width {span}")
    if d.p < 1:
        raise ConfigError("discretization.p", "must be at least 1")
    if d.space not in (TENSOR, TRUNK):
        raise ConfigError("discretization.space", f"expected {TENSOR!r} or {TRUNK!r}")
    if not 0 <= d.k <= 4:
        raise ConfigError("discretization.k", "must lie in [0, 4]")
    if d.refine not in ("cut", "all", "none"):
        raise ConfigError("discretization.refine", "expected cut, all or none")
    if not 0.0 < f.alpha < 1.0:
        raise ConfigError("fcm.alpha", "must lie in (0, 1)")
    if f.beta is not None and f.beta <= 0:
        raise ConfigError("fcm.beta", "must be positive")
    if f.quadtree_depth < 0:
        raise ConfigError("fcm.quadtree_depth", "must be non-negative")
    s.mode = _MODE_ALIASES.get(s.mode, s.mode)
    if s.mode not in MODES:
        raise ConfigError("solver.mode", f"expected one of {MODES}, got {s.mode!r}")
    if s.smoother == NO_PRECONDITIONER:
        if s.mode != MODE_CG:
            raise ConfigError("solver.smoother", "'none' is only valid with mode cg")
    else:
        try:
            s.smoother = canonical_kind(s.smoother)
        except ValueError:
            raise ConfigError("solver.smoother", f"expected one of {KINDS} or 'none'") from None
    if s.omega is not None and s.omega <= 0:
        raise ConfigError("solver.omega", "must be positive")
    if s.n_s < 1:
        raise ConfigError("solver.n_s", "must be at least 1")
    if not 0.0 < s.tol < 1.0:
        raise ConfigError("solver.tol", "must lie in (0, 1)")
    if s.max_it < 1:
        raise ConfigError("solver.max_it", "must be at least 1")
    if s.coarse not in ("direct", "cg"):
        raise ConfigError("solver.coarse", "expected direct or cg")
    if cfg.output.solution_grid < 0:
        raise ConfigError("output.solution_grid", "must be non-negative")
    return cfg


def _read_yaml(path):
    try:
        with open(path) as fh:
            return yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"invalid YAML: {exc}") from None


def load_config(path):
    return config_from_dict(_read_yaml(path))


# Sweep axes and the config field each one overrides.
SWEEP_AXES = {"p": ("discretization", "p"), "h": ("discretization", "h"),
              "k": ("discretization", "k"), "smoother": ("solver", "smoother"),
              "mode": ("solver", "mode"), "angle_deg": ("problem", "angle_deg")}


@dataclass
class SweepSpec:
    base: dict
    axes: dict  # axis name -> list of values

    def configs(self):
        """One validated config per point of the Cartesian product (in axis order)."""
        names = list(self.axes)
        out = []
        for combo in itertools.product(*(self.axes[n] for n in names)):
            data = copy.deepcopy(self.base)
            for name, value in zip(names, combo):
                section, key = SWEEP_AXES[name]
                data.setdefault(section, {})[key] = value
            out.append(config_from_dict(data))
        return out

    def __len__(self):
        n = 1
        for v in self.axes.values():
            n *= len(v)
        return n


def sweep_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping")
    base = data.get("base") or {}
    axes = data.get("sweep") or {}
    if not isinstance(axes, dict):
        raise ConfigError("sweep", "expected a mapping of axis -> list")
    for name, values in axes.items():
        if name not in SWEEP_AXES:
            raise ConfigError(f"sweep.{name}", f"unknown axis; expected one of {tuple(SWEEP_AXES)}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.{name}", "expected a non-empty list")
    spec = SweepSpec(base, dict(axes))
    config_from_dict(base)  # validate the base on its own
    return spec


def load_sweep(path):
    return sweep_from_dict(_read_yaml(path))


def with_overrides(cfg, **sections):
    """Copy of ``cfg`` with per-section field overrides, e.g. ``solver={"mode": "cg"}``."""
    parts = {name: replace(getattr(cfg, name), **vals) for name, vals in sections.items()}
    return validate(replace(copy.deepcopy(cfg), **parts))


def dump_config(cfg, path):
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))
