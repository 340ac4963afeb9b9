"""Experiment configuration: a nested YAML document validated into dataclasses.

Unknown keys are rejected at every level, so a typo never silently falls back
to a default.  ``ExperimentConfig.to_dict`` emits exactly the structure that
``ExperimentConfig.from_dict`` accepts.
"""
from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field

import yaml

__all__ = [
    "ConfigError",
    "FamilyConfig",
    "ConstantsConfig",
    "LatticeConfig",
    "StopConfig",
    "OutputConfig",
    "ExperimentConfig",
    "load_config",
    "dump_config",
]

COMMANDS = ("symmdiff", "stability", "find-n", "reconstruct", "table", "counterexample")


class ConfigError(ValueError):
    """Invalid configuration (maps to exit code 2)."""


@dataclass
class FamilyConfig:
    tag: str = "interval"
    p: float | None = None
    eps: float | None = None
    n: int | None = None
    A: float | None = None
    rho: float | None = None
    R: float | None = None
    mu: float | None = None
    kappa: float | None = None
    k_margin: float | None = None
    reference: list | None = None

    _ALLOWED = {
        "interval": {"eps", "p"},
        "ball": {"n", "A", "rho", "R", "p", "k_margin"},
        "ball_intensity": {"n", "A", "rho", "R", "k_margin"},
        "gaussian": {"n", "A", "p"},
        "simplex": {"n", "mu", "reference", "kappa"},
    }

    def build(self):
        from .manifolds import make_family

        if self.tag not in self._ALLOWED:
            raise ConfigError(f"unknown family tag {self.tag!r}")
        params = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "tag"}
        given = {k for k, v in params.items() if v is not None}
        extra = given - self._ALLOWED[self.tag]
        if extra:
            raise ConfigError(f"parameters {sorted(extra)} do not apply to family {self.tag!r}")
        try:
            return make_family(self.tag, **{k: params[k] for k in given})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid family parameters: {exc}") from None


@dataclass
class ConstantsConfig:
    """Overrides for the a priori constants; ``None`` means "estimate".

    ``C`` is the constant of the lattice formulas, so that ``2 C`` bounds the
    stability constant of the projected map.
    """

    C: float | None = None
    L_FK: float | None = None
    rho_basin: float | None = None
    mu_step: float | None = None
    delta_KM: float | None = None
    safety: float = 2.0
    estimation_pairs: int = 10_000
    basin_radii: list = field(default_factory=lambda: [0.02, 0.05, 0.1, 0.2, 0.3])
    basin_trials: int = 10


@dataclass
class LatticeConfig:
    max_points: int = 2_000_000
    select_mode: str = "first"
    table_file: str | None = None


@dataclass
class StopConfig:
    tolerance: float = 1e-9
    max_iters: int = 100_000
    divergence_factor: float = 1e3


@dataclass
class OutputConfig:
    dir: str = "out"
    format: str = "json"
    trajectory_csv: bool = True


@dataclass
class ExperimentConfig:
    command: str = "reconstruct"
    family: FamilyConfig = field(default_factory=FamilyConfig)
    operator: str = "integration"
    N: int = 16
    seed: int = 0
    workers: int = 1
    pairs: int = 10_000
    alpha: float | None = None
    N_grid: list = field(default_factory=lambda: [4, 8, 16, 32, 64, 128])
    deficit_count: int = 1000
    delta: float | None = None
    truth: list | None = None
    measurement_file: str | None = None
    noise_sigma: float = 0.0
    constants: ConstantsConfig = field(default_factory=ConstantsConfig)
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    stop: StopConfig = field(default_factory=StopConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> "ExperimentConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.operator not in ("integration", "identity", "multiplication"):
            raise ConfigError(f"unknown operator {self.operator!r}")
        if self.N < 0:
            raise ConfigError("N must be nonnegative")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.pairs < 100:
            raise ConfigError("pairs must be >= 100")
        if any(int(n) < 0 for n in self.N_grid):
            raise ConfigError("N_grid entries must be nonnegative")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be nonnegative")
        if self.lattice.select_mode not in ("first", "argmin"):
            raise ConfigError("lattice.select_mode must be 'first' or 'argmin'")
        if self.output.format not in ("json", "csv"):
            raise ConfigError("output.format must be 'json' or 'csv'")
        if self.stop.tolerance < 0 or self.stop.max_iters < 0:
            raise ConfigError("stop tolerance and max_iters must be nonnegative")
        for name in ("C", "L_FK", "rho_basin", "mu_step", "delta_KM"):
            v = getattr(self.constants, name)
            if v is not None and not v > 0:
                raise ConfigError(f"constants.{name} must be positive")
        if self.constants.safety < 1:
            raise ConfigError("constants.safety must be >= 1")
        self.family.build()
        return self

    @classmethod
    def from_dict(cls, data) -> "ExperimentConfig":
        return _build(cls, data if data is not None else {}, "config").validate()

    def to_dict(self) -> dict:
        return _to_plain(self)


def _to_plain(obj):
    if isinstance(obj, FamilyConfig):
        # only the parameters that were set; the rest do not apply to the tag
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj) if getattr(obj, f.name) is not None}
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(x) for x in obj]
    return obj


def _check_scalar(tp, value, path):
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if tp is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported type {tp}")


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name in names & set(data):
        tp = hints[name]
        value = data[name]
        sub = f"{path}.{name}"
        args = typing.get_args(tp)
        if args and type(None) in args:
            if value is None:
                kwargs[name] = None
                continue
            tp = next(a for a in args if a is not type(None))
        if dataclasses.is_dataclass(tp):
            kwargs[name] = _build(tp, value, sub)
        else:
            kwargs[name] = _check_scalar(typing.get_origin(tp) or tp, value, sub)
    return cls(**kwargs)


def load_config(path) -> ExperimentConfig:
    """Parse and validate a YAML config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from None
    return ExperimentConfig.from_dict(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)
