from __future__ import annotations

import os
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional

from sdde_analytic.settings import settings
from sdde_analytic.utils.errors import ConfigError

ENV_PREFIX = "SDDE_RUN_"
SUBCOMMANDS = ("simulate", "lift", "verify-assumptions", "complex-extend", "example41", "report")
FORMATS = ("csv", "json")
EFFECTIVE_CONFIG_NAME = "run.cfg"


def sanitize(val: str) -> str:
    return val.strip().strip('"').strip("'").strip("`")


def parse_kv_file(path: Path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment line."""
    if not path.exists():
        raise ConfigError("config", f"config file not found: {path}")
    cfg: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("config", f"{path}:{lineno}: expected 'key = value', got {line!r}")
        k, v = line.split("=", 1)
        cfg[k.strip().lower().replace("-", "_")] = sanitize(v)
    return cfg


def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(str(v) for v in value)
    return str(value)


def write_kv_file(path: Path, data: Mapping[str, Any], header: Optional[str] = None) -> Path:
    """Inverse of parse_kv_file; None, booleans and sequences use the spellings _coerce reads."""
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {header}"] if header else []
    lines += [f"{k} = {_format_value(v)}" for k, v in data.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@dataclass
class RunConfig:
    """Every knob of a run. Precedence: defaults < file < SDDE_RUN_* < flags."""

    subcommand: str = "simulate"
    model: str = "toy-scalar"
    params_file: Optional[Path] = None
    out_dir: Optional[Path] = None
    formats: tuple[str, ...] = ("json", "csv")
    seed: int = 0
    workers: int = field(default_factory=lambda: settings.workers)

    # direct integration
    tol: float = 1e-9
    t_end: Optional[float] = None
    anchor_t: Optional[float] = None
    transient: float = 20.0

    # lift
    lift_J: int = 32
    decay_m: int = 1

    # assumptions
    grid_density: int = 33
    include_strip: bool = True

    # complex extension
    lambda0: Optional[float] = None
    n_stages: int = 4
    fp_tol: float = 1e-10
    max_iter: int = 20_000
    n_rays: int = 16
    n_panels: int = 2
    n_nodes: int = 12
    n_coeffs: int = 8
    lipschitz_samples: int = 64
    delta: float = 0.05
    h_max: float = 1.0
    q_margin: float = 0.05

    sources: dict[str, str] = field(default_factory=dict, compare=False, repr=False)

    def validate(self) -> "RunConfig":
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError("subcommand", f"must be one of {', '.join(SUBCOMMANDS)}, got {self.subcommand!r}")
        for name in ("tol", "fp_tol", "delta", "h_max", "q_margin"):
            value = getattr(self, name)
            if not value > 0:
                raise ConfigError(name, f"must be positive, got {value}")
        if self.lambda0 is not None and not self.lambda0 > 0:
            raise ConfigError("lambda0", f"must be positive, got {self.lambda0}")
        if self.t_end is not None and not self.t_end > 0:
            raise ConfigError("t_end", f"must be positive, got {self.t_end}")
        if self.transient < 0:
            raise ConfigError("transient", f"must be >= 0, got {self.transient}")
        minimums = {
            "lift_J": 1,
            "grid_density": 2,
            "n_stages": 1,
            "max_iter": 1,
            "n_rays": 1,
            "n_panels": 1,
            "n_nodes": 2,
            "n_coeffs": 1,
            "lipschitz_samples": 2,
            "workers": 1,
            "decay_m": 0,
        }
        for name, low in minimums.items():
            value = getattr(self, name)
            if value < low:
                raise ConfigError(name, f"must be >= {low}, got {value}")
        unknown = [f for f in self.formats if f not in FORMATS]
        if unknown or not self.formats:
            raise ConfigError("formats", f"must be a non-empty subset of {{csv, json}}, got {list(self.formats)}")
        if self.seed < 0:
            raise ConfigError("seed", f"must be >= 0, got {self.seed}")
        return self

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            if f.name == "sources":
                continue
            value = getattr(self, f.name)
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


def _field_types() -> dict[str, Any]:
    hints = typing.get_type_hints(RunConfig)
    return {f.name: hints[f.name] for f in fields(RunConfig) if f.name != "sources"}


def _coerce(name: str, raw: Any, hint: Any) -> Any:
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    args = typing.get_args(hint)
    if type(None) in args:
        if text.lower() in ("", "none", "null"):
            return None
        hint = next(a for a in args if a is not type(None))
    try:
        if hint is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
        if hint is Path:
            return Path(text).expanduser()
        if typing.get_origin(hint) is tuple:
            return tuple(part.strip().lower() for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(name, f"cannot parse {raw!r} as {getattr(hint, '__name__', hint)}") from exc
    return text


def apply_overrides(config: RunConfig, values: Mapping[str, Any], source: str) -> RunConfig:
    """Return a copy with ``values`` coerced onto it; unknown keys are errors."""
    types = _field_types()
    lookup = {name.lower(): name for name in types}
    lookup["j"] = "lift_J"
    changes: dict[str, Any] = {}
    for key, raw in values.items():
        name = lookup.get(key.lower().replace("-", "_"), "")
        if not name:
            raise ConfigError(key, f"unknown configuration key (from {source})")
        changes[name] = _coerce(name, raw, types[name])
    sources = {**config.sources, **{k: source for k in changes}}
    return replace(config, **changes, sources=sources)


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    types = _field_types()
    lowered = {name.lower(): name for name in types}
    out: dict[str, str] = {}
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        suffix = key[len(ENV_PREFIX) :].lower()
        if suffix not in lowered:
            raise ConfigError(key, "unknown configuration key (from environment)")
        out[lowered[suffix]] = value
    return out


def load_run_config(
    path: Optional[Path] = None,
    flags: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    config = RunConfig()
    if path is not None:
        config = apply_overrides(config, parse_kv_file(path), f"file {path}")
    config = apply_overrides(config, env_overrides(environ), "environment")
    if flags:
        config = apply_overrides(config, {k: v for k, v in flags.items() if v is not None}, "flags")
    return config.validate()
