from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Optional

import numpy as np
from scipy.special import gammaln

from sdde_analytic.delaycore import Box, HistoryFunction, ModelSpec
from sdde_analytic.delaycore.model import register_history
from sdde_analytic.models.loader import iter_python_files, load_builder
from sdde_analytic.settings import settings
from sdde_analytic.utils.errors import ConfigError, UnknownModelError

TOY_G0 = 0.3
TOY_TAU0 = 1.0
PANTOGRAPH_TERMS = 48


@dataclass
class ModelSetup:
    """A model with the history, horizon and lift anchor a run uses by default."""

    model: ModelSpec
    history: HistoryFunction
    t_end: float
    anchor_t: float
    description: str = ""
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.model.name


@dataclass
class ModelEntry:
    name: str
    description: str
    source: str
    factory: Callable[[], ModelSetup]


def pantograph_series(s: np.ndarray, q: float, terms: int = PANTOGRAPH_TERMS) -> np.ndarray:
    """sum_k (-1)^k q^{k(k-1)/2} s^k / k!, the entire solution of P'(s) = -P(q s), P(0) = 1."""
    s = np.asarray(s, dtype=float)
    k = np.arange(terms, dtype=float)
    log_mag = 0.5 * k * (k - 1) * math.log(q) - gammaln(k + 1)
    coeffs = (-1.0) ** k * np.exp(log_mag)
    return np.polynomial.polynomial.polyval(s, coeffs)


@register_history("pantograph")
def pantograph_history(g0: float = TOY_G0, tau0: float = TOY_TAU0, t0: float = 0.0) -> HistoryFunction:
    """Exact history of x' = -x(t - tau), tau' = g0.

    With t* = t0 - tau0/g0 the delayed time is t* + (1 - g0)(t - t*), so every
    lift depth stays consistent with the solution.
    """
    if not 0 < g0 < 1:
        raise ConfigError("g0", f"must lie in (0, 1), got {g0}")
    t_star = t0 - tau0 / g0
    q = 1.0 - g0

    def func(ts: np.ndarray) -> np.ndarray:
        s = np.asarray(ts, dtype=float) - t_star
        return np.stack([pantograph_series(s, q), g0 * s], axis=-1)

    def derivative(ts: np.ndarray) -> np.ndarray:
        s = np.asarray(ts, dtype=float) - t_star
        return np.stack([-pantograph_series(q * s, q), np.full_like(s, g0)], axis=-1)

    return HistoryFunction(
        t_min=t_star + 1e-7,
        t0=t0,
        func=func,
        smoothness_class=10**6,
        derivative=derivative,
        label="pantograph",
        params={"g0": float(g0), "tau0": float(tau0), "t0": float(t0)},
    )


def toy_scalar_model(g0: float = TOY_G0, l: float = 0.5, c: float = 2.0) -> ModelSpec:
    """x' = -x(t - tau), tau' = g0."""

    def f(theta1: np.ndarray, theta2: np.ndarray) -> np.ndarray:
        return -theta2

    def g(gamma1: np.ndarray, gamma2: np.ndarray) -> np.ndarray:
        return g0 + 0.0 * gamma2

    return ModelSpec(
        name="toy-scalar",
        n=1,
        m=1,
        f=f,
        g=g,
        u_box=Box((-2.0,), (2.0,), strip=1.0, names=("x",)),
        # deep lift states have tau -> 0, so V reaches below zero
        v_box=Box((-1.0,), (10.0,), strip=1.0, names=("tau",)),
        l=l,
        c=c,
        description="scalar pantograph-type test model with constant delay rate",
        params={"g0": g0},
    )


def _toy_setup() -> ModelSetup:
    model = toy_scalar_model()
    return ModelSetup(
        model=model,
        history=pantograph_history(),
        t_end=4.0,
        anchor_t=1.0,
        description=model.description,
    )


def _toy_constant_setup() -> ModelSetup:
    model = toy_scalar_model()
    return ModelSetup(
        model=model,
        history=HistoryFunction.constant((1.0,), TOY_TAU0, length=8.0),
        t_end=4.0,
        anchor_t=1.0,
        description="toy-scalar with a constant history (derivative breakpoints at t0 and its images)",
    )


def example41_setup(params_file: Optional[Path] = None) -> ModelSetup:
    from sdde_analytic import example41

    params = example41.load_params(params_file) if params_file else example41.NeuralModelParams()
    model = example41.build_neural_model(params)
    return ModelSetup(
        model=model,
        history=example41.default_history(params),
        t_end=200.0,
        anchor_t=15.0,
        description=model.description,
        extras={"params": params},
    )


def _builtin_models() -> list[ModelEntry]:
    return [
        ModelEntry("toy-scalar", _toy_setup().description, "built-in", _toy_setup),
        ModelEntry("toy-scalar-constant", "toy-scalar with a constant history", "built-in", _toy_constant_setup),
        ModelEntry("example41", "adaptive-delay neural pair", "built-in", example41_setup),
    ]


def _as_setup(value: Any, source: str) -> ModelSetup:
    if isinstance(value, ModelSetup):
        return value
    if isinstance(value, ModelSpec):
        raise ConfigError("model", f"{source}: build_model() must return a ModelSetup with a history")
    raise ConfigError("model", f"{source}: build_model() returned {type(value).__name__}")


def load_user_model(path: Path) -> ModelSetup:
    """Import ``path`` and call its build_model()."""
    builder = load_builder(path)
    return _as_setup(builder(), str(path))


def _load_custom_models() -> Iterable[ModelEntry]:
    entries: list[ModelEntry] = []
    for path in iter_python_files(settings.home / "models"):
        entries.append(
            ModelEntry(path.stem, f"user model from {path.name}", str(path), lambda p=path: load_user_model(p))
        )
    return entries


def list_models() -> list[ModelEntry]:
    models = _builtin_models()
    models.extend(_load_custom_models())
    return models


def get_model(name_or_path: str, params_file: Optional[Path] = None) -> ModelSetup:
    """Built-in name, user model name or path to a ``.py`` file."""
    if name_or_path.endswith(".py"):
        return load_user_model(Path(name_or_path).expanduser())
    if name_or_path == "example41":
        return example41_setup(params_file)
    entries = list_models()
    for entry in entries:
        if entry.name == name_or_path:
            return entry.factory()
    raise UnknownModelError(name_or_path, [e.name for e in entries])
