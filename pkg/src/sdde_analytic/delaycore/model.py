"""Model, domain and history types for the state-dependent delay system.

The system is

    x'(t)   = f(x(t), x(eta(t)))
    tau'(t) = g(x(t), x(eta(t)), ..., x(eta^{M-1}(t)), tau(t))

with eta(t) = t - tau(t). ``f`` and ``g`` must broadcast over leading axes:
``f(theta1, theta2)`` takes two arrays of shape (..., N) and returns (..., N),
``g(gamma1, gamma2)`` takes (..., M, N) and (...) and returns (...). Both have
to accept complex arguments inside the declared strips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np

from sdde_analytic.utils.errors import ConfigError, DomainExitError, ModelDefectError

FMap = Callable[[np.ndarray, np.ndarray], np.ndarray]
GMap = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Box:
    """Closed box in R^d with an imaginary strip of half-width ``strip``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    strip: float = 0.0
    names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper) or not lower:
            raise ConfigError("box", "lower and upper must have the same non-zero length")
        if any(not (lo < hi) for lo, hi in zip(lower, upper)):
            raise ConfigError("box", f"need lower < upper, got {lower} / {upper}")
        if not (self.strip >= 0 and math.isfinite(self.strip)):
            raise ConfigError("strip", f"must be finite and >= 0, got {self.strip}")
        names = tuple(self.names) or tuple(f"x{i + 1}" for i in range(len(lower)))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "names", names)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lower) + np.asarray(self.upper)) / 2

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    def coordinate_margins(self, points: np.ndarray, use_strip: bool = True) -> np.ndarray:
        """Signed distances to every face, shape (..., d, k); positive inside."""
        pts = np.asarray(points)
        re = np.real(pts)
        faces = [re - np.asarray(self.lower), np.asarray(self.upper) - re]
        if use_strip and np.iscomplexobj(pts):
            faces.append(self.strip - np.abs(np.imag(pts)))
        return np.stack(faces, axis=-1)

    def margin(self, points: np.ndarray, use_strip: bool = True) -> np.ndarray:
        """Smallest signed face distance per point, shape (...)."""
        return np.min(self.coordinate_margins(points, use_strip), axis=(-2, -1))

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        return self.margin(points) >= -tol

    def violation(self, point: np.ndarray) -> Optional[str]:
        """Human-readable name of the most violated face, or None when inside."""
        m = self.coordinate_margins(np.asarray(point))
        idx = np.unravel_index(int(np.argmin(m)), m.shape)
        if m[idx] >= 0:
            return None
        coord, face = idx[-2], idx[-1]
        name = self.names[coord]
        if face == 0:
            return f"{name} < {self.lower[coord]:g}"
        if face == 1:
            return f"{name} > {self.upper[coord]:g}"
        return f"|Im {name}| > {self.strip:g}"


@dataclass(frozen=True)
class ModelSpec:
    """The tuple (f, g, N, M, U, V, l, c)."""

    name: str
    n: int
    m: int
    f: FMap
    g: GMap
    u_box: Box
    v_box: Box
    l: float
    c: float
    description: str = ""
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError("N", f"must be >= 1, got {self.n}")
        if self.m < 1:
            raise ConfigError("M", f"must be >= 1, got {self.m}")
        if self.u_box.dim != self.n:
            raise ConfigError("U", f"box dimension {self.u_box.dim} does not match N = {self.n}")
        if self.v_box.dim != 1:
            raise ConfigError("V", "delay box must be one-dimensional")
        if not (0.0 < self.l < 1.0 < self.c):
            raise ConfigError("l, c", f"need 0 < l < 1 < c, got l = {self.l}, c = {self.c}")

    @property
    def width(self) -> int:
        """Block width N + 1."""
        return self.n + 1

    @property
    def tail_count(self) -> int:
        """Unscaled states needed beyond block J: f needs u_{J+1}, g needs up to u_{J+M-1}."""
        return max(1, self.m - 1)

    @property
    def hops(self) -> int:
        """Delay hops needed to evaluate the direct right-hand side."""
        return max(1, self.m - 1)

    @property
    def a2_center(self) -> float:
        return (self.c + self.l) / 2

    @property
    def a2_radius(self) -> float:
        return (self.c - self.l) / 2

    def with_constants(self, l: float, c: float) -> "ModelSpec":
        return replace(self, l=l, c=c)

    def eval_f(self, theta1: np.ndarray, theta2: np.ndarray) -> np.ndarray:
        theta1 = np.asarray(theta1)
        out = np.asarray(self.f(theta1, np.asarray(theta2)))
        return np.broadcast_to(out, theta1.shape)

    def eval_g(self, gamma1: np.ndarray, gamma2: np.ndarray) -> np.ndarray:
        gamma2 = np.asarray(gamma2)
        out = np.asarray(self.g(np.asarray(gamma1), gamma2))
        return np.broadcast_to(out, gamma2.shape)

    def a2_margin(self, w: np.ndarray) -> np.ndarray:
        """(c - l)/2 - |w - (c + l)/2| for w = 1 - g."""
        return self.a2_radius - np.abs(np.asarray(w) - self.a2_center)

    def state_margin(self, states: np.ndarray, use_strip: bool = True) -> np.ndarray:
        """Smallest face distance of (x, tau) states with shape (..., N+1)."""
        states = np.asarray(states)
        mu = self.u_box.margin(states[..., : self.n], use_strip)
        mv = self.v_box.margin(states[..., self.n :], use_strip)
        return np.minimum(mu, mv)

    def state_violation(self, state: np.ndarray) -> Optional[str]:
        state = np.asarray(state)
        return self.u_box.violation(state[: self.n]) or self.v_box.violation(state[self.n :])

    def direct_rhs(self, state: np.ndarray, delayed: np.ndarray) -> np.ndarray:
        """Right-hand side of the direct system.

        ``delayed`` holds x(eta^k(t)) for k = 1..hops, shape (hops, N).
        """
        x = state[: self.n]
        tau = state[self.n]
        chain = np.concatenate([x[None, :], delayed], axis=0)[: self.m]
        dx = self.eval_f(x, delayed[0])
        dtau = self.eval_g(chain, np.asarray(tau))
        out = np.empty(self.width, dtype=np.result_type(dx, dtau, float))
        out[: self.n] = dx
        out[self.n] = dtau
        if not np.all(np.isfinite(out)):
            raise ModelDefectError("direct right-hand side", state.tolist())
        return out


HistoryMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class HistoryFunction:
    """Initial history (x, tau) on [t_min, t0].

    ``func`` is vectorised: an array of times of shape (n,) maps to (n, N+1).
    """

    t_min: float
    t0: float
    func: HistoryMap
    smoothness_class: int = 0
    derivative: Optional[HistoryMap] = None
    label: str = ""
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.t_min < self.t0:
            raise ConfigError("history", f"need t_min < t0, got [{self.t_min}, {self.t0}]")

    def __call__(self, t: float | np.ndarray) -> np.ndarray:
        ts = np.asarray(t, dtype=float)
        out = np.asarray(self.func(np.atleast_1d(ts)), dtype=float)
        return out[0] if ts.ndim == 0 else out

    def deriv(self, t: float | np.ndarray) -> np.ndarray:
        ts = np.asarray(t, dtype=float)
        if self.derivative is not None:
            out = np.asarray(self.derivative(np.atleast_1d(ts)), dtype=float)
        else:
            step = 1e-6 * max(1.0, self.t0 - self.t_min)
            lo = np.maximum(np.atleast_1d(ts) - step, self.t_min)
            hi = np.minimum(np.atleast_1d(ts) + step, self.t0)
            out = (self.func(hi) - self.func(lo)) / (hi - lo)[:, None]
        return out[0] if ts.ndim == 0 else out

    def validate(self, model: ModelSpec, n_samples: int = 129) -> None:
        ts = np.linspace(self.t_min, self.t0, n_samples)
        states = self(ts)
        if states.shape != (n_samples, model.width):
            raise ConfigError(
                "history", f"expected states of width {model.width}, got shape {states.shape}"
            )
        margins = model.state_margin(states, use_strip=False)
        bad = np.flatnonzero(margins < -1e-12)
        if bad.size:
            k = int(bad[0])
            raise DomainExitError(float(ts[k]), f"history {model.state_violation(states[k])}")

    @classmethod
    def constant(
        cls, x0: Sequence[float], tau0: float, t0: float = 0.0, length: Optional[float] = None
    ) -> "HistoryFunction":
        """Constant history on [t0 - length, t0]; ``length`` defaults to 64 tau0."""
        state = np.append(np.asarray(x0, dtype=float), float(tau0))
        span = float(length) if length is not None else 64.0 * float(tau0)

        def func(ts: np.ndarray) -> np.ndarray:
            return np.tile(state, (np.size(ts), 1))

        def derivative(ts: np.ndarray) -> np.ndarray:
            return np.zeros((np.size(ts), state.size))

        return cls(
            t_min=t0 - span,
            t0=t0,
            func=func,
            smoothness_class=10**6,
            derivative=derivative,
            label="constant",
            params={"x0": state[:-1].tolist(), "tau0": float(tau0), "t0": float(t0), "length": span},
        )

    @classmethod
    def from_samples(cls, ts: np.ndarray, values: np.ndarray, label: str = "sampled") -> "HistoryFunction":
        """Piecewise-linear history through sampled states."""
        ts = np.asarray(ts, dtype=float)
        values = np.asarray(values, dtype=float)

        def func(query: np.ndarray) -> np.ndarray:
            query = np.atleast_1d(query)
            return np.stack([np.interp(query, ts, values[:, k]) for k in range(values.shape[1])], axis=-1)

        return cls(t_min=float(ts[0]), t0=float(ts[-1]), func=func, smoothness_class=0, label=label)


HistoryBuilder = Callable[..., HistoryFunction]

_HISTORY_BUILDERS: dict[str, HistoryBuilder] = {}


def register_history(label: str) -> Callable[[HistoryBuilder], HistoryBuilder]:
    """Register a builder so saved histories with ``label`` can be rebuilt from their params."""

    def decorator(builder: HistoryBuilder) -> HistoryBuilder:
        _HISTORY_BUILDERS[label] = builder
        return builder

    return decorator


def rebuild_history(label: str, params: Mapping[str, Any]) -> Optional[HistoryFunction]:
    """Exact history for a registered ``label``; None when the label or params are unknown."""
    builder = _HISTORY_BUILDERS.get(label)
    if builder is None or not params:
        return None
    try:
        return builder(**params)
    except TypeError as exc:
        raise ConfigError("history", f"cannot rebuild {label!r} history from {dict(params)}: {exc}") from exc


register_history("constant")(HistoryFunction.constant)
