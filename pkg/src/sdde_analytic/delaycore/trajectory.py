"""Dense-output trajectories.

Each accepted step stores the quartic continuous extension of the
Dormand-Prince pair:

    y(t_start + s h) = y_start + h * sum_{p=1..4} q[:, p-1] s^p,   0 <= s <= 1
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Any, Mapping

import numpy as np

from sdde_analytic.delaycore.model import HistoryFunction
from sdde_analytic.utils.errors import ConfigError, OutOfDomainError

POLY_DEGREE = 4


def eval_segment(
    t: np.ndarray, t_start: np.ndarray, h: np.ndarray, y_start: np.ndarray, q: np.ndarray, order: int = 0
) -> np.ndarray:
    """Evaluate the ``order``-th time derivative of per-point segment polynomials.

    Shapes: t, t_start, h (n,); y_start (n, d); q (n, d, 4).
    """
    s = (t - t_start) / h
    powers = np.arange(1, POLY_DEGREE + 1)
    if order == 0:
        basis = s[:, None] ** powers
        return y_start + h[:, None] * np.einsum("nij,nj->ni", q, basis)
    coeff = np.array([factorial(p) / factorial(p - order) if p >= order else 0.0 for p in powers])
    expo = np.maximum(powers - order, 0)
    basis = coeff * s[:, None] ** expo
    return h[:, None] ** (1 - order) * np.einsum("nij,nj->ni", q, basis)


@dataclass(frozen=True)
class Trajectory:
    """Immutable solution (x, tau) on [t_min, t_max], history included."""

    history: HistoryFunction
    n: int
    t_start: np.ndarray
    t_end: np.ndarray
    y_start: np.ndarray
    q: np.ndarray
    breakpoints: tuple[float, ...] = ()
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("t_start", "t_end", "y_start", "q"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.q.ndim != 3 or self.q.shape[0] != self.t_start.size:
            raise ConfigError("segments", "coefficient array does not match the segment count")

    # -- domain ---------------------------------------------------------

    @property
    def width(self) -> int:
        return self.n + 1

    @property
    def t0(self) -> float:
        return self.history.t0

    @property
    def t_min(self) -> float:
        return self.history.t_min

    @property
    def t_max(self) -> float:
        return float(self.t_end[-1]) if self.t_end.size else self.t0

    @property
    def n_segments(self) -> int:
        return int(self.t_start.size)

    @property
    def mesh(self) -> np.ndarray:
        if not self.t_start.size:
            return np.array([self.t0])
        return np.append(self.t_start, self.t_end[-1])

    def contains(self, t: float | np.ndarray, tol: float = 0.0) -> np.ndarray:
        ts = np.asarray(t, dtype=float)
        return (ts >= self.t_min - tol) & (ts <= self.t_max + tol)

    def _check(self, ts: np.ndarray) -> None:
        bad = ~self.contains(ts, tol=1e-12 * max(1.0, abs(self.t_max)))
        if np.any(bad):
            raise OutOfDomainError(float(ts[np.argmax(bad)]), self.t_min, self.t_max)

    def _locate(self, ts: np.ndarray, side: str) -> np.ndarray:
        if side == "left":
            idx = np.searchsorted(self.t_end, ts, side="left")
        else:
            idx = np.searchsorted(self.t_start, ts, side="right") - 1
        return np.clip(idx, 0, self.n_segments - 1)

    # -- evaluation -----------------------------------------------------

    def derivative(self, t: float | np.ndarray, order: int = 1, side: str = "right") -> np.ndarray:
        """``order``-th derivative of (x, tau); ``side`` picks the one-sided limit at knots."""
        if side not in ("left", "right"):
            raise ConfigError("side", f"expected 'left' or 'right', got {side!r}")
        ts = np.asarray(t, dtype=float)
        flat = np.atleast_1d(ts).ravel()
        self._check(flat)

        out = np.empty((flat.size, self.width))
        in_history = flat < self.t0
        if side == "left" or not self.n_segments:
            in_history |= flat == self.t0
        if np.any(in_history):
            out[in_history] = self._history_derivative(flat[in_history], order)
        rest = ~in_history
        if np.any(rest):
            ts_rest = np.minimum(flat[rest], self.t_max)
            idx = self._locate(ts_rest, side)
            h = self.t_end[idx] - self.t_start[idx]
            out[rest] = eval_segment(ts_rest, self.t_start[idx], h, self.y_start[idx], self.q[idx], order)
        return out[0] if ts.ndim == 0 else out.reshape(ts.shape + (self.width,))

    def _history_derivative(self, ts: np.ndarray, order: int) -> np.ndarray:
        if order == 0:
            return self.history(ts)
        if order == 1:
            return self.history.deriv(ts)
        if order == 2:
            step = 1e-4 * max(1.0, self.t0 - self.t_min)
            lo = np.maximum(ts - step, self.t_min)
            hi = np.minimum(ts + step, self.t0)
            return (self.history.deriv(hi) - self.history.deriv(lo)) / (hi - lo)[:, None]
        raise ConfigError("order", "history derivatives above order 2 are not available")

    def eval(self, t: float | np.ndarray) -> np.ndarray:
        return self.derivative(t, order=0)

    def eval_deriv(self, t: float | np.ndarray, side: str = "right") -> np.ndarray:
        return self.derivative(t, order=1, side=side)

    def x(self, t: float | np.ndarray) -> np.ndarray:
        return self.eval(t)[..., : self.n]

    def tau(self, t: float | np.ndarray) -> np.ndarray:
        return self.eval(t)[..., self.n]

    def sample(self, n_points: int, start: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Uniform samples on [start, t_max]; ``start`` defaults to t_min."""
        lo = self.t_min if start is None else max(start, self.t_min)
        ts = np.linspace(lo, self.t_max, n_points)
        return ts, self.eval(ts)
