"""Delay-map evaluation and orbit diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sdde_analytic.delaycore.model import ModelSpec
from sdde_analytic.delaycore.trajectory import Trajectory
from sdde_analytic.utils.errors import ConfigError, HistoryExhaustedError, OutOfDomainError

MARGIN_TOL = 1e-12


def eta(traj: Trajectory, t: float) -> float:
    """t - tau(t)."""
    if not traj.contains(t):
        raise OutOfDomainError(float(t), traj.t_min, traj.t_max)
    return float(t - traj.tau(t))


def eta_iterate(traj: Trajectory, t: float, k: int) -> float:
    """k-fold composition of eta; k = 0 returns t."""
    return float(eta_chain(traj, np.array([t]), k)[0, -1])


def eta_chain(traj: Trajectory, ts: np.ndarray, k: int) -> np.ndarray:
    """Iterates [t, eta(t), ..., eta^k(t)] for every t, shape (n, k+1).

    Raises HistoryExhaustedError naming the first depth that leaves [t_min, t_max].
    """
    if k < 0:
        raise ConfigError("k", f"must be >= 0, got {k}")
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if not np.all(traj.contains(ts)):
        bad = ts[~traj.contains(ts)][0]
        raise OutOfDomainError(float(bad), traj.t_min, traj.t_max)
    out = np.empty((ts.size, k + 1))
    out[:, 0] = ts
    slack = 1e-12 * max(1.0, abs(traj.t_min))
    for depth in range(1, k + 1):
        prev = out[:, depth - 1]
        nxt = prev - traj.tau(prev)
        low = nxt < traj.t_min - slack
        if np.any(low):
            raise HistoryExhaustedError(float(nxt[low][0]), depth, traj.t_min)
        out[:, depth] = np.maximum(nxt, traj.t_min)
    return out


def max_feasible_depth(traj: Trajectory, t: float, limit: int = 10_000) -> int:
    """Largest k with eta^k(t) still inside the known history."""
    s = float(t)
    for depth in range(1, limit + 1):
        s = s - float(traj.tau(s))
        if s < traj.t_min:
            return depth - 1
    return limit


@dataclass(frozen=True)
class MonotoneDelayReport:
    """Sampled rate d(eta)/dt = 1 - g along an orbit, compared with (l, c)."""

    min_rate: float
    max_rate: float
    l: float
    c: float
    margin: float
    a2_margin: float
    eta_increasing: bool
    n_samples: int
    t_window: tuple[float, float]

    @property
    def passed(self) -> bool:
        return self.margin > MARGIN_TOL and self.eta_increasing

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


def delay_rates(traj: Trajectory, model: ModelSpec, ts: np.ndarray) -> np.ndarray:
    """1 - g(x(t), x(eta(t)), ..., x(eta^{M-1}(t)), tau(t)) at each t."""
    chain = eta_chain(traj, ts, model.m - 1)
    states = traj.eval(chain)
    gamma1 = states[..., : model.n]
    gamma2 = states[:, 0, model.n]
    return 1.0 - model.eval_g(gamma1, gamma2)


def check_monotone_delay(
    traj: Trajectory, model: ModelSpec, n_samples: int = 400, start: float | None = None
) -> MonotoneDelayReport:
    """Sample d(eta)/dt on [start, t_max]; PASS iff l < min and max < c."""
    if n_samples < 2:
        raise ConfigError("n_samples", f"must be >= 2, got {n_samples}")
    lo = traj.t0 if start is None else max(start, traj.t_min)
    ts = np.linspace(lo, traj.t_max, n_samples)
    # the window may open before t0 only where the delay chain stays in history
    keep = np.ones(ts.size, dtype=bool)
    for i, t in enumerate(ts):
        keep[i] = max_feasible_depth(traj, t, limit=model.m) >= model.m - 1
    ts = ts[keep]
    if ts.size < 2:
        raise HistoryExhaustedError(lo, model.m - 1, traj.t_min)

    w = delay_rates(traj, model, ts)
    rates = np.real(w)
    etas = ts - traj.tau(ts)
    min_rate = float(np.min(rates))
    max_rate = float(np.max(rates))
    return MonotoneDelayReport(
        min_rate=min_rate,
        max_rate=max_rate,
        l=model.l,
        c=model.c,
        margin=min(min_rate - model.l, model.c - max_rate),
        a2_margin=float(np.min(model.a2_margin(w))),
        eta_increasing=bool(np.all(np.diff(etas) > 0) and np.all(etas < ts)),
        n_samples=int(ts.size),
        t_window=(float(ts[0]), float(ts[-1])),
    )


def residual(traj: Trajectory, model: ModelSpec, ts: np.ndarray) -> np.ndarray:
    """||eval_deriv(t) - rhs(t)||_inf with the right-hand side read from dense output."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    chain = eta_chain(traj, ts, model.hops)
    states = traj.eval(chain)
    out = np.empty(ts.size)
    for i in range(ts.size):
        rhs = model.direct_rhs(states[i, 0], states[i, 1:, : model.n])
        out[i] = float(np.max(np.abs(traj.eval_deriv(ts[i]) - rhs)))
    return out


def derivative_jump(traj: Trajectory, t: float, order: int) -> float:
    """Size of the jump in the ``order``-th derivative at a knot t."""
    left = traj.derivative(t, order=order, side="left")
    right = traj.derivative(t, order=order, side="right")
    return float(np.max(np.abs(right - left)))
