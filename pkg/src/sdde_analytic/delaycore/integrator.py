"""Method-of-steps integration of the state-dependent delay system.

Steps are taken with scipy's Dormand-Prince 5(4) pair. Delayed states are read
from the dense output of completed steps: the step size is capped at
0.9 tau / c, and since d(eta)/dt = 1 - g < c every delayed argument of a stage
lies before the start of the current step.

The junction t0 between history and solution is propagated forward. When eta
crosses the latest breakpoint inside a step, the step is discarded and the
interval is re-integrated up to the crossing, so no step straddles a breakpoint.
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.integrate import RK45
from scipy.optimize import brentq

from sdde_analytic.delaycore.model import HistoryFunction, ModelSpec
from sdde_analytic.delaycore.trajectory import Trajectory
from sdde_analytic.utils.errors import (
    ConfigError,
    DomainExitError,
    HistoryExhaustedError,
    NumericalError,
    StepSizeUnderflowError,
)

logger = logging.getLogger("sdde.delaycore")

STEP_SAFETY = 0.9
# Residual ||eval_deriv - rhs|| stays below RESIDUAL_CONSTANT * tol on smooth pieces.
RESIDUAL_CONSTANT = 100.0
ORDER = 5


@dataclass
class _Builder:
    model: ModelSpec
    history: HistoryFunction
    t_start: list[float] = field(default_factory=list)
    t_end: list[float] = field(default_factory=list)
    y_start: list[np.ndarray] = field(default_factory=list)
    q: list[np.ndarray] = field(default_factory=list)
    breakpoints: list[float] = field(default_factory=list)
    n_rhs: int = 0

    @property
    def t_done(self) -> float:
        return self.t_end[-1] if self.t_end else self.history.t0

    def state(self, s: float, depth: int) -> np.ndarray:
        hist = self.history
        if s <= hist.t0:
            if s < hist.t_min - 1e-12 * max(1.0, abs(hist.t_min)):
                raise HistoryExhaustedError(s, depth, hist.t_min)
            return hist(max(s, hist.t_min))
        if s > self.t_done + 1e-12 * max(1.0, abs(s)):
            raise NumericalError(
                f"Delayed argument {s:.6g} lies ahead of the completed solution ({self.t_done:.6g}); "
                "the delay rate bound 1 - g < c does not hold"
            )
        k = bisect.bisect_right(self.t_start, s) - 1
        k = min(max(k, 0), len(self.t_start) - 1)
        h = self.t_end[k] - self.t_start[k]
        x = (s - self.t_start[k]) / h
        return self.y_start[k] + h * (self.q[k] @ np.array([x, x * x, x**3, x**4]))

    def append(self, dense: Any) -> None:
        self.t_start.append(float(dense.t_old))
        self.t_end.append(float(dense.t))
        self.y_start.append(np.array(dense.y_old, dtype=float))
        self.q.append(np.array(dense.Q, dtype=float))

    def freeze(self, meta: dict[str, Any]) -> Trajectory:
        width = self.model.width
        return Trajectory(
            history=self.history,
            n=self.model.n,
            t_start=np.array(self.t_start),
            t_end=np.array(self.t_end),
            y_start=np.array(self.y_start).reshape(-1, width),
            q=np.array(self.q).reshape(-1, width, 4),
            breakpoints=tuple(self.breakpoints),
            meta=meta,
        )

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        self.n_rhs += 1
        model = self.model
        delayed = np.empty((model.hops, model.n))
        s, tau = t, y[model.n]
        for depth in range(1, model.hops + 1):
            s = s - tau
            past = self.state(s, depth)
            delayed[depth - 1] = past[: model.n]
            tau = past[model.n]
        return np.real_if_close(model.direct_rhs(y, delayed)).astype(float)


def _step_cap(model: ModelSpec, y: np.ndarray, max_step: float) -> float:
    tau = max(float(y[model.n]), 1e-300)
    return min(max_step, STEP_SAFETY * tau / model.c)


def _check_segment(builder: _Builder, dense: Any, domain_tol: float, meta: dict[str, Any]) -> None:
    """Raise DomainExitError when the new segment leaves the closure of U x V."""
    model = builder.model
    probes = np.linspace(dense.t_old, dense.t, 5)[1:]
    states = np.array([dense(s) for s in probes])
    margins = model.state_margin(states, use_strip=False)
    bad = np.flatnonzero(margins < -domain_tol)
    if not bad.size:
        return
    k = int(bad[0])

    def shifted(s: float) -> float:
        return float(model.state_margin(dense(s), use_strip=False)) + domain_tol

    lo = float(dense.t_old)
    hi = float(probes[k])
    t_exit = brentq(shifted, lo, hi) if shifted(lo) > 0 else lo
    constraint = model.state_violation(dense(hi)) or "domain"
    logger.info("orbit left the domain at t=%.6g (%s)", t_exit, constraint)
    raise DomainExitError(t_exit, constraint, partial=builder.freeze(meta))


def _make_solver(
    builder: _Builder, t: float, y: np.ndarray, bound: float, tol: float, cap: float, first: float
) -> RK45:
    return RK45(
        builder.rhs,
        t,
        y,
        bound,
        max_step=cap,
        rtol=tol,
        atol=tol,
        first_step=min(first, cap, bound - t),
    )


def integrate_dde(
    model: ModelSpec,
    hist: HistoryFunction,
    t_end: float,
    tol: float,
    *,
    max_step: float = math.inf,
    max_breakpoint_order: int = 4,
    domain_tol: float = 1e-9,
    on_step: Callable[[float], None] | None = None,
) -> Trajectory:
    """Integrate the direct system from the end of ``hist`` up to ``t_end``."""
    if not (tol > 0 and math.isfinite(tol)):
        raise ConfigError("tol", f"must be positive, got {tol}")
    if not t_end > hist.t0:
        raise ConfigError("t_end", f"must exceed t0 = {hist.t0}, got {t_end}")
    hist.validate(model)

    builder = _Builder(model, hist, breakpoints=[hist.t0])
    meta: dict[str, Any] = {
        "model": model.name,
        "N": model.n,
        "M": model.m,
        "c": model.c,
        "l": model.l,
        "tol": tol,
        "history": hist.label,
    }
    t = hist.t0
    y = np.array(hist(t), dtype=float)
    pending = hist.t0
    order = 0
    h_guess = 1e-2 * _step_cap(model, y, max_step)
    n_steps = 0
    horizon = t_end - 1e-12 * max(1.0, abs(t_end))

    while t < horizon:
        cap = _step_cap(model, y, max_step)
        solver = _make_solver(builder, t, y, t_end, tol, cap, h_guess)
        restarted = False
        while solver.status == "running" and not restarted:
            solver.max_step = _step_cap(model, solver.y, max_step)
            t_old, y_old = solver.t, solver.y.copy()
            message = solver.step()
            if solver.status == "failed":
                raise StepSizeUnderflowError(t_old, str(message or ""))
            dense = solver.dense_output()
            eta_new = solver.t - solver.y[model.n]

            if order < max_breakpoint_order and eta_new > pending:
                t_star = brentq(lambda s: s - dense(s)[model.n] - pending, t_old, solver.t, xtol=1e-15)
                if t_star - t_old > 1e-12 * max(1.0, abs(t_old)):
                    sub = _make_solver(builder, t_old, y_old, t_star, tol, solver.max_step, t_star - t_old)
                    while sub.status == "running":
                        sub.max_step = _step_cap(model, sub.y, max_step)
                        msg = sub.step()
                        if sub.status == "failed":
                            raise StepSizeUnderflowError(sub.t, str(msg or ""))
                        piece = sub.dense_output()
                        _check_segment(builder, piece, domain_tol, meta)
                        builder.append(piece)
                        n_steps += 1
                    t, y = float(sub.t), sub.y.copy()
                else:
                    t, y = t_old, y_old
                order += 1
                pending = t
                builder.breakpoints.append(t)
                logger.debug("breakpoint of order %d at t=%.12g", order, t)
                h_guess = solver.step_size or h_guess
                restarted = True
                continue

            _check_segment(builder, dense, domain_tol, meta)
            builder.append(dense)
            n_steps += 1
            t, y = float(solver.t), solver.y.copy()
            h_guess = solver.step_size or h_guess
            if on_step is not None:
                on_step(t)

    meta.update({"n_steps": n_steps, "n_rhs": builder.n_rhs, "breakpoint_order": order})
    logger.info("integrated %s to t=%.6g in %d steps", model.name, t, n_steps)
    return builder.freeze(meta)
