"""Sequence-space lift of a delay trajectory.

One solution (x, tau) becomes the family of blocks

    w_j(t) = c^{-j} (x, tau)(eta^{j-1}(t)),   j = 1..J,

which solves the delay-free system dw/dt = H(Tw) with H_j = F_j * G_j:

    F_j = (f(u_j, u_{j+1}), g(mu_j)) / (1 - g(mu_j))
    G_j = c^{-j} prod_{i=1..j} (1 - g(mu_i))
    mu_i = (u_i, ..., u_{i+M-1}, v_i)

Blocks past J need the unscaled tail states u_{J+1}..u_{J+K}, K = max(1, M-1),
which come from a ``TailClosure``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from sdde_analytic.delaycore.diagnostics import eta_chain, max_feasible_depth
from sdde_analytic.delaycore.model import GMap, ModelSpec
from sdde_analytic.delaycore.trajectory import Trajectory
from sdde_analytic.seqspace import WeightedSeq, weights
from sdde_analytic.utils.errors import (
    A2ViolationError,
    ConfigError,
    DomainExitError,
    HistoryExhaustedError,
    ModelDefectError,
    NumericalError,
)

logger = logging.getLogger("sdde.lift")

DEFAULT_J = 32
TailPolicy = Literal["trajectory", "frozen"]


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailClosure:
    """Unscaled states u_{J+1}..u_{J+K} (with their delays) past the truncation."""

    depth: int
    states: np.ndarray
    kind: str = "trajectory"
    source: Optional[Trajectory] = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        arr = np.array(self.states, copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "states", arr)

    @property
    def count(self) -> int:
        return int(self.states.shape[0])


@dataclass(frozen=True)
class ChainPoint:
    """mu_i = (u_i, ..., u_{i+M-1}, v_i)."""

    u: np.ndarray
    v: complex

    def g(self, g: GMap) -> complex:
        return complex(np.asarray(g(self.u, np.asarray(self.v))))


@dataclass(frozen=True)
class LiftedState:
    seq: WeightedSeq
    closure: TailClosure
    t: float
    eta_times: tuple[float, ...] = ()

    @property
    def base_c(self) -> float:
        return self.seq.base_c

    @property
    def J(self) -> int:
        return self.seq.trunc_J

    def unscaled(self) -> np.ndarray:
        """(u_j, v_j) for j = 1..J."""
        return self.seq.unscaled()

    def full_unscaled(self) -> np.ndarray:
        """Blocks followed by the tail, shape (J + K, N+1)."""
        return np.concatenate([self.unscaled(), self.closure.states.astype(complex)], axis=0)

    def with_seq(self, seq: WeightedSeq) -> "LiftedState":
        return LiftedState(seq, self.closure, self.t, self.eta_times)


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def lift_states(traj: Trajectory, ts: np.ndarray, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Unscaled states at eta^0..eta^{depth-1} of every t: times (n, depth), states (n, depth, N+1)."""
    chain = eta_chain(traj, ts, depth - 1)
    return chain, traj.eval(chain)


def build_lift(traj: Trajectory, t: float, J: int, model: ModelSpec) -> LiftedState:
    """w_j = c^{-j} (x, tau)(eta^{j-1}(t)), j = 1..J, with the trajectory as tail closure."""
    if J < 1:
        raise ConfigError("lift_J", f"must be >= 1, got {J}")
    K = model.tail_count
    try:
        chain, states = lift_states(traj, np.array([t]), J + K)
    except HistoryExhaustedError as exc:
        feasible = max(0, max_feasible_depth(traj, t, limit=J + K) + 1 - K)
        raise HistoryExhaustedError(exc.time, exc.depth, exc.t_min, feasible_J=feasible) from exc
    seq = WeightedSeq.from_unscaled(states[0, :J], model.c)
    closure = TailClosure(depth=J, states=states[0, J:], kind="trajectory", source=traj)
    return LiftedState(seq, closure, float(t), tuple(float(s) for s in chain[0]))


def freeze_tail(w: LiftedState) -> LiftedState:
    return LiftedState(
        w.seq, TailClosure(w.J, w.closure.states, kind="frozen"), w.t, w.eta_times
    )


def chain_points(full: np.ndarray, model: ModelSpec, count: Optional[int] = None) -> list[ChainPoint]:
    """mu_1..mu_count from unscaled states of shape (J + K, N+1)."""
    full = np.asarray(full)
    count = full.shape[0] - model.tail_count if count is None else count
    n, m = model.n, model.m
    return [ChainPoint(u=full[i : i + m, :n], v=full[i, n]) for i in range(count)]


# ---------------------------------------------------------------------------
# Vector field
# ---------------------------------------------------------------------------


def _log_products(w: np.ndarray, c: float) -> np.ndarray:
    """log(c^{-j} prod_{i<=j} w_i) along the last axis, as complex logarithms."""
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(w)) + 1j * np.angle(w)
    j = np.arange(1, w.shape[-1] + 1)
    return np.cumsum(logs, axis=-1) - j * math.log(c)


def product_weight(chain: Sequence[ChainPoint], j: int, g: GMap, c: float) -> complex:
    """c^{-j} prod_{i=0}^{j-1} (1 - g(mu_i)), accumulated as log-magnitude and phase."""
    if j > len(chain):
        raise ConfigError("j", f"chain has {len(chain)} points, need {j}")
    if j == 0:
        return 1.0 + 0j
    w = np.array([1.0 - point.g(g) for point in chain[:j]])
    return complex(np.exp(_log_products(w, c)[-1]))


def _gamma(full: np.ndarray, model: ModelSpec, J: int) -> tuple[np.ndarray, np.ndarray]:
    u = full[..., : model.n]
    gamma1 = np.stack([u[..., i : i + J, :] for i in range(model.m)], axis=-2)
    return gamma1, full[..., :J, model.n]


def delay_factors(full: np.ndarray, model: ModelSpec) -> np.ndarray:
    """1 - g(mu_j) for every block, shape (..., J)."""
    J = full.shape[-2] - model.tail_count
    gamma1, gamma2 = _gamma(full, model, J)
    return 1.0 - model.eval_g(gamma1, gamma2)


def _check_a2(w: np.ndarray, model: ModelSpec) -> None:
    margin = model.a2_margin(w)
    bad = margin < 0
    if np.any(bad):
        idx = np.unravel_index(int(np.argmin(np.where(bad, margin, np.inf))), margin.shape)
        raise A2ViolationError(int(idx[-1]) + 1, complex(w[idx]), model.l, model.c)


def lifted_field(
    full: np.ndarray, model: ModelSpec, c: Optional[float] = None, check: bool = True
) -> np.ndarray:
    """H(nu) blockwise for unscaled states of shape (..., J + K, N+1); returns (..., J, N+1)."""
    full = np.asarray(full)
    c = model.c if c is None else c
    n = model.n
    J = full.shape[-2] - model.tail_count
    if J < 1:
        raise ConfigError("lift_J", "no blocks left after the tail closure")
    gamma1, gamma2 = _gamma(full, model, J)
    gval = model.eval_g(gamma1, gamma2)
    w = 1.0 - gval
    if check:
        _check_a2(w, model)
    fval = model.eval_f(full[..., :J, :n], full[..., 1 : J + 1, :n])
    F = np.concatenate([fval / w[..., None], (gval / w)[..., None]], axis=-1)
    out = F * np.exp(_log_products(w, c))[..., None]
    if not np.all(np.isfinite(out)):
        raise ModelDefectError("lifted field", "non-finite block")
    return out


def map_F(theta: np.ndarray, j: int, model: ModelSpec, check: bool = True) -> np.ndarray:
    """F_j = (f(u_j, u_{j+1}), g(mu_j)) / (1 - g(mu_j)) for unscaled states ``theta`` (1-based j)."""
    theta = np.asarray(theta)
    n, m = model.n, model.m
    if theta.shape[0] < j + max(1, m - 1):
        raise ConfigError("theta", f"need at least {j + max(1, m - 1)} states for block {j}")
    u = theta[:, :n]
    gval = complex(np.asarray(model.eval_g(u[j - 1 : j - 1 + m], np.asarray(theta[j - 1, n]))))
    w = 1.0 - gval
    if check and model.a2_margin(w) < 0:
        raise A2ViolationError(j, w, model.l, model.c)
    fval = model.eval_f(u[j - 1], u[j])
    return np.append(np.asarray(fval, dtype=complex) / w, gval / w)


def rhs_H(w: LiftedState, model: ModelSpec) -> WeightedSeq:
    """H(Tw), block j = F_j(Tw) G_j(Tw)."""
    if w.closure.count < model.tail_count:
        raise ConfigError("closure", f"need {model.tail_count} tail states, have {w.closure.count}")
    return WeightedSeq(lifted_field(w.full_unscaled(), model, c=w.base_c), w.base_c)


# ---------------------------------------------------------------------------
# Decay
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayProfile:
    """d_j = (j^m / c^j) prod_{i<=j} |1 - g(mu_i)|."""

    m: int
    values: tuple[float, ...]
    log_values: tuple[float, ...]
    peak_index: int
    eventually_decreasing: bool
    max_rate: float
    base_c: float

    @property
    def decays(self) -> bool:
        return self.values[-1] < self.values[0]

    @property
    def ratio(self) -> float:
        return math.exp(self.log_values[-1] - self.log_values[0])

    def geometric_bound(self) -> np.ndarray:
        """(c_hat / c)^j with c_hat the largest sampled |1 - g|; bounds d_j when m = 0."""
        j = np.arange(1, len(self.values) + 1)
        return (self.max_rate / self.base_c) ** j


def decay_profile(w: LiftedState, model: ModelSpec, m: int) -> DecayProfile:
    if m < 0:
        raise ConfigError("decay_m", f"must be >= 0, got {m}")
    factors = np.abs(delay_factors(w.full_unscaled(), model))
    j = np.arange(1, w.J + 1, dtype=float)
    with np.errstate(divide="ignore"):
        logs = m * np.log(j) - j * math.log(w.base_c) + np.cumsum(np.log(factors))
    peak = int(np.argmax(logs))
    tail = np.diff(logs[peak:])
    return DecayProfile(
        m=m,
        values=tuple(float(v) for v in np.exp(logs)),
        log_values=tuple(float(v) for v in logs),
        peak_index=peak + 1,
        eventually_decreasing=bool(np.all(tail < 0)),
        max_rate=float(np.max(factors)),
        base_c=w.base_c,
    )


# ---------------------------------------------------------------------------
# Consistency of the lift with the lifted field
# ---------------------------------------------------------------------------


def lift_derivative(
    traj: Trajectory, t: float, J: int, model: ModelSpec, delta: float
) -> np.ndarray:
    """Centred difference of build_lift in t, shape (J, N+1)."""
    plus = build_lift(traj, t + delta, J, model).seq.blocks
    minus = build_lift(traj, t - delta, J, model).seq.blocks
    return (plus - minus) / (2.0 * delta)


@dataclass(frozen=True)
class LiftConsistency:
    t: float
    deltas: tuple[float, ...]
    errors: tuple[float, ...]
    orders: tuple[float, ...]
    richardson_error: float
    block_errors: tuple[float, ...]

    @property
    def observed_order(self) -> float:
        return min(self.orders) if self.orders else math.nan


def lift_consistency(
    traj: Trajectory,
    t: float,
    J: int,
    model: ModelSpec,
    deltas: Sequence[float] = (0.2, 0.1, 0.05),
) -> LiftConsistency:
    """Compare difference quotients of the lift with rhs_H under step halving.

    The two smallest steps are combined by Richardson extrapolation.
    """
    if len(deltas) < 2:
        raise ConfigError("deltas", "need at least two step sizes")
    exact = rhs_H(build_lift(traj, t, J, model), model).blocks
    diffs = [lift_derivative(traj, t, J, model, d) for d in deltas]
    errors = [float(np.max(np.abs(d - exact))) for d in diffs]
    orders = [
        math.log(errors[k] / errors[k + 1]) / math.log(deltas[k] / deltas[k + 1])
        for k in range(len(errors) - 1)
        if errors[k + 1] > 0 and errors[k] > 0
    ]
    ratio = (deltas[-2] / deltas[-1]) ** 2
    extrapolated = (ratio * diffs[-1] - diffs[-2]) / (ratio - 1.0)
    mismatch = np.abs(extrapolated - exact)
    return LiftConsistency(
        t=float(t),
        deltas=tuple(float(d) for d in deltas),
        errors=tuple(errors),
        orders=tuple(orders),
        richardson_error=float(np.max(mismatch)),
        block_errors=tuple(float(v) for v in np.max(mismatch, axis=1)),
    )


# ---------------------------------------------------------------------------
# Truncated lifted system
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LiftedTrajectory:
    """Per-block time series of the truncated lifted system."""

    t: np.ndarray
    blocks: np.ndarray
    base_c: float
    n: int
    tail: str
    lam: float
    tail_error: float
    dense: Any = field(default=None, repr=False, compare=False)

    @property
    def J(self) -> int:
        return int(self.blocks.shape[1])

    def at(self, t: float | np.ndarray) -> np.ndarray:
        """Blocks at arbitrary times inside the span, shape (..., J, N+1)."""
        ts = np.asarray(t, dtype=float)
        flat = np.asarray(self.dense(np.atleast_1d(ts)))
        out = flat.T.reshape(-1, self.J, self.n + 1)
        return out[0] if ts.ndim == 0 else out

    def block(self, j: int) -> np.ndarray:
        return self.blocks[:, j - 1, :]

    def unscaled(self) -> np.ndarray:
        return self.blocks * weights(self.base_c, self.J)[None, :, None]

    def reference_error(self, traj: Trajectory, model: ModelSpec) -> np.ndarray:
        """sup_t |w_j(t) - build_lift(traj, t)_j| per block."""
        K = model.tail_count
        _, states = lift_states(traj, self.t, self.J + K)
        ref = states[:, : self.J] / weights(self.base_c, self.J)[None, :, None]
        return np.max(np.abs(self.blocks - ref), axis=(0, 2))


def integrate_lifted(
    model: ModelSpec,
    w0: LiftedState,
    t_span: tuple[float, float],
    tol: float,
    closure_traj: Optional[Trajectory] = None,
    *,
    lam: float = 0.0,
    tail: TailPolicy = "trajectory",
    n_out: int = 201,
) -> LiftedTrajectory:
    """Integrate dw/dt = (lam T + I)^{-1} H(Tw) for the J retained blocks.

    With ``tail="trajectory"`` the tail states are read from ``closure_traj`` at
    eta^J(t).. at every evaluation; ``"frozen"`` keeps the tail of ``w0``.
    """
    if not tol > 0:
        raise ConfigError("tol", f"must be positive, got {tol}")
    if tail not in ("trajectory", "frozen"):
        raise ConfigError("tail", f"expected 'trajectory' or 'frozen', got {tail!r}")
    if tail == "trajectory" and closure_traj is None:
        closure_traj = w0.closure.source
        if closure_traj is None:
            raise ConfigError("closure_traj", "a trajectory is required for the trajectory tail")
    if lam < 0:
        raise ConfigError("lambda", f"must be >= 0, got {lam}")
    blocks0 = w0.seq.blocks
    if np.max(np.abs(blocks0.imag)) > 0:
        raise ConfigError("w0", "real-axis integration needs a real lifted state")

    J, width, c = w0.J, model.width, w0.base_c
    K = model.tail_count
    cj = weights(c, J)
    resolvent = 1.0 / (lam * cj + 1.0)
    frozen = np.real(w0.closure.states)

    def tail_states(t: float) -> np.ndarray:
        return frozen if tail == "frozen" else _tail_from(closure_traj, t, J, K)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        blocks = y.reshape(J, width)
        full = np.concatenate([blocks * cj[:, None], tail_states(t)], axis=0)
        margins = model.state_margin(full, use_strip=False)
        if np.min(margins) < -1e-9:
            k = int(np.argmin(margins))
            raise DomainExitError(t, f"block {k + 1}: {model.state_violation(full[k])}")
        h = np.real(lifted_field(full, model, c=c))
        return (h * resolvent[:, None]).ravel()

    atol = np.repeat(tol / cj, width)
    t_eval = np.linspace(t_span[0], t_span[1], n_out)
    sol = solve_ivp(
        rhs,
        t_span,
        np.real(blocks0).ravel(),
        method="DOP853",
        rtol=max(tol, 1e-13),
        atol=atol,
        t_eval=t_eval,
        dense_output=True,
    )
    if sol.status != 0:
        raise NumericalError(f"Lifted integration failed: {sol.message}")
    blocks = sol.y.T.reshape(-1, J, width)

    tail_error = 0.0
    if tail == "frozen" and closure_traj is not None:
        live = np.array([_tail_from(closure_traj, t, J, K) for t in sol.t])
        tail_error = float(np.max(np.abs(live - frozen)) * c ** -(J + 1))
    logger.debug("lifted integration: %d evaluations, tail=%s, lam=%g", sol.nfev, tail, lam)
    return LiftedTrajectory(
        t=sol.t,
        blocks=blocks,
        base_c=c,
        n=model.n,
        tail=tail,
        lam=float(lam),
        tail_error=tail_error,
        dense=sol.sol,
    )


def _tail_from(traj: Trajectory, t: float, J: int, K: int) -> np.ndarray:
    chain = eta_chain(traj, np.array([t]), J + K - 1)[0, J:]
    return traj.eval(chain)


def lifted_frame(lifted: LiftedTrajectory) -> pd.DataFrame:
    """Long table (t, j, y_1..y_N, z, u_1..u_N, v) of a lifted time series."""
    n, J = lifted.n, lifted.J
    scaled = lifted.blocks.reshape(-1, n + 1)
    unscaled = lifted.unscaled().reshape(-1, n + 1)
    frame = pd.DataFrame(
        {
            "t": np.repeat(lifted.t, J),
            "j": np.tile(np.arange(1, J + 1), lifted.t.size),
        }
    )
    for k in range(n):
        frame[f"y{k + 1}"] = scaled[:, k]
    frame["z"] = scaled[:, n]
    for k in range(n):
        frame[f"u{k + 1}"] = unscaled[:, k]
    frame["v"] = unscaled[:, n]
    return frame
