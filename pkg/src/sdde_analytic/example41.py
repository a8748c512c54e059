"""The adaptive-delay neural pair and its end-to-end analyticity pipeline.

    x1' = -mu x1 + sigma b(x2(t - tau))
    x2' = -mu x2 + sigma b(x1(t - tau))
    tau' = 1 - h(x) (1 + tanh tau)

with b(y) = -tanh y and a rational bump h squeezed into ((h0 + h1)/2, h1).
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
import yaml

from sdde_analytic.assumptions import A2Report, AlphaReport, check_A2, check_alpha
from sdde_analytic.complexext import (
    ContinuationResult,
    ContractionConfig,
    DiskRadiusReport,
    RayQuadrature,
    TaylorReport,
    default_lambdas,
    disk_radius_report,
    estimate_lipschitz,
    lambda_continuation,
    taylor_coefficients,
)
from sdde_analytic.config import RunConfig
from sdde_analytic.delaycore import (
    Box,
    HistoryFunction,
    ModelSpec,
    MonotoneDelayReport,
    Trajectory,
    check_monotone_delay,
    integrate_dde,
)
from sdde_analytic.lift import DecayProfile, build_lift, decay_profile
from sdde_analytic.utils.errors import A2ViolationError, ConfigError, StageFailure

logger = logging.getLogger("sdde.example41")

MODEL_NAME = "example41"
L_CONST = 0.5
C_CONST = math.e
CONTAINMENT_NOTE = (
    "containment is reported empirically for a long bounded orbit; the range-box bound is "
    "only established for periodic solutions, so a PASS is consistent with it, not implied by it"
)

Scalar = Callable[[np.ndarray], np.ndarray]


def default_b(y: np.ndarray) -> np.ndarray:
    return -np.tanh(y)


def bump_h(h0: float, h1: float) -> Scalar:
    """h(x) = (h0+h1)/2 + (h1-h0)/2 * r^2 / (1 + r^2), r^2 = x1^2 + x2^2; x has shape (..., 2)."""
    mid, half = (h0 + h1) / 2.0, (h1 - h0) / 2.0

    def h(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        r2 = x[..., 0] ** 2 + x[..., 1] ** 2
        return mid + half * r2 / (1.0 + r2)

    return h


@dataclass(frozen=True)
class NeuralModelParams:
    mu: float = 1.0
    sigma: float = 2.0
    h0: float = 0.6
    h1: float = 0.8
    M_sigma: Optional[float] = None
    epsilon_strip: float = 0.1

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise ConfigError("mu", f"must be positive, got {self.mu}")
        if not (0 < self.epsilon_strip < math.pi / 2):
            raise ConfigError("epsilon_strip", f"must lie in (0, pi/2), got {self.epsilon_strip}")
        if self.M_sigma is None:
            object.__setattr__(self, "M_sigma", 1.0 + 2.0 * abs(self.sigma) / self.mu)
        elif not self.M_sigma > 0:
            raise ConfigError("M_sigma", f"must be positive, got {self.M_sigma}")

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> "NeuralModelParams":
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown parameter in example parameter file")
        try:
            values = {k: None if v is None else float(v) for k, v in data.items()}
        except (TypeError, ValueError) as exc:
            raise ConfigError("params", f"parameters must be numbers: {exc}") from exc
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def load_params(path: Path) -> NeuralModelParams:
    if not path.exists():
        raise ConfigError("params_file", f"parameter file not found: {path}")
    data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise ConfigError("params_file", f"{path} must hold a mapping of parameters")
    return NeuralModelParams.from_mapping(data)


def save_params(params: NeuralModelParams, path: Path) -> Path:
    path.write_text(yaml.safe_dump(params.to_dict(), sort_keys=True), encoding="utf-8")
    return path


def tau_upper(h0: float) -> float:
    """The unique tau with h0 (1 + tanh tau) = 1."""
    if not 0.5 < h0 < 1.0:
        raise ConfigError("h0", f"must lie in (1/2, 1) for a positive delay bound, got {h0}")
    return -math.log(2.0 * h0 - 1.0) / 2.0


@dataclass(frozen=True)
class RangeBox:
    x_bounds: tuple[float, float]
    tau_bounds: tuple[float, float]

    @classmethod
    def from_params(cls, params: NeuralModelParams) -> "RangeBox":
        m = float(params.M_sigma)
        return cls((-m, m), (0.0, tau_upper(params.h0)))

    def lower(self) -> np.ndarray:
        return np.array([self.x_bounds[0], self.x_bounds[0], self.tau_bounds[0]])

    def upper(self) -> np.ndarray:
        return np.array([self.x_bounds[1], self.x_bounds[1], self.tau_bounds[1]])

    def distance(self, states: np.ndarray) -> np.ndarray:
        """Signed distance to the boundary; negative outside."""
        states = np.asarray(states, dtype=float)
        return np.min(np.minimum(states - self.lower(), self.upper() - states), axis=-1)


def build_neural_model(
    params: NeuralModelParams, b: Scalar = default_b, h: Optional[Scalar] = None
) -> ModelSpec:
    """ModelSpec of the neural pair on the range box, with (l, c) = (1/2, e)."""
    if not 0.5 < params.h0 < params.h1 < 1.0:
        raise ConfigError("h0", f"need 1/2 < h0 < h1 < 1, got h0 = {params.h0}, h1 = {params.h1}")
    h = h or bump_h(params.h0, params.h1)
    box = RangeBox.from_params(params)
    mu, sigma = params.mu, params.sigma

    def f(theta1: np.ndarray, theta2: np.ndarray) -> np.ndarray:
        return -mu * theta1 + sigma * b(theta2[..., ::-1])

    def g(gamma1: np.ndarray, gamma2: np.ndarray) -> np.ndarray:
        return 1.0 - h(gamma1[..., 0, :]) * (1.0 + np.tanh(gamma2))

    eps = params.epsilon_strip
    return ModelSpec(
        name=MODEL_NAME,
        n=2,
        m=1,
        f=f,
        g=g,
        u_box=Box((box.x_bounds[0],) * 2, (box.x_bounds[1],) * 2, strip=eps, names=("x1", "x2")),
        v_box=Box((box.tau_bounds[0],), (box.tau_bounds[1],), strip=eps, names=("tau",)),
        l=L_CONST,
        c=C_CONST,
        description="adaptive-delay neural pair",
        params=params.to_dict(),
    )


def default_history(params: NeuralModelParams) -> HistoryFunction:
    tau0 = min(0.4, tau_upper(params.h0) / 2.0)
    return HistoryFunction.constant((0.5, -0.3), tau0)


@dataclass(frozen=True)
class ContainmentReport:
    min_distance: float
    passed: bool
    violation_times: tuple[float, ...]
    n_samples: int
    window: tuple[float, float]
    note: str = CONTAINMENT_NOTE

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


def verify_range_box(
    traj: Trajectory, box: RangeBox, start: Optional[float] = None, n_samples: int = 2001
) -> ContainmentReport:
    """Min distance of the orbit to the box boundary over [start, t_end]."""
    t0 = traj.t0 if start is None else max(start, traj.t0)
    ts = np.linspace(t0, traj.t_max, n_samples)
    dist = box.distance(traj.eval(ts))
    outside = ts[dist < 0]
    return ContainmentReport(
        min_distance=float(np.min(dist)),
        passed=bool(outside.size == 0),
        violation_times=tuple(float(t) for t in outside[:20]),
        n_samples=n_samples,
        window=(float(t0), traj.t_max),
    )


@dataclass(frozen=True)
class InequalityChain:
    """Ranges of the quantities in 1 <= 1+tanh tau <= 1/h0, (h0+h1)/2 <= h < h1, l < 1-g < c."""

    tanh_range: tuple[float, float]
    tanh_bounds: tuple[float, float]
    h_range: tuple[float, float]
    h_bounds: tuple[float, float]
    rate_range: tuple[float, float]
    rate_bounds: tuple[float, float]
    n_samples: int

    @property
    def passed(self) -> bool:
        lo, hi = self.tanh_bounds
        tol = 1e-12
        return (
            lo - tol <= self.tanh_range[0]
            and self.tanh_range[1] <= hi + tol
            and self.h_bounds[0] - tol <= self.h_range[0]
            and self.h_range[1] < self.h_bounds[1]
            and self.rate_bounds[0] < self.rate_range[0]
            and self.rate_range[1] < self.rate_bounds[1]
        )

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


def orbit_inequalities(
    traj: Trajectory,
    params: NeuralModelParams,
    model: ModelSpec,
    start: Optional[float] = None,
    n_samples: int = 4001,
) -> InequalityChain:
    """Sample the inequality chain of the delay bound pointwise along the orbit."""
    t0 = traj.t0 if start is None else max(start, traj.t0)
    ts = np.linspace(t0, traj.t_max, n_samples)
    states = traj.eval(ts)
    x, tau = states[:, :2], states[:, 2]
    one_plus = 1.0 + np.tanh(tau)
    hx = bump_h(params.h0, params.h1)(x)
    rate = hx * one_plus
    return InequalityChain(
        tanh_range=(float(one_plus.min()), float(one_plus.max())),
        tanh_bounds=(1.0, 1.0 / params.h0),
        h_range=(float(hx.min()), float(hx.max())),
        h_bounds=((params.h0 + params.h1) / 2.0, params.h1),
        rate_range=(float(rate.min()), float(rate.max())),
        rate_bounds=(model.l, model.c),
        n_samples=n_samples,
    )


@dataclass
class PipelineResult:
    """Everything the pipeline produced, in stage order; missing stages stay None."""

    params: NeuralModelParams
    alpha: Optional[AlphaReport] = None
    a2: Optional[A2Report] = None
    trajectory: Optional[Trajectory] = None
    monotone: Optional[MonotoneDelayReport] = None
    containment: Optional[ContainmentReport] = None
    inequalities: Optional[InequalityChain] = None
    decay: Optional[DecayProfile] = None
    disk: Optional[DiskRadiusReport] = None
    lipschitz_l0: Optional[float] = None
    continuation: Optional[ContinuationResult] = None
    taylor: Optional[TaylorReport] = None
    stages: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        checks = [
            self.alpha and self.alpha.passed,
            self.a2 and self.a2.passed,
            self.monotone and self.monotone.passed,
            self.containment and self.containment.passed,
            self.inequalities and self.inequalities.passed,
            self.taylor and self.taylor.radius > 0,
        ]
        return all(bool(c) for c in checks)

    def partial(self) -> dict[str, Any]:
        return {"stages": list(self.stages)}


def _stage(result: PipelineResult, name: str, fn: Callable[[], Any]) -> Any:
    logger.info("example41: %s", name)
    try:
        value = fn()
    except StageFailure:
        raise
    except Exception as exc:
        raise StageFailure(name, exc, result.partial()) from exc
    result.stages.append(name)
    return value


def run_full_pipeline(
    params: NeuralModelParams,
    config: Optional[RunConfig] = None,
    *,
    b: Scalar = default_b,
    on_stage: Optional[Callable[[str, PipelineResult], None]] = None,
) -> PipelineResult:
    """check_alpha -> check_A2 -> integrate -> containment -> lift -> continuation -> Taylor.

    The first hard failure is raised as StageFailure carrying the stage label.
    """
    config = config or RunConfig(subcommand="example41", model=MODEL_NAME)
    result = PipelineResult(params=params)
    h = bump_h(params.h0, params.h1) if 0.5 < params.h0 < params.h1 < 1.0 else None

    def notify(name: str) -> None:
        if on_stage is not None:
            on_stage(name, result)

    def alpha() -> AlphaReport:
        report = check_alpha(params, b, h or bump_h(params.h0, params.h1))
        report.raise_for_failure()
        return report

    result.alpha = _stage(result, "check_alpha", alpha)
    notify("check_alpha")
    model = _stage(result, "build_model", lambda: build_neural_model(params, b, h))

    def a2() -> A2Report:
        report = check_A2(
            model,
            config.grid_density,
            config.include_strip,
            seed=config.seed,
            workers=config.workers,
        )
        if not report.passed:
            raise A2ViolationError(report.worst_point, complex(*report.worst_value), model.l, model.c)
        return report

    result.a2 = _stage(result, "check_A2", a2)
    notify("check_A2")

    t_end = config.t_end or 200.0
    history = default_history(params)
    result.trajectory = _stage(
        result, "integrate_dde", lambda: integrate_dde(model, history, t_end, config.tol)
    )
    notify("integrate_dde")
    traj = result.trajectory
    box = RangeBox.from_params(params)
    start = min(config.transient, t_end / 2.0)
    result.monotone = _stage(result, "check_monotone_delay", lambda: check_monotone_delay(traj, model))
    result.containment = _stage(result, "verify_range_box", lambda: verify_range_box(traj, box, start))
    result.inequalities = _stage(
        result, "inequalities", lambda: orbit_inequalities(traj, params, model, start)
    )
    notify("verify_range_box")

    anchor = config.anchor_t if config.anchor_t is not None else min(15.0, t_end)
    lifted = _stage(result, "build_lift", lambda: build_lift(traj, anchor, config.lift_J, model))
    result.decay = _stage(result, "decay_profile", lambda: decay_profile(lifted, model, config.decay_m))
    notify("decay_profile")

    def continuation() -> ContinuationResult:
        l0 = estimate_lipschitz(model, lifted, config.delta, config.lipschitz_samples, config.seed)
        result.lipschitz_l0 = l0
        disk = disk_radius_report(
            model, lifted, config.q_margin, seed=config.seed, h_max=config.h_max
        )
        result.disk = disk
        lams = default_lambdas(model.c, config.n_stages, config.lambda0)
        template = ContractionConfig.for_lambda(
            lams[0], l0, disk.h0, delta=config.delta, max_iter=config.max_iter, fp_tol=config.fp_tol
        )
        return lambda_continuation(
            model,
            lifted,
            lams,
            template,
            quad=RayQuadrature(config.n_panels, config.n_nodes),
            n_rays=config.n_rays,
        )

    result.continuation = _stage(result, "lambda_continuation", continuation)
    notify("lambda_continuation")
    orbit = result.continuation.extrapolated
    result.taylor = _stage(
        result,
        "taylor_coefficients",
        lambda: taylor_coefficients(orbit, config.n_coeffs, block=1, fp_tol=config.fp_tol),
    )
    notify("taylor_coefficients")
    return result
