"""The lambda-perturbed Picard scheme on a complex disk around t0.

For lambda in (0, 1 - 1/c) the map

    L(nu, lambda)(t) = ((1 - lambda) I - T^{-1}) nu(t) + (T^{-1} + lambda I) nu(t0)
                       + int_{t0}^{t} H(nu(s)) ds

contracts with factor kappa = 1 - lambda + l0 h on a disk of radius h < lambda / l0.
Its fixed point solves (lambda I + T^{-1}) nu' = H(nu); as lambda -> 0 the scaled
fixed points T^{-1} nu_lambda approach the complex extension of the lifted orbit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from sdde_analytic.complexext.orbit import ComplexOrbit, RayQuadrature
from sdde_analytic.delaycore.model import ModelSpec
from sdde_analytic.lift import LiftedState, delay_factors, lifted_field
from sdde_analytic.seqspace import weights
from sdde_analytic.utils.errors import (
    A2ViolationError,
    ConfigError,
    ContractionError,
    DegenerateDiskError,
    DomainExitError,
)

logger = logging.getLogger("sdde.complexext")

LIPSCHITZ_SAFETY = 1.5
DISK_SAFETY = 0.8
RATIO_SLACK = 0.05
NON_CONTRACTIVE_NOTE = (
    "at lambda = 0 the linear part I - T^{-1} has norm 1, so the unperturbed map is not a contraction"
)


@dataclass(frozen=True)
class ContractionConfig:
    lam: float
    h: float
    lipschitz_l0: float
    delta: float = 0.05
    max_iter: int = 20_000
    fp_tol: float = 1e-10

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ConfigError("lambda", f"must be > 0 ({NON_CONTRACTIVE_NOTE}), got {self.lam}")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ConfigError("h", f"must be a finite positive radius, got {self.h}")
        if not self.lipschitz_l0 >= 0:
            raise ConfigError("lipschitz_l0", f"must be >= 0, got {self.lipschitz_l0}")
        if not self.delta > 0:
            raise ConfigError("delta", f"must be positive, got {self.delta}")
        if self.max_iter < 1:
            raise ConfigError("max_iter", f"must be >= 1, got {self.max_iter}")
        if not self.fp_tol > 0:
            raise ConfigError("fp_tol", f"must be positive, got {self.fp_tol}")

    @property
    def kappa(self) -> float:
        return 1.0 - self.lam + self.lipschitz_l0 * self.h

    def validate(self, c: float) -> None:
        upper = 1.0 - 1.0 / c
        if not self.lam < upper:
            raise ConfigError("lambda", f"must lie in (0, {upper:.6g}) for c = {c:.6g}, got {self.lam}")
        if not self.kappa < 1.0:
            raise ConfigError(
                "h",
                f"contraction factor 1 - lambda + l0 h = {self.kappa:.6g} is not < 1; "
                f"need h < lambda / l0 = {self.lam / self.lipschitz_l0:.6g}",
            )

    @classmethod
    def for_lambda(
        cls, lam: float, lipschitz_l0: float, h0: float, *, safety: float = DISK_SAFETY, **kwargs: float
    ) -> "ContractionConfig":
        """Config on the disk h = min(h0, safety * lambda / l0)."""
        h = h0 if lipschitz_l0 == 0 else min(h0, safety * lam / lipschitz_l0)
        return cls(lam=lam, h=h, lipschitz_l0=lipschitz_l0, **kwargs)


@dataclass(frozen=True)
class ConvergenceRecord:
    lam: float
    h: float
    kappa: float
    lipschitz_l0: float
    iterations: int
    distances: tuple[float, ...]
    measured_ratio: float
    converged: bool
    neighbourhood: float
    delta: float

    @property
    def within_delta(self) -> bool:
        return self.neighbourhood <= self.delta

    @property
    def ratio_within_bound(self) -> bool:
        return self.measured_ratio <= self.kappa + RATIO_SLACK


# ---------------------------------------------------------------------------
# Sampling helpers
# ---------------------------------------------------------------------------


def _unit_disk(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform samples from the complex unit disk."""
    return np.sqrt(rng.uniform(size=shape)) * np.exp(2j * np.pi * rng.uniform(size=shape))


def _raise_on_exit(model: ModelSpec, states: np.ndarray, label: str) -> None:
    margins = model.state_margin(states, use_strip=True)
    if np.min(margins) < -1e-12:
        idx = np.unravel_index(int(np.argmin(margins)), margins.shape)
        constraint = model.state_violation(states[idx]) or "strip"
        where = f"{label} {tuple(int(i) for i in idx[:-1])}"
        raise DomainExitError(where, f"block {int(idx[-1]) + 1}: {constraint}")


def _perturb_blocks(base: np.ndarray, J: int, delta: np.ndarray) -> np.ndarray:
    out = np.broadcast_to(base, delta.shape[:1] + base.shape).copy()
    out[:, :J] += delta
    return out


# ---------------------------------------------------------------------------
# Lipschitz constant and disk radius
# ---------------------------------------------------------------------------


def estimate_lipschitz(
    model: ModelSpec,
    anchor: LiftedState,
    delta: float,
    n_samples: int = 64,
    seed: int = 0,
    safety: float = LIPSCHITZ_SAFETY,
) -> float:
    """Sampled Lipschitz constant of H on the delta-ball around ``anchor``, times ``safety``.

    Half of the pairs are independent points of the ball, the other half are
    close pairs that probe the local derivative.
    """
    if not delta > 0:
        raise ConfigError("delta", f"must be positive, got {delta}")
    if n_samples < 2:
        raise ConfigError("lipschitz_samples", f"must be >= 2, got {n_samples}")
    rng = np.random.default_rng(seed)
    base = anchor.full_unscaled()
    J, width = anchor.J, base.shape[1]
    shape = (n_samples, J, width)

    d1 = delta * _unit_disk(rng, shape)
    far = delta * _unit_disk(rng, shape)
    near = (1.0 - 1e-3) * d1 + 1e-3 * delta * _unit_disk(rng, shape)
    half = n_samples // 2
    d2 = np.concatenate([far[:half], near[half:]], axis=0)

    p1 = _perturb_blocks(base, J, d1)
    p2 = _perturb_blocks(base, J, d2)
    _raise_on_exit(model, p1, "lipschitz sample")
    _raise_on_exit(model, p2, "lipschitz sample")

    h1 = lifted_field(p1, model, c=anchor.base_c)
    h2 = lifted_field(p2, model, c=anchor.base_c)
    num = np.max(np.abs(h1 - h2), axis=(1, 2))
    den = np.max(np.abs(d1 - d2), axis=(1, 2))
    ratios = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    l0 = safety * float(np.max(ratios))
    logger.debug("Lipschitz estimate for %s: %.6g (delta=%g, samples=%d)", model.name, l0, delta, n_samples)
    return l0


def estimate_disk_radius(
    model: ModelSpec, orbit_norm_bound: float, boundary_gap_r: float, h_max: float = 1.0
) -> float:
    """h0 = r / M~, capped at ``h_max`` (also returned when H vanishes)."""
    if not boundary_gap_r > 0:
        raise DegenerateDiskError(boundary_gap_r)
    if orbit_norm_bound <= 0:
        logger.debug("H vanishes on the admissible set of %s; using h_max", model.name)
        return float(h_max)
    return float(min(boundary_gap_r / orbit_norm_bound, h_max))


@dataclass(frozen=True)
class DiskRadiusReport:
    h0: float
    boundary_gap_r: float
    orbit_norm_bound: float
    q_margin: float
    h_max: float
    capped: bool
    sensitivity: tuple[tuple[float, float], ...]
    n_samples: int
    seed: int


def _gap_and_bound(
    model: ModelSpec, w_t0: LiftedState, margin: float, n_samples: int, seed: int
) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    base = w_t0.full_unscaled()
    J, width = w_t0.J, base.shape[1]
    shape = (n_samples, J, width)

    raw = _unit_disk(rng, shape)
    on_sphere = raw / np.max(np.abs(raw), axis=(1, 2), keepdims=True)
    inv = 1.0 / weights(w_t0.base_c, J)[None, :, None]
    gap = margin * float(np.min(np.max(np.abs(on_sphere) * inv, axis=(1, 2))))

    inside = margin * _unit_disk(rng, shape)
    points = np.concatenate(
        [base[None], _perturb_blocks(base, J, margin * on_sphere), _perturb_blocks(base, J, inside)]
    )
    field_values = lifted_field(points, model, c=w_t0.base_c, check=False)
    bound = float(np.max(np.abs(field_values)))
    return gap, bound


def disk_radius_report(
    model: ModelSpec,
    w_t0: LiftedState,
    q_margin: float = 0.05,
    n_samples: int = 256,
    seed: int = 0,
    h_max: float = 1.0,
    factors: Sequence[float] = (0.5, 1.0, 2.0),
) -> DiskRadiusReport:
    """h0 = r / M~ with the admissible set taken as the q_margin-ball around nu(t0).

    r is the smallest sampled ||T^{-1}(nu - nu(t0))|| over boundary states and M~
    the largest sampled ||H||. The radius is recomputed for every margin factor.
    """
    if not q_margin > 0:
        raise ConfigError("q_margin", f"must be positive, got {q_margin}")
    results = {}
    for factor in sorted(set(factors) | {1.0}):
        gap, bound = _gap_and_bound(model, w_t0, factor * q_margin, n_samples, seed)
        results[factor] = (gap, bound, estimate_disk_radius(model, bound, gap, h_max))
    gap, bound, h0 = results[1.0]
    return DiskRadiusReport(
        h0=h0,
        boundary_gap_r=gap,
        orbit_norm_bound=bound,
        q_margin=q_margin,
        h_max=h_max,
        capped=h0 >= h_max,
        sensitivity=tuple((f * q_margin, results[f][2]) for f in sorted(results)),
        n_samples=n_samples,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Picard iteration
# ---------------------------------------------------------------------------


def picard_apply(
    orbit: ComplexOrbit, cfg: ContractionConfig, model: ModelSpec, w_t0: LiftedState
) -> tuple[ComplexOrbit, float]:
    """One sweep of L(., lambda); returns the new orbit and the sup-norm update."""
    c = orbit.base_c
    cfg.validate(c)
    full = orbit.full()
    _raise_on_exit(model, full, "orbit node")

    factors = delay_factors(full, model)
    margin = model.a2_margin(factors)
    if np.min(margin) < 0:
        r, k, j = np.unravel_index(int(np.argmin(margin)), margin.shape)
        raise A2ViolationError((int(r), int(k), int(j) + 1), complex(factors[r, k, j]), model.l, model.c)
    field_values = lifted_field(full, model, c=c, check=False)

    inv = 1.0 / weights(c, orbit.J)
    nu0 = w_t0.unscaled()
    linear = ((1.0 - cfg.lam) - inv)[:, None] * orbit.values + (inv + cfg.lam)[:, None] * nu0
    direction = orbit.radius_h * np.exp(1j * orbit.angles)
    integral = direction[:, None, None, None] * orbit.quad.integrate(field_values, axis=1)
    updated = orbit.with_values(linear + integral, lam=cfg.lam)
    return updated, updated.distance(orbit)


def _measured_ratio(distances: Sequence[float], fp_tol: float) -> float:
    d = np.asarray(distances)
    if d.size < 2:
        return 0.0
    ratios = d[1:] / np.where(d[:-1] > 0, d[:-1], 1.0)
    above_noise = d[1:] > 100.0 * fp_tol
    picked = ratios[above_noise] if np.any(above_noise) else ratios
    return float(np.max(picked))


def solve_fixed_point(
    cfg: ContractionConfig,
    model: ModelSpec,
    w_t0: LiftedState,
    *,
    quad: Optional[RayQuadrature] = None,
    n_rays: int = 16,
    initial: Optional[ComplexOrbit] = None,
) -> tuple[ComplexOrbit, ConvergenceRecord]:
    """Iterate picard_apply from ``initial`` (default: the constant orbit nu(t0))."""
    cfg.validate(w_t0.base_c)
    if initial is None:
        orbit = ComplexOrbit.constant(
            w_t0.t, cfg.h, n_rays, quad or RayQuadrature(), w_t0.full_unscaled(), w_t0.J, w_t0.base_c
        )
    else:
        if not math.isclose(initial.radius_h, cfg.h, rel_tol=1e-12):
            raise ConfigError("h", f"initial orbit radius {initial.radius_h} differs from {cfg.h}")
        orbit = initial

    distances: list[float] = []
    converged = False
    for sweep in range(1, cfg.max_iter + 1):
        orbit, dist = picard_apply(orbit, cfg, model, w_t0)
        distances.append(dist)
        logger.debug("lambda=%g sweep %d: distance %.3e", cfg.lam, sweep, dist)
        if dist < cfg.fp_tol:
            converged = True
            break

    record = ConvergenceRecord(
        lam=cfg.lam,
        h=cfg.h,
        kappa=cfg.kappa,
        lipschitz_l0=cfg.lipschitz_l0,
        iterations=len(distances),
        distances=tuple(distances),
        measured_ratio=_measured_ratio(distances, cfg.fp_tol),
        converged=converged,
        neighbourhood=orbit.neighbourhood(),
        delta=cfg.delta,
    )
    if not converged:
        raise ContractionError(
            f"Picard iteration for lambda = {cfg.lam:g} did not reach fp_tol = {cfg.fp_tol:g}",
            record.measured_ratio,
            record.iterations,
            record,
        )
    logger.info(
        "lambda=%g converged in %d sweeps (ratio %.4f, kappa %.4f)",
        cfg.lam,
        record.iterations,
        record.measured_ratio,
        record.kappa,
    )
    return orbit.with_values(orbit.values, converged=True), record


# ---------------------------------------------------------------------------
# Continuation in lambda
# ---------------------------------------------------------------------------


def default_lambdas(c: float, n_stages: int, lambda0: Optional[float] = None) -> list[float]:
    """lambda_n = lambda0 2^{-n}, lambda0 defaulting to (1 - 1/c) / 2."""
    if n_stages < 1:
        raise ConfigError("n_stages", f"must be >= 1, got {n_stages}")
    start = (1.0 - 1.0 / c) / 2.0 if lambda0 is None else lambda0
    return [start * 2.0**-n for n in range(n_stages)]


@dataclass(frozen=True)
class ContinuationResult:
    lambdas: tuple[float, ...]
    h: float
    records: tuple[ConvergenceRecord, ...]
    drifts: tuple[float, ...]
    final: ComplexOrbit
    extrapolated: ComplexOrbit
    stopped_early: bool
    note: str = (
        "the lambda -> 0 limit is extrapolated from the whole family; convergence is only "
        "guaranteed along subsequences"
    )

    @property
    def drift_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.drifts, self.drifts[1:]))


def lambda_continuation(
    model: ModelSpec,
    w_t0: LiftedState,
    lambdas: Sequence[float],
    template: ContractionConfig,
    *,
    quad: Optional[RayQuadrature] = None,
    n_rays: int = 16,
    stop_tol: float = 0.0,
) -> ContinuationResult:
    """Solve the fixed point for a decreasing lambda schedule and extrapolate to lambda = 0.

    All stages share the disk h = min(template.h, 0.8 lambda_min / l0) so each
    stage warm-starts from the previous one. Extrapolation is two-point
    Richardson in lambda.
    """
    lams = [float(v) for v in lambdas]
    if not lams:
        raise ConfigError("lambdas", "schedule is empty")
    if any(b >= a for a, b in zip(lams, lams[1:])):
        raise ConfigError("lambdas", "schedule must be strictly decreasing")
    l0 = template.lipschitz_l0
    h = template.h if l0 == 0 else min(template.h, DISK_SAFETY * lams[-1] / l0)
    quad = quad or RayQuadrature()

    orbit: Optional[ComplexOrbit] = None
    scaled: list[np.ndarray] = []
    records: list[ConvergenceRecord] = []
    drifts: list[float] = []
    used: list[float] = []
    stopped = False
    for lam in lams:
        cfg = ContractionConfig(
            lam=lam,
            h=h,
            lipschitz_l0=l0,
            delta=template.delta,
            max_iter=template.max_iter,
            fp_tol=template.fp_tol,
        )
        orbit, record = solve_fixed_point(cfg, model, w_t0, quad=quad, n_rays=n_rays, initial=orbit)
        used.append(lam)
        records.append(record)
        scaled.append(orbit.scaled())
        if len(scaled) > 1:
            drifts.append(float(np.max(np.abs(scaled[-1] - scaled[-2]))))
            logger.info("lambda=%g drift %.3e", lam, drifts[-1])
            if drifts[-1] < stop_tol:
                stopped = True
                break

    assert orbit is not None
    if len(scaled) > 1:
        la, lb = used[-2], used[-1]
        limit = (la * scaled[-1] - lb * scaled[-2]) / (la - lb)
    else:
        limit = scaled[-1]
    unscaled = limit * weights(w_t0.base_c, w_t0.J)[:, None]
    extrapolated = orbit.with_values(unscaled, lam=0.0, extrapolated=True)
    return ContinuationResult(
        lambdas=tuple(used),
        h=h,
        records=tuple(records),
        drifts=tuple(drifts),
        final=orbit,
        extrapolated=extrapolated,
        stopped_early=stopped,
    )
