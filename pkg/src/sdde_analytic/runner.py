"""Stage registry and the ``run(config)`` entry point behind the CLI."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
import pandas as pd

from sdde_analytic import artifacts
from sdde_analytic.assumptions import check_A2, check_alpha, search_lc
from sdde_analytic.complexext import (
    ContinuationResult,
    ContractionConfig,
    RayQuadrature,
    TaylorReport,
    default_lambdas,
    disk_radius_report,
    estimate_lipschitz,
    lambda_continuation,
    real_slice_error,
    taylor_coefficients,
)
from sdde_analytic.config import EFFECTIVE_CONFIG_NAME, RunConfig, write_kv_file
from sdde_analytic.delaycore import (
    Trajectory,
    check_monotone_delay,
    integrate_dde,
    residual,
    save_trajectory,
    trajectory_frame,
)
from sdde_analytic.lift import (
    LiftedState,
    build_lift,
    decay_profile,
    integrate_lifted,
    lift_consistency,
    lifted_frame,
)
from sdde_analytic.models import ModelSetup, get_model
from sdde_analytic.seqspace import operator_norm_table
from sdde_analytic.settings import settings
from sdde_analytic.utils.errors import (
    EXIT_FAIL,
    EXIT_PASS,
    A2ViolationError,
    ConfigError,
    error_record,
    exit_code_for,
)

logger = logging.getLogger("sdde.runner")


@dataclass
class RunContext:
    config: RunConfig
    out_dir: Path
    setup: Optional[ModelSetup] = None
    trajectory: Optional[Trajectory] = None
    written: list[Path] = field(default_factory=list)
    stages: list[str] = field(default_factory=list)
    verdicts: dict[str, bool] = field(default_factory=dict)
    summary: dict[str, Any] = field(default_factory=dict)

    @property
    def model_setup(self) -> ModelSetup:
        if self.setup is None:
            self.setup = get_model(self.config.model, self.config.params_file)
        return self.setup

    @property
    def t_end(self) -> float:
        return self.config.t_end or self.model_setup.t_end

    @property
    def anchor(self) -> float:
        anchor = self.config.anchor_t if self.config.anchor_t is not None else self.model_setup.anchor_t
        return min(anchor, self.t_end)

    def wants(self, fmt: str) -> bool:
        return fmt in self.config.formats

    def report(self, name: str, stage: str, keys: tuple[str, ...], body: Any) -> None:
        """Write ``<name>.json`` with the config block it depends on."""
        cfg = self.config.to_dict()
        block = {k: cfg[k] for k in ("model", "seed", *keys)}
        if self.wants("json"):
            envelope = artifacts.report_envelope(stage, block, body, self.config.seed)
            self.written.append(artifacts.write_json(self.out_dir / f"{name}.json", envelope))

    def table(self, name: str, frame: pd.DataFrame) -> None:
        if self.wants("csv"):
            self.written.append(artifacts.write_csv(self.out_dir / f"{name}.csv", frame))

    def verdict(self, name: str, passed: bool) -> None:
        self.verdicts[name] = bool(passed)
        self.summary[name] = "PASS" if passed else "FAIL"


@dataclass
class RunResult:
    exit_code: int
    status: str
    out_dir: Path
    stages: list[str]
    verdicts: dict[str, bool]
    summary: dict[str, Any]
    error: Optional[dict[str, Any]] = None


StageFn = Callable[[RunContext], None]


# ---------------------------------------------------------------------------
# Shared steps
# ---------------------------------------------------------------------------


def _integrate(ctx: RunContext) -> Trajectory:
    if ctx.trajectory is None:
        setup = ctx.model_setup
        ctx.trajectory = integrate_dde(setup.model, setup.history, ctx.t_end, ctx.config.tol)
        ctx.stages.append("integrate_dde")
    return ctx.trajectory


def _lift_at_anchor(ctx: RunContext) -> LiftedState:
    traj = _integrate(ctx)
    w = build_lift(traj, ctx.anchor, ctx.config.lift_J, ctx.model_setup.model)
    ctx.stages.append("build_lift")
    return w


def _gate_a2(ctx: RunContext) -> None:
    cfg, model = ctx.config, ctx.model_setup.model
    report = check_A2(model, cfg.grid_density, cfg.include_strip, seed=cfg.seed, workers=cfg.workers)
    ctx.stages.append("check_A2")
    ctx.report("a2", "check_A2", ("grid_density", "include_strip"), report)
    ctx.verdict("A2", report.passed)
    if not report.passed:
        raise A2ViolationError(report.worst_point, complex(*report.worst_value), model.l, model.c)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_simulate(ctx: RunContext) -> None:
    traj = _integrate(ctx)
    model = ctx.model_setup.model
    monotone = check_monotone_delay(traj, model)
    ts = np.linspace(traj.t0, traj.t_max, 257)
    res = residual(traj, model, ts)
    body = {
        "t0": traj.t0,
        "t_end": traj.t_max,
        "n_steps": traj.meta.get("n_steps"),
        "n_rhs": traj.meta.get("n_rhs"),
        "breakpoints": list(traj.breakpoints),
        "final_state": traj.eval(traj.t_max),
        "max_residual": float(np.max(res)),
        "monotone_delay": monotone,
        "history": traj.history.label,
    }
    ctx.report("simulate", "integrate_dde", ("tol", "t_end"), body)
    if ctx.wants("json"):
        ctx.written.append(save_trajectory(traj, ctx.out_dir / "trajectory_data.json"))
    ctx.table("trajectory", trajectory_frame(traj))
    ctx.verdict("monotone_delay", monotone.passed)
    ctx.summary["max_residual"] = float(np.max(res))


def stage_lift(ctx: RunContext) -> None:
    cfg, model = ctx.config, ctx.model_setup.model
    traj = _integrate(ctx)
    w = _lift_at_anchor(ctx)
    profile = decay_profile(w, model, cfg.decay_m)
    ctx.stages.append("decay_profile")

    t0 = traj.t0
    hi = min(t0 + 2.0, traj.t_max - 0.25)
    checks = []
    if hi > t0 + 0.25:
        checks = [lift_consistency(traj, t, cfg.lift_J, model) for t in np.linspace(t0 + 0.25, hi, 5)]
    ctx.stages.append("lift_consistency")

    delay = float(traj.tau(ctx.anchor))
    span = (ctx.anchor, min(ctx.anchor + delay, traj.t_max))
    lifted = None
    block_errors: list[float] = []
    if span[1] > span[0]:
        lifted = integrate_lifted(model, w, span, cfg.tol, traj)
        block_errors = [float(v) for v in lifted.reference_error(traj, model)]
        ctx.stages.append("integrate_lifted")

    norms = operator_norm_table(c_values=(model.c,), J=cfg.lift_J, seed=cfg.seed)
    ctx.stages.append("operator_norms")
    body = {
        "anchor_t": ctx.anchor,
        "J": w.J,
        "base_c": w.base_c,
        "tail": {"depth": w.closure.depth, "kind": w.closure.kind, "states": w.closure.states},
        "unscaled": w.unscaled(),
        "decay": profile,
        "consistency": checks,
        "lifted_span": list(span),
        "lifted_block_errors": block_errors,
        "operator_norms": norms,
    }
    ctx.report("lift", "build_lift", ("tol", "t_end", "anchor_t", "lift_J", "decay_m"), body)
    decay = pd.DataFrame({"j": np.arange(1, w.J + 1), "d": profile.values, "log_d": profile.log_values})
    ctx.table("decay", decay)
    if lifted is not None:
        ctx.table("lifted", lifted_frame(lifted))
    ctx.verdict("operator_norms", all(n.matches_finite_section for n in norms))
    ctx.summary["decay_ratio"] = profile.ratio
    if block_errors:
        ctx.summary["lifted_block1_error"] = block_errors[0]


def stage_verify(ctx: RunContext) -> None:
    cfg, setup = ctx.config, ctx.model_setup
    model = setup.model
    a2 = check_A2(model, cfg.grid_density, cfg.include_strip, seed=cfg.seed, workers=cfg.workers)
    ctx.stages.append("check_A2")
    lc = search_lc(model, cfg.grid_density, cfg.include_strip, seed=cfg.seed)
    ctx.stages.append("search_lc")
    body: dict[str, Any] = {"a2": a2, "verified_at": a2.verified_at, "lc_search": lc}
    ctx.verdict("A2", a2.passed)
    params = setup.extras.get("params")
    if params is not None:
        from sdde_analytic.example41 import bump_h, default_b

        alpha = check_alpha(params, default_b, bump_h(params.h0, params.h1))
        ctx.stages.append("check_alpha")
        body["alpha"] = alpha
        ctx.verdict("alpha", alpha.passed)
        ctx.table(
            "alpha",
            pd.DataFrame(
                {
                    "condition": [c.name for c in alpha.conditions],
                    "status": [c.status for c in alpha.conditions],
                    "value": [c.value for c in alpha.conditions],
                    "detail": [c.detail for c in alpha.conditions],
                }
            ),
        )
    ctx.report("assumptions", "verify-assumptions", ("grid_density", "include_strip"), body)
    ctx.summary["a2_margin"] = a2.worst_margin


def _continuation(ctx: RunContext, w: LiftedState) -> tuple[ContinuationResult, float, Any]:
    cfg, model = ctx.config, ctx.model_setup.model
    l0 = estimate_lipschitz(model, w, cfg.delta, cfg.lipschitz_samples, cfg.seed)
    disk = disk_radius_report(model, w, cfg.q_margin, seed=cfg.seed, h_max=cfg.h_max)
    ctx.stages.append("disk_radius")
    lams = default_lambdas(model.c, cfg.n_stages, cfg.lambda0)
    template = ContractionConfig.for_lambda(
        lams[0], l0, disk.h0, delta=cfg.delta, max_iter=cfg.max_iter, fp_tol=cfg.fp_tol
    )
    result = lambda_continuation(
        model, w, lams, template, quad=RayQuadrature(cfg.n_panels, cfg.n_nodes), n_rays=cfg.n_rays
    )
    ctx.stages.append("lambda_continuation")
    return result, l0, disk


def _continuation_frame(result: ContinuationResult) -> pd.DataFrame:
    drifts = [math.nan, *result.drifts]
    return pd.DataFrame(
        {
            "lambda": [r.lam for r in result.records],
            "h": [r.h for r in result.records],
            "kappa": [r.kappa for r in result.records],
            "iterations": [r.iterations for r in result.records],
            "measured_ratio": [r.measured_ratio for r in result.records],
            "neighbourhood": [r.neighbourhood for r in result.records],
            "drift": drifts[: len(result.records)],
        }
    )


def _taylor_frame(report: TaylorReport) -> pd.DataFrame:
    return pd.DataFrame({"k": np.arange(len(report.magnitudes)), "magnitude": report.magnitudes})


def stage_complex_extend(ctx: RunContext) -> None:
    cfg, model = ctx.config, ctx.model_setup.model
    _gate_a2(ctx)
    traj = _integrate(ctx)
    w = _lift_at_anchor(ctx)
    result, l0, disk = _continuation(ctx, w)
    taylor = taylor_coefficients(result.extrapolated, cfg.n_coeffs, block=1, fp_tol=cfg.fp_tol)
    ctx.stages.append("taylor_coefficients")

    def direct(ts: np.ndarray) -> np.ndarray:
        return np.stack([build_lift(traj, float(t), cfg.lift_J, model).seq.blocks for t in ts])

    direct_error = math.nan
    if ctx.anchor + result.h <= traj.t_max:
        direct_error = real_slice_error(result.extrapolated, direct, blocks=1)

    body = {
        "anchor_t": ctx.anchor,
        "lipschitz_l0": l0,
        "disk": disk,
        "lambdas": list(result.lambdas),
        "h": result.h,
        "records": result.records,
        "drifts": list(result.drifts),
        "drift_decreasing": result.drift_decreasing,
        "note": result.note,
        "schwarz_defect": result.final.schwarz_defect(),
        "extrapolated_block1_error": direct_error,
        "taylor": taylor,
    }
    keys = ("tol", "anchor_t", "lift_J", "lambda0", "n_stages", "fp_tol", "max_iter", "n_rays",
            "n_panels", "n_nodes", "n_coeffs", "lipschitz_samples", "delta", "h_max", "q_margin")
    ctx.report("complex_extension", "complex-extend", keys, body)
    if ctx.wants("json"):
        ctx.written.append(artifacts.write_json(ctx.out_dir / "orbit.json", result.extrapolated.to_dict()))
    ctx.table("continuation", _continuation_frame(result))
    ctx.table("taylor", _taylor_frame(taylor))
    ctx.verdict("contraction", all(r.ratio_within_bound for r in result.records))
    ctx.verdict("taylor_radius", taylor.radius > 0)
    ctx.summary["taylor_radius"] = taylor.radius


def stage_example41(ctx: RunContext) -> None:
    from sdde_analytic import example41

    setup = ctx.model_setup
    params = setup.extras.get("params")
    if params is None:
        raise ConfigError("model", f"the example41 pipeline needs the example41 model, got {setup.name!r}")

    def on_stage(name: str, _: Any) -> None:
        ctx.stages.append(name)

    result = example41.run_full_pipeline(params, ctx.config, on_stage=on_stage)
    ctx.trajectory = result.trajectory
    assert result.continuation is not None and result.taylor is not None and result.decay is not None
    body = {
        "params": params,
        "alpha": result.alpha,
        "a2": result.a2,
        "monotone_delay": result.monotone,
        "containment": result.containment,
        "inequalities": result.inequalities,
        "decay": result.decay,
        "lipschitz_l0": result.lipschitz_l0,
        "disk": result.disk,
        "lambdas": list(result.continuation.lambdas),
        "records": result.continuation.records,
        "drifts": list(result.continuation.drifts),
        "taylor": result.taylor,
    }
    keys = tuple(k for k in ctx.config.to_dict() if k not in ("model", "seed", "out_dir", "workers"))
    ctx.report("example41", "example41", keys, body)
    if result.trajectory is not None:
        ctx.table("trajectory", trajectory_frame(result.trajectory))
    ctx.table("continuation", _continuation_frame(result.continuation))
    ctx.table("taylor", _taylor_frame(result.taylor))
    for name, report in (
        ("alpha", result.alpha),
        ("A2", result.a2),
        ("monotone_delay", result.monotone),
        ("range_box", result.containment),
        ("inequalities", result.inequalities),
    ):
        ctx.verdict(name, bool(report and report.passed))
    ctx.verdict("taylor_radius", result.taylor.radius > 0)
    ctx.summary["taylor_radius"] = result.taylor.radius


STAGES: dict[str, StageFn] = {
    "simulate": stage_simulate,
    "lift": stage_lift,
    "verify-assumptions": stage_verify,
    "complex-extend": stage_complex_extend,
    "example41": stage_example41,
}


def default_out_dir(config: RunConfig) -> Path:
    model = Path(config.model).stem if config.model.endswith(".py") else config.model
    return settings.runs_dir / f"{config.subcommand}-{model}-seed{config.seed}"


def run(config: RunConfig) -> RunResult:
    """Execute the stages of ``config.subcommand`` and write the manifest.

    Exit codes: 0 all PASS, 1 mathematical FAIL, 2 numerical failure, 3 usage error.
    """
    config.validate()
    if config.subcommand == "report":
        raise ConfigError("subcommand", "use summarize_run() to read a finished run directory")
    out_dir = (config.out_dir or default_out_dir(config)).expanduser()
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(config=config, out_dir=out_dir)
    effective = {**config.to_dict(), "out_dir": str(out_dir)}
    ctx.written.append(
        write_kv_file(out_dir / EFFECTIVE_CONFIG_NAME, effective, header=f"sdde {config.subcommand}")
    )

    started_at = artifacts.utc_now()
    start = time.perf_counter()
    error: Optional[dict[str, Any]] = None
    try:
        STAGES[config.subcommand](ctx)
        exit_code = EXIT_PASS if all(ctx.verdicts.values()) else EXIT_FAIL
    except Exception as exc:
        logger.debug("run failed", exc_info=True)
        error = error_record(exc)
        exit_code = exit_code_for(exc)
    status = {0: "PASS", 1: "FAIL"}.get(exit_code, "ERROR")
    artifacts.write_manifest(
        out_dir,
        effective,
        status=status,
        exit_code=exit_code,
        stages=ctx.stages,
        artifacts=ctx.written,
        wall_time=time.perf_counter() - start,
        started_at=started_at,
        error=error,
    )
    return RunResult(exit_code, status, out_dir, ctx.stages, ctx.verdicts, ctx.summary, error)


def summarize_run(run_dir: Path) -> dict[str, Any]:
    """Manifest plus the top-level result keys of every report in ``run_dir``."""
    manifest_path = run_dir / artifacts.MANIFEST_NAME
    if not manifest_path.exists():
        raise ConfigError("run_dir", f"no {artifacts.MANIFEST_NAME} in {run_dir}")
    manifest = artifacts.read_json(manifest_path)
    reports: dict[str, Any] = {}
    for name in manifest.get("artifacts", []):
        path = run_dir / name
        if path.suffix != ".json" or not path.exists():
            continue
        data = artifacts.read_json(path)
        if isinstance(data, dict) and data.get("schema") == artifacts.REPORT_SCHEMA:
            reports[name] = {"stage": data.get("stage"), "keys": sorted(data.get("result", {}))}
    return {"manifest": manifest, "reports": reports}
