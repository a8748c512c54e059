"""Error types and exit-code mapping.

Every failure raised by the library belongs to one of three families, and the
CLI maps each family to a process exit code:

- ``AssumptionError``: a mathematical hypothesis is violated (exit 1)
- ``NumericalError``: an algorithm failed to deliver (exit 2)
- ``ConfigError``: the run was misconfigured (exit 3)
"""

from __future__ import annotations

from typing import Any, Optional

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 3


class SddeError(Exception):
    """Base class for all library errors."""

    exit_code: int = EXIT_NUMERICAL
    suggestion: str = ""


# ---------------------------------------------------------------------------
# Mathematical failures
# ---------------------------------------------------------------------------


class AssumptionError(SddeError):
    """A standing hypothesis of the model does not hold."""

    exit_code = EXIT_FAIL


class A2ViolationError(AssumptionError):
    """The disk condition on 1 - g failed at an evaluation point."""

    suggestion = "Run `sdde verify-assumptions` or widen (l, c) with search_lc."

    def __init__(self, block: Any, value: complex, l: float, c: float) -> None:
        self.block = block
        self.value = complex(value)
        self.l = l
        self.c = c
        self.margin = (c - l) / 2 - abs(self.value - (c + l) / 2)
        super().__init__(
            f"1 - g = {self.value:.6g} leaves the disk |w - {(c + l) / 2:.6g}| < {(c - l) / 2:.6g} "
            f"at block {block} (margin {self.margin:.3g})"
        )


class DomainExitError(AssumptionError):
    """The orbit left the closure of U x V."""

    suggestion = "Shorten t_end, change the history, or enlarge the model boxes."

    def __init__(self, time: Any, constraint: str, partial: Any = None) -> None:
        self.time = time
        self.constraint = constraint
        self.partial = partial
        if isinstance(time, (int, float)):
            where = f"t = {time:.6g}"
        elif isinstance(time, str):
            where = time
        else:
            where = f"node {time}"
        super().__init__(f"Orbit left the model domain at {where}: {constraint}")


class DegenerateDiskError(AssumptionError):
    """The initial lifted state sits on the boundary of the admissible set."""

    def __init__(self, gap: float) -> None:
        self.gap = gap
        super().__init__(f"Boundary gap r = {gap:.3g} must be positive")


class AlphaConditionError(AssumptionError):
    """A parameter condition of the adaptive-delay example failed."""

    def __init__(self, condition: str, detail: str) -> None:
        self.condition = condition
        self.detail = detail
        super().__init__(f"Condition {condition} failed: {detail}")


# ---------------------------------------------------------------------------
# Numerical failures
# ---------------------------------------------------------------------------


class NumericalError(SddeError):
    """An algorithm could not produce a trustworthy result."""

    exit_code = EXIT_NUMERICAL


class StepSizeUnderflowError(NumericalError):
    suggestion = "Loosen tol or inspect the model near the reported time."

    def __init__(self, time: float, message: str = "") -> None:
        self.time = time
        super().__init__(f"Step size underflow at t = {time:.6g}. {message}".strip())


class HistoryExhaustedError(NumericalError):
    """A delayed argument fell before the start of the known history."""

    suggestion = "Provide a longer history or reduce the lift depth J."

    def __init__(
        self, time: float, depth: int, t_min: float, feasible_J: Optional[int] = None
    ) -> None:
        self.time = time
        self.depth = depth
        self.t_min = t_min
        self.feasible_J = feasible_J
        message = f"Delay iterate {depth} reached t = {time:.6g}, before history start {t_min:.6g}"
        if feasible_J is not None:
            message += f"; the largest feasible lift depth here is J = {feasible_J}"
        super().__init__(message)


class OutOfDomainError(NumericalError):
    def __init__(self, time: float, t_min: float, t_max: float) -> None:
        self.time = time
        super().__init__(f"t = {time:.6g} is outside the trajectory domain [{t_min:.6g}, {t_max:.6g}]")


class ContractionError(NumericalError):
    """Picard iteration did not converge."""

    suggestion = "Lower lambda, shrink the disk radius, or raise max_iter."

    def __init__(self, message: str, measured_ratio: float, iterations: int, record: Any = None):
        self.measured_ratio = measured_ratio
        self.iterations = iterations
        self.record = record
        super().__init__(f"{message} (iterations={iterations}, measured ratio={measured_ratio:.4f})")


class ModelDefectError(NumericalError):
    """The model returned a non-finite value inside its own domain."""

    suggestion = "Check the analytic extension of f and g on the declared strips."

    def __init__(self, where: str, point: Any = None) -> None:
        self.where = where
        self.point = point
        super().__init__(f"Model produced a non-finite value in {where} at {point}")


# ---------------------------------------------------------------------------
# Usage failures
# ---------------------------------------------------------------------------


class ConfigError(SddeError, ValueError):
    """Invalid configuration. Always names the offending field."""

    exit_code = EXIT_USAGE

    def __init__(self, field_name: str, reason: str) -> None:
        self.field_name = field_name
        self.reason = reason
        super().__init__(f"Invalid value for '{field_name}': {reason}")


class UnknownModelError(ConfigError):
    def __init__(self, name: str, known: list[str]) -> None:
        self.known = known
        super().__init__("model", f"unknown model '{name}' (built-ins: {', '.join(known)})")


class StageFailure(SddeError):
    """First hard failure of a multi-stage pipeline, labelled with its stage."""

    def __init__(
        self, stage: str, cause: Exception, partial: Optional[dict[str, Any]] = None
    ) -> None:
        self.stage = stage
        self.cause = cause
        self.partial = partial or {}
        super().__init__(f"Stage '{stage}' failed: {cause}")

    @property
    def exit_code(self) -> int:  # type: ignore[override]
        return exit_code_for(self.cause)


def categorize_error(error: BaseException) -> str:
    """Categorize an error for reporting."""
    if isinstance(error, StageFailure):
        return categorize_error(error.cause)
    if isinstance(error, AssumptionError):
        return "assumption"
    if isinstance(error, ConfigError):
        return "usage"
    if isinstance(error, NumericalError):
        return "numerical"
    if isinstance(error, (FileNotFoundError, PermissionError)):
        return "usage"
    if isinstance(error, FloatingPointError):
        return "numerical"
    return "unknown"


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, StageFailure):
        return exit_code_for(error.cause)
    if isinstance(error, SddeError):
        return error.exit_code
    if categorize_error(error) == "usage":
        return EXIT_USAGE
    return EXIT_NUMERICAL


def format_error(error: BaseException, stage: Optional[str] = None) -> str:
    """Render an error with its category and a suggested next step."""
    category = categorize_error(error)
    cause = error.cause if isinstance(error, StageFailure) else error
    label = stage or (error.stage if isinstance(error, StageFailure) else None)

    parts = [f"Error ({category}): {cause}"]
    if label:
        parts.append(f"Stage: {label}")
    suggestion = getattr(cause, "suggestion", "")
    if suggestion:
        parts.append("")
        parts.append(f"Suggested action: {suggestion}")
    return "\n".join(parts)


def error_record(error: BaseException) -> dict[str, Any]:
    """Machine-readable summary of an error for run manifests."""
    cause = error.cause if isinstance(error, StageFailure) else error
    return {
        "type": type(cause).__name__,
        "category": categorize_error(error),
        "message": str(cause),
        "stage": error.stage if isinstance(error, StageFailure) else None,
        "exit_code": exit_code_for(error),
    }
