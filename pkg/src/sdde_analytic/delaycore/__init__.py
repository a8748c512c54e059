"""Direct integration of the state-dependent delay system."""

from sdde_analytic.delaycore.diagnostics import (
    MonotoneDelayReport,
    check_monotone_delay,
    derivative_jump,
    eta,
    eta_chain,
    eta_iterate,
    max_feasible_depth,
    residual,
)
from sdde_analytic.delaycore.export import (
    load_trajectory,
    save_trajectory,
    trajectory_frame,
    write_trajectory_csv,
)
from sdde_analytic.delaycore.integrator import RESIDUAL_CONSTANT, integrate_dde
from sdde_analytic.delaycore.model import Box, HistoryFunction, ModelSpec
from sdde_analytic.delaycore.trajectory import Trajectory

__all__ = [
    "Box",
    "HistoryFunction",
    "ModelSpec",
    "MonotoneDelayReport",
    "RESIDUAL_CONSTANT",
    "Trajectory",
    "check_monotone_delay",
    "derivative_jump",
    "eta",
    "eta_chain",
    "eta_iterate",
    "integrate_dde",
    "load_trajectory",
    "max_feasible_depth",
    "residual",
    "save_trajectory",
    "trajectory_frame",
    "write_trajectory_csv",
]
