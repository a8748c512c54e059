"""Taylor coefficients of a complex orbit from samples on a circle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from sdde_analytic.complexext.orbit import ComplexOrbit
from sdde_analytic.utils.errors import ConfigError


def circle_coefficients(samples: np.ndarray, rho: float, n_coeffs: int) -> np.ndarray:
    """a_0..a_{n-1} from values f(t0 + rho e^{2 pi i r / R}) stacked on axis 0.

    Uses the trapezoidal rule for the Cauchy integral, which is the FFT.
    """
    samples = np.asarray(samples, dtype=complex)
    n_angles = samples.shape[0]
    if n_angles < 2 * n_coeffs:
        raise ConfigError("n_rays", f"need at least {2 * n_coeffs} angles for {n_coeffs} coefficients, got {n_angles}")
    if not rho > 0:
        raise ConfigError("rho", f"circle radius must be positive, got {rho}")
    spectrum = np.fft.fft(samples, axis=0)[:n_coeffs] / n_angles
    scale = rho ** -np.arange(n_coeffs, dtype=float)
    return spectrum * scale.reshape((-1,) + (1,) * (samples.ndim - 1))


@dataclass(frozen=True)
class TaylorReport:
    rho: float
    block: int
    coefficients: np.ndarray
    magnitudes: tuple[float, ...]
    significant: int
    slope: float
    radius: float
    constant: bool
    monotone_from: int

    @property
    def decaying(self) -> bool:
        return self.constant or self.slope < 0

    def to_dict(self) -> dict[str, Any]:
        coeffs = self.coefficients
        return {
            "rho": self.rho,
            "block": self.block,
            "magnitudes": list(self.magnitudes),
            "significant": self.significant,
            "slope": self.slope,
            "radius": self.radius,
            "constant": self.constant,
            "monotone_from": self.monotone_from,
            "coefficients": {"re": coeffs.real.tolist(), "im": coeffs.imag.tolist()},
        }


def fit_radius(magnitudes: np.ndarray, rho: float, fp_tol: float) -> tuple[int, float, float, bool]:
    """Regression of log|a_k| on k over coefficients above the noise floor fp_tol / rho^k.

    Returns (significant count, slope, radius, constant flag).
    """
    k = np.arange(magnitudes.size, dtype=float)
    floor = fp_tol * rho**-k
    keep = (k >= 1) & (magnitudes > floor)
    if np.count_nonzero(keep) < 2:
        return int(np.count_nonzero(keep)), 0.0, math.inf, True
    slope, _ = np.polyfit(k[keep], np.log(magnitudes[keep]), 1)
    return int(np.count_nonzero(keep)), float(slope), float(math.exp(-slope)), False


def _monotone_from(scaled: np.ndarray, fp_tol: float) -> int:
    """First index after which |a_k| rho^k never increases above the noise floor."""
    start = scaled.size - 1
    while start > 0 and (scaled[start - 1] >= scaled[start] or scaled[start] <= fp_tol):
        start -= 1
    return start


def taylor_coefficients(
    orbit: ComplexOrbit, n_coeffs: int, block: int = 1, fp_tol: float = 1e-10, node: int = -1
) -> TaylorReport:
    """Coefficients of the scaled blocks w_j around t0, read on the circle through ``node``."""
    if not 1 <= block <= orbit.J:
        raise ConfigError("block", f"must lie in 1..{orbit.J}, got {block}")
    rho = float(orbit.radius_h * orbit.quad.xi[node])
    coeffs = circle_coefficients(orbit.scaled()[:, node], rho, n_coeffs)
    magnitudes = np.max(np.abs(coeffs[:, block - 1]), axis=-1)
    significant, slope, radius, constant = fit_radius(magnitudes, rho, fp_tol)
    scaled = magnitudes * rho ** np.arange(n_coeffs, dtype=float)
    return TaylorReport(
        rho=rho,
        block=block,
        coefficients=coeffs,
        magnitudes=tuple(float(v) for v in magnitudes),
        significant=significant,
        slope=slope,
        radius=radius,
        constant=constant,
        monotone_from=_monotone_from(scaled, fp_tol),
    )
