"""Quadrature along rays of a complex disk and the sampled complex orbit."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
from numpy.polynomial import legendre

from sdde_analytic.seqspace import weights
from sdde_analytic.utils.errors import ConfigError


def _local_integration(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1] and the matrix of int_{-1}^{x_k}."""
    x, w = legendre.leggauss(n)
    vander = legendre.legvander(x, n - 1)
    antideriv = np.empty((n, n))
    for i in range(n):
        basis = np.zeros(n)
        basis[i] = 1.0
        antideriv[:, i] = legendre.legval(x, legendre.legint(basis, lbnd=-1))
    return x, w, antideriv @ np.linalg.inv(vander)


@dataclass(frozen=True)
class RayQuadrature:
    """Composite Gauss-Legendre rule on xi in [0, 1].

    ``integration[k] @ values`` approximates the integral from 0 to xi_k of a
    function sampled at the nodes.
    """

    n_panels: int = 2
    n_nodes: int = 12
    xi: np.ndarray = field(init=False, repr=False, compare=False)
    node_weights: np.ndarray = field(init=False, repr=False, compare=False)
    integration: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n_panels < 1:
            raise ConfigError("n_panels", f"must be >= 1, got {self.n_panels}")
        if self.n_nodes < 2:
            raise ConfigError("n_nodes", f"must be >= 2, got {self.n_nodes}")
        x, w, local = _local_integration(self.n_nodes)
        half = 0.5 / self.n_panels
        size = self.n_panels * self.n_nodes
        xi = np.empty(size)
        wts = np.empty(size)
        mat = np.zeros((size, size))
        for p in range(self.n_panels):
            rows = slice(p * self.n_nodes, (p + 1) * self.n_nodes)
            xi[rows] = p / self.n_panels + half * (x + 1.0)
            wts[rows] = half * w
            mat[rows, : p * self.n_nodes] = np.tile(wts[: p * self.n_nodes], (self.n_nodes, 1))
            mat[rows, rows] = half * local
        for name, arr in (("xi", xi), ("node_weights", wts), ("integration", mat)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def size(self) -> int:
        return self.n_panels * self.n_nodes

    def integrate(self, values: np.ndarray, axis: int = 1) -> np.ndarray:
        """Cumulative integrals at every node along ``axis``."""
        moved = np.moveaxis(np.asarray(values), axis, 0)
        out = np.tensordot(self.integration, moved, axes=(1, 0))
        return np.moveaxis(out, 0, axis)


def ray_angles(n_rays: int) -> np.ndarray:
    """Equispaced angles 2 pi r / R, starting with the real direction."""
    if n_rays < 1:
        raise ConfigError("n_rays", f"must be >= 1, got {n_rays}")
    return 2.0 * np.pi * np.arange(n_rays) / n_rays


@dataclass(frozen=True)
class ComplexOrbit:
    """Unscaled lifted states nu = Tw sampled on rays t0 + xi h e^{i theta}.

    ``values`` has shape (R, Q, J, N+1); ``base`` is nu(t0) including the tail
    states, shape (J + K, N+1). The tail is held at its value at t0.
    """

    center_t0: float
    radius_h: float
    angles: np.ndarray
    quad: RayQuadrature
    values: np.ndarray
    base: np.ndarray
    base_c: float
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.radius_h > 0:
            raise ConfigError("h", f"disk radius must be positive, got {self.radius_h}")
        values = np.array(self.values, dtype=complex, copy=True)
        if values.ndim != 4 or values.shape[:2] != (self.angles.size, self.quad.size):
            raise ConfigError("values", f"expected shape (R, Q, J, N+1), got {values.shape}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(
        cls,
        t0: float,
        h: float,
        n_rays: int,
        quad: RayQuadrature,
        base: np.ndarray,
        J: int,
        base_c: float,
    ) -> "ComplexOrbit":
        base = np.asarray(base, dtype=complex)
        values = np.broadcast_to(base[:J], (n_rays, quad.size) + base[:J].shape)
        return cls(t0, h, ray_angles(n_rays), quad, values, base, base_c)

    @property
    def n_rays(self) -> int:
        return int(self.angles.size)

    @property
    def J(self) -> int:
        return int(self.values.shape[2])

    @property
    def tail(self) -> np.ndarray:
        return self.base[self.J :]

    def times(self) -> np.ndarray:
        """Complex node times, shape (R, Q)."""
        return self.center_t0 + self.radius_h * self.quad.xi[None, :] * np.exp(1j * self.angles)[:, None]

    def full(self) -> np.ndarray:
        """Node values with the frozen tail appended, shape (R, Q, J + K, N+1)."""
        tail = np.broadcast_to(self.tail, self.values.shape[:2] + self.tail.shape)
        return np.concatenate([self.values, tail], axis=2)

    def scaled(self) -> np.ndarray:
        """w = T^{-1} nu at every node."""
        return self.values / weights(self.base_c, self.J)[:, None]

    def with_values(self, values: np.ndarray, **meta: Any) -> "ComplexOrbit":
        return ComplexOrbit(
            self.center_t0,
            self.radius_h,
            self.angles,
            self.quad,
            values,
            self.base,
            self.base_c,
            {**self.meta, **meta},
        )

    def distance(self, other: "ComplexOrbit") -> float:
        """sup over nodes of ||nu - nu'||_inf."""
        return float(np.max(np.abs(self.values - other.values)))

    def neighbourhood(self) -> float:
        """sup over nodes of ||nu(t) - nu(t0)||_inf."""
        return float(np.max(np.abs(self.values - self.base[None, None, : self.J])))

    def ray(self, angle: float = 0.0) -> int:
        """Index of the ray closest to ``angle``."""
        diff = np.angle(np.exp(1j * (self.angles - angle)))
        return int(np.argmin(np.abs(diff)))

    def conjugate_ray(self, r: int) -> int:
        return (-r) % self.n_rays

    def schwarz_defect(self) -> float:
        """sup |nu(conj t) - conj nu(t)| over all ray pairs."""
        mirror = self.values[[self.conjugate_ray(r) for r in range(self.n_rays)]]
        return float(np.max(np.abs(mirror - np.conj(self.values))))

    def to_dict(self) -> dict[str, Any]:
        scaled = self.scaled()
        return {
            "t0": self.center_t0,
            "h": self.radius_h,
            "angles": self.angles.tolist(),
            "xi": self.quad.xi.tolist(),
            "n_panels": self.quad.n_panels,
            "n_nodes": self.quad.n_nodes,
            "base_c": self.base_c,
            "J": self.J,
            "values": {"re": scaled.real.tolist(), "im": scaled.imag.tolist()},
        }


def restrict_to_ray(orbit: ComplexOrbit, angle: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Complex node times and scaled values w along the ray closest to ``angle``."""
    r = orbit.ray(angle)
    return orbit.times()[r], orbit.scaled()[r]



def real_slice_error(
    orbit: ComplexOrbit, reference: Callable[[np.ndarray], np.ndarray], blocks: Optional[int] = None
) -> float:
    """sup over the real ray of |w - reference(t)| for the first ``blocks`` blocks.

    ``reference`` maps real times of shape (Q,) to scaled blocks (Q, J', N+1).
    """
    times, values = restrict_to_ray(orbit, 0.0)
    ref = np.asarray(reference(times.real))
    count = orbit.J if blocks is None else min(blocks, orbit.J, ref.shape[1])
    return float(np.max(np.abs(values[:, :count] - ref[:, :count])))
