"""Finite sections of the weighted sequence spaces l_c^inf and l_m^inf.

A ``WeightedSeq`` holds blocks v_1..v_J, each a complex vector of length N+1.
The block norm is the max of component moduli. Every operator in the algebra
(T, its inverse and the resolvent-type combinations) is diagonal and acts on
block j through a single scalar multiplier, so all of them are implemented
through :func:`diagonal`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from sdde_analytic.utils.errors import ConfigError


class OperatorKind(str, Enum):
    T = "T"
    TINV = "Tinv"
    I_MINUS_TINV = "I_minus_Tinv"
    LAMBDA_I_PLUS_TINV = "lambdaI_plus_Tinv"
    ONE_MINUS_LAMBDA_I_MINUS_TINV = "oneMinusLambdaI_minus_Tinv"
    RESOLVENT = "resolvent_lambdaT_plus_I"


_USES_LAMBDA = {
    OperatorKind.LAMBDA_I_PLUS_TINV,
    OperatorKind.ONE_MINUS_LAMBDA_I_MINUS_TINV,
    OperatorKind.RESOLVENT,
}


@dataclass(frozen=True)
class OperatorTag:
    kind: OperatorKind
    lam: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", OperatorKind(self.kind))
        if not math.isfinite(self.lam) or self.lam < 0:
            raise ConfigError("lambda", f"must be a finite value >= 0, got {self.lam}")

    @property
    def uses_lambda(self) -> bool:
        return self.kind in _USES_LAMBDA

    def validate(self, c: float) -> None:
        _check_base(c)
        if self.kind is OperatorKind.ONE_MINUS_LAMBDA_I_MINUS_TINV:
            upper = 1.0 - 1.0 / c
            if not 0.0 < self.lam < upper:
                raise ConfigError("lambda", f"must lie in (0, {upper:.6g}) for c = {c:.6g}")

    def label(self) -> str:
        return f"{self.kind.value}(lambda={self.lam:g})" if self.uses_lambda else self.kind.value


def _check_base(c: float) -> None:
    if not (math.isfinite(c) and c > 1.0):
        raise ConfigError("base_c", f"must be a finite value > 1, got {c}")


def weights(c: float, J: int) -> np.ndarray:
    """c^j for j = 1..J."""
    return float(c) ** np.arange(1, J + 1, dtype=float)


def diagonal(tag: OperatorTag, c: float, J: int) -> np.ndarray:
    """Scalar multipliers d_1..d_J of the diagonal operator named by ``tag``."""
    tag.validate(c)
    cj = weights(c, J)
    lam = tag.lam
    kind = tag.kind
    if kind is OperatorKind.T:
        return cj
    if kind is OperatorKind.TINV:
        return 1.0 / cj
    if kind is OperatorKind.I_MINUS_TINV:
        return 1.0 - 1.0 / cj
    if kind is OperatorKind.LAMBDA_I_PLUS_TINV:
        return lam + 1.0 / cj
    if kind is OperatorKind.ONE_MINUS_LAMBDA_I_MINUS_TINV:
        return (1.0 - lam) - 1.0 / cj
    return 1.0 / (lam * cj + 1.0)


@dataclass(frozen=True)
class WeightedSeq:
    """Truncated weighted sequence of complex blocks.

    ``blocks`` has shape (J, N+1). The array is copied and frozen on construction.
    """

    blocks: np.ndarray
    base_c: float
    trunc_J: int = field(init=False)

    def __post_init__(self) -> None:
        _check_base(self.base_c)
        arr = np.array(self.blocks, dtype=complex, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ConfigError("blocks", f"expected a (J, N+1) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ConfigError("blocks", "all block components must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "blocks", arr)
        object.__setattr__(self, "trunc_J", arr.shape[0])

    @property
    def width(self) -> int:
        return self.blocks.shape[1]

    @classmethod
    def from_unscaled(cls, states: np.ndarray, base_c: float) -> "WeightedSeq":
        """Build w = T^{-1} nu from unscaled states nu_j."""
        states = np.asarray(states, dtype=complex)
        return cls(states / weights(base_c, states.shape[0])[:, None], base_c)

    def unscaled(self) -> np.ndarray:
        """nu = T w, the O(1) physical states."""
        return self.blocks * weights(self.base_c, self.trunc_J)[:, None]

    def block_norms(self) -> np.ndarray:
        return np.max(np.abs(self.blocks), axis=1)

    def with_blocks(self, blocks: np.ndarray) -> "WeightedSeq":
        return WeightedSeq(blocks, self.base_c)

    def __sub__(self, other: "WeightedSeq") -> "WeightedSeq":
        return self.with_blocks(self.blocks - other.blocks)


def norm_lc(v: WeightedSeq) -> float:
    """sup_j c^j |v_j|."""
    return float(np.max(weights(v.base_c, v.trunc_J) * v.block_norms()))


def norm_linf(v: WeightedSeq) -> float:
    return float(np.max(v.block_norms()))


def norm_lm(v: WeightedSeq, m: int) -> float:
    """sup_j j^m |v_j|; the decay bound needs m >= 2, m = 1 is accepted too."""
    if m < 1:
        raise ConfigError("m", f"must be a positive integer, got {m}")
    j = np.arange(1, v.trunc_J + 1, dtype=float)
    return float(np.max(j**m * v.block_norms()))


def apply_operator(tag: OperatorTag, v: WeightedSeq) -> WeightedSeq:
    if tag.kind is OperatorKind.TINV:
        # division keeps T(Tinv v) == v exact whenever c^j is a power of two
        return v.with_blocks(v.blocks / weights(v.base_c, v.trunc_J)[:, None])
    d = diagonal(tag, v.base_c, v.trunc_J)
    return v.with_blocks(v.blocks * d[:, None])


def cutoff(v: WeightedSeq, m: int) -> WeightedSeq:
    """Finite-rank cut-off H_m: apply T^{-1} to blocks j <= m and drop the rest."""
    d = 1.0 / weights(v.base_c, v.trunc_J)
    d[m:] = 0.0
    return v.with_blocks(v.blocks * d[:, None])


def cutoff_deficit(c: float, m: int, J: int) -> float:
    """||T^{-1} - H_m|| on the J-section: c^{-(m+1)} while m < J, else 0."""
    _check_base(c)
    return float(c ** -(m + 1)) if m < J else 0.0


def closed_form_norm(tag: OperatorTag, c: float) -> float:
    """Operator norm on the full (infinite) sequence space."""
    tag.validate(c)
    lam = tag.lam
    return {
        OperatorKind.T: math.inf,
        OperatorKind.TINV: 1.0 / c,
        OperatorKind.I_MINUS_TINV: 1.0,
        OperatorKind.LAMBDA_I_PLUS_TINV: lam + 1.0 / c,
        OperatorKind.ONE_MINUS_LAMBDA_I_MINUS_TINV: 1.0 - lam,
        OperatorKind.RESOLVENT: 1.0 / (c * lam + 1.0),
    }[tag.kind]


def finite_section_norm(tag: OperatorTag, c: float, J: int) -> float:
    """Exact norm on the J-section, i.e. max_j |d_j|."""
    return float(np.max(np.abs(diagonal(tag, c, J))))


def extremal_elements(c: float, J: int) -> dict[str, np.ndarray]:
    """Scalar profiles e_j of the analytic test elements e_j * (1, ..., 1)."""
    j = np.arange(1, J + 1, dtype=float)
    first = np.zeros(J)
    first[0] = 1.0
    last = np.zeros(J)
    last[-1] = 1.0
    return {
        "first_coordinate": first,
        "last_coordinate": last,
        "constant": np.ones(J),
        "j_over_j_plus_1": j / (j + 1.0),
        "geometric": float(c) ** -(j - 1.0),
    }


def _ratio(d: np.ndarray, profile: np.ndarray) -> float:
    denom = np.max(np.abs(profile))
    return float(np.max(np.abs(d * profile)) / denom) if denom > 0 else 0.0


@dataclass(frozen=True)
class OperatorNormCheck:
    tag: str
    c: float
    J: int
    estimate: float
    attained_by: str
    finite_section: float
    closed_form: float
    deficit: float
    n_samples: int
    seed: int

    @property
    def matches_finite_section(self) -> bool:
        return abs(self.estimate - self.finite_section) <= 1e-12 * max(1.0, self.finite_section)


def _estimate(
    tag: OperatorTag, c: float, J: int, n_samples: int, seed: int, width: int = 2
) -> tuple[float, str]:
    if J < 1:
        raise ConfigError("J", f"must be >= 1, got {J}")
    if n_samples < 1:
        raise ConfigError("n_samples", f"must be >= 1, got {n_samples}")
    d = diagonal(tag, c, J)

    best, best_name = -1.0, ""
    for name, profile in extremal_elements(c, J).items():
        value = _ratio(d, profile)
        if value > best:
            best, best_name = value, name

    rng = np.random.default_rng(seed)
    samples = rng.standard_normal((n_samples, J, width)) + 1j * rng.standard_normal(
        (n_samples, J, width)
    )
    block = np.max(np.abs(samples), axis=2)
    ratios = np.max(np.abs(d) * block, axis=1) / np.max(block, axis=1)
    k = int(np.argmax(ratios))
    if ratios[k] > best:
        best, best_name = float(ratios[k]), f"random[{k}]"
    return best, best_name


def estimate_operator_norm(
    tag: OperatorTag, c: float, J: int, n_samples: int = 64, seed: int = 0
) -> float:
    """Lower estimate of the l^inf operator norm on the J-section.

    The supremum runs over ``n_samples`` random unit elements together with the
    analytic extremal elements, so the result is deterministic up to sampling
    that can only push it closer to the exact finite-section norm.
    """
    value, _ = _estimate(tag, c, J, n_samples, seed)
    return value


def check_operator_norm(
    tag: OperatorTag, c: float, J: int, n_samples: int = 64, seed: int = 0
) -> OperatorNormCheck:
    value, name = _estimate(tag, c, J, n_samples, seed)
    closed = closed_form_norm(tag, c)
    finite = finite_section_norm(tag, c, J)
    return OperatorNormCheck(
        tag=tag.label(),
        c=c,
        J=J,
        estimate=value,
        attained_by=name,
        finite_section=finite,
        closed_form=closed,
        deficit=(closed - finite) if math.isfinite(closed) else math.inf,
        n_samples=n_samples,
        seed=seed,
    )


def operator_norm_table(
    c_values: tuple[float, ...] = (1.5, 2.0, math.e),
    lambdas: tuple[float, ...] = (0.0, 0.1, 0.3),
    J: int = 64,
    n_samples: int = 64,
    seed: int = 0,
) -> list[OperatorNormCheck]:
    """Norm checks over a parameter grid, skipping tags whose lambda is inadmissible."""
    checks: list[OperatorNormCheck] = []
    for c in c_values:
        checks.append(check_operator_norm(OperatorTag(OperatorKind.TINV), c, J, n_samples, seed))
        checks.append(
            check_operator_norm(OperatorTag(OperatorKind.I_MINUS_TINV), c, J, n_samples, seed)
        )
        for lam in lambdas:
            for kind in (
                OperatorKind.LAMBDA_I_PLUS_TINV,
                OperatorKind.RESOLVENT,
                OperatorKind.ONE_MINUS_LAMBDA_I_MINUS_TINV,
            ):
                tag = OperatorTag(kind, lam)
                try:
                    tag.validate(c)
                except ConfigError:
                    continue
                checks.append(check_operator_norm(tag, c, J, n_samples, seed))
    return checks

