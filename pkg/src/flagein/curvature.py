"""Ricci components, scalar curvature and the scale invariant H of invariant
metrics on SU(n+1)/T^n, plus the residual system the solver drives to zero.

A metric is one positive coefficient per positive root, stored as a vector
in lexicographic root order. The Ricci component on root (i, j) is::

    r_ij = 1/(2 l_ij) + 1/(4(n+1)) * sum_{k != i,j} ( l_ij/(l_ik l_kj)
                                                    - l_ik/(l_ij l_kj)
                                                    - l_jk/(l_ij l_ik) )
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import _backend
from .flag_model import FlagManifold, Root, _check_rank

EINSTEIN_TOLERANCE = 1e-8


class DomainError(ValueError):
    """A metric coefficient is non-positive or not finite."""


def _positive_vector(values, length: int, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != length:
        raise ValueError(f"{what} must have length {length}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        bad = int(np.flatnonzero(~(np.isfinite(arr) & (arr > 0)))[0])
        raise DomainError(f"{what}[{bad}] = {arr[bad]!r} is not a positive finite number")
    return arr


@dataclass(frozen=True, eq=False)
class Metric:
    """Invariant metric: ``lam[p]`` is the coefficient on the p-th positive root."""

    n: int
    lam: np.ndarray

    def __post_init__(self):
        n = _check_rank(self.n)
        object.__setattr__(self, "n", n)
        lam = _positive_vector(self.lam, n * (n + 1) // 2, "metric coefficients").copy()
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def from_mapping(cls, n: int, values: Mapping[Root, float]) -> "Metric":
        fm = FlagManifold(n)
        lam = np.full(fm.N, np.nan)
        for root, v in values.items():
            lam[fm.root_index(root)] = v
        if np.isnan(lam).any():
            missing = [fm.roots[p] for p in np.flatnonzero(np.isnan(lam))]
            raise ValueError(f"missing coefficients for roots {missing}")
        return cls(n, lam)

    @classmethod
    def from_gauge(cls, n: int, x) -> "Metric":
        """Metric with lambda_12 = 1 and the remaining coefficients ``x``."""
        return cls(n, np.concatenate(([1.0], np.asarray(x, dtype=float))))

    def coefficient(self, i: int, j: int) -> float:
        return float(self.lam[FlagManifold(self.n).root_index((i, j))])

    def scaled(self, c: float) -> "Metric":
        return Metric(self.n, c * self.lam)

    def normalized(self) -> "Metric":
        return Metric(self.n, self.lam / self.lam[0])

    def __eq__(self, other):
        if not isinstance(other, Metric):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.lam, other.lam)

    def __hash__(self):
        return hash((self.n, self.lam.tobytes()))

    def __repr__(self):
        return f"Metric(n={self.n}, lam={self.lam.tolist()})"


@dataclass(frozen=True)
class CurvatureSummary:
    ricci: np.ndarray
    scalar_curvature: float
    volume_factor: float
    h_invariant: float
    einstein_constant: Optional[float]
    max_ricci_deviation: float

    @property
    def is_einstein(self) -> bool:
        return self.einstein_constant is not None


def ricci_component(metric: Metric, root: Root) -> float:
    """Ricci component of ``metric`` on one positive root (either orientation)."""
    fm = FlagManifold(metric.n)
    i, j = fm.roots[fm.root_index(root)]
    lam = metric.lam

    def L(a, b):
        return lam[fm.root_index((a, b))]

    lij = L(i, j)
    acc = 0.0
    for k in range(1, fm.m + 1):
        if k == i or k == j:
            continue
        lik, ljk = L(i, k), L(j, k)
        acc += lij / (lik * ljk) - lik / (lij * ljk) - ljk / (lij * lik)
    return float(0.5 / lij + acc / (4.0 * fm.m))


def ricci_vector(metric: Metric, backend: str | None = None) -> np.ndarray:
    """All Ricci components in lexicographic root order."""
    k = _backend.get_kernel(backend) if backend else _backend.kernel
    return np.asarray(k.ricci_vector(metric.lam, metric.n))


def scalar_curvature(metric: Metric) -> float:
    return float(2.0 * ricci_vector(metric).sum())


def volume_factor(metric: Metric) -> float:
    """(prod lam^2)^(1/d) with d = 2N, i.e. the geometric mean of the coefficients."""
    return float(np.exp(np.mean(np.log(metric.lam))))


def h_invariant(metric: Metric) -> float:
    return volume_factor(metric) * scalar_curvature(metric)


def curvature_summary(metric: Metric, einstein_tolerance: float = EINSTEIN_TOLERANCE) -> CurvatureSummary:
    r = ricci_vector(metric)
    r.setflags(write=False)
    s = float(2.0 * r.sum())
    v = volume_factor(metric)
    mean = float(r.mean())
    dev = float(np.max(np.abs(r - mean)))
    return CurvatureSummary(
        ricci=r,
        scalar_curvature=s,
        volume_factor=v,
        h_invariant=v * s,
        einstein_constant=mean if dev < einstein_tolerance else None,
        max_ricci_deviation=dev,
    )


def _gauge_args(x, n):
    n = _check_rank(n)
    return _positive_vector(x, n * (n + 1) // 2 - 1, "x"), n


def residual_system(x, n: int, backend: str | None = None) -> np.ndarray:
    """Consecutive Ricci differences r_p - r_{p+1} in the lambda_12 = 1 gauge.

    ``x`` holds the coefficients of roots 2..N in lexicographic order. The
    result vanishes exactly at Einstein metrics.
    """
    x, n = _gauge_args(x, n)
    k = _backend.get_kernel(backend) if backend else _backend.kernel
    return np.asarray(k.residual(x, n))


def residual_jacobian(x, n: int, backend: str | None = None) -> np.ndarray:
    """Analytic Jacobian d F_p / d x_q of :func:`residual_system`."""
    x, n = _gauge_args(x, n)
    k = _backend.get_kernel(backend) if backend else _backend.kernel
    return np.asarray(k.residual_and_jacobian(x, n)[1])
