"""Two-sample covariance test statistics.

All statistics are functions of the two sample covariances and are meant to
be calibrated by permutation, not by asymptotic null laws. The Ky-Fan grid
is the primary family; the others are baselines targeting specific kinds of
alternatives (overall energy, single extreme entries, banded structure,
trace of squares).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import TwoSampleDataset, sample_covariance
from .spectral import ky_fan_profile

__all__ = [
    "KYFAN_GRID",
    "FROBENIUS",
    "MAX_ELEMENTWISE",
    "SUPERDIAG_GRID",
    "TRACE",
    "StatisticVector",
    "difference_covariance",
    "t_k_grid",
    "frobenius_stat",
    "max_elementwise_stat",
    "superdiag_stat",
    "superdiag_grid",
    "superdiag_orders",
    "trace_stat",
]

logger = logging.getLogger(__name__)

# statistic family names
KYFAN_GRID = "KYFAN_GRID"
FROBENIUS = "FROBENIUS"
MAX_ELEMENTWISE = "MAX_ELEMENTWISE"
SUPERDIAG_GRID = "SUPERDIAG_GRID"
TRACE = "TRACE"

#: floor applied to entrywise variance estimates in the standardized-max statistic
VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class StatisticVector:
    """Values of one statistic family along its order grid (k or q)."""

    family: str
    orders: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.orders) != len(self.values):
            raise ValueError("orders and values must align")


def difference_covariance(d: TwoSampleDataset) -> np.ndarray:
    """Sample covariance of group 1 minus sample covariance of group 2."""
    return sample_covariance(d.group1) - sample_covariance(d.group2)


def t_k_grid(d: TwoSampleDataset, k_max: int) -> StatisticVector:
    """Ky-Fan(k) norms of the covariance difference for k = 1..k_max."""
    if not 1 <= k_max <= min(d.n, d.p):
        raise ValueError(f"k_max must be in [1, min(n, p)] = [1, {min(d.n, d.p)}]")
    values = ky_fan_profile(difference_covariance(d), k_max)
    return StatisticVector(
        family=KYFAN_GRID, orders=np.arange(1, k_max + 1), values=values
    )


def frobenius_stat(d: TwoSampleDataset) -> float:
    """Frobenius norm of the covariance difference."""
    delta = difference_covariance(d)
    return float(np.sqrt(np.sum(delta * delta)))


def _entrywise_variances(x: np.ndarray) -> np.ndarray:
    """theta[r, s] = mean_i (z_ir z_is - mean-cross-product)^2 for centered z."""
    n = x.shape[0]
    z = x - x.mean(axis=0)
    mean_cp = z.T @ z / n
    sq = z * z
    return sq.T @ sq / n - mean_cp * mean_cp


def max_elementwise_stat(d: TwoSampleDataset) -> float:
    """Largest standardized squared entry of the covariance difference.

    Each entry (r, s), r <= s, is squared and divided by
    theta1[r,s]/n1 + theta2[r,s]/n2 where theta_g is the within-group
    empirical variance of the centered cross-products. Denominators are
    floored at VARIANCE_FLOOR; hitting the floor is logged since it signals
    near-degenerate features.
    """
    value, floored = _max_elementwise(
        sample_covariance(d.group1),
        sample_covariance(d.group2),
        _entrywise_variances(d.group1),
        _entrywise_variances(d.group2),
        d.n1,
        d.n2,
    )
    if floored:
        logger.warning(
            "max-elementwise statistic: variance floor %.0e engaged", VARIANCE_FLOOR
        )
    return value


def _max_elementwise(s1, s2, th1, th2, n1, n2) -> tuple[float, bool]:
    denom = th1 / n1 + th2 / n2
    floored = bool(np.any(denom < VARIANCE_FLOOR))
    denom = np.maximum(denom, VARIANCE_FLOOR)
    ratio = (s1 - s2) ** 2 / denom
    iu = np.triu_indices(s1.shape[0])
    return float(ratio[iu].max()), floored


def superdiag_stat(d: TwoSampleDataset, q: int) -> float:
    """Sum of squared entries on the q-th superdiagonal of the difference."""
    if not 0 <= q <= d.p - 1:
        raise ValueError(f"q must be in [0, p-1] = [0, {d.p - 1}]")
    delta = difference_covariance(d)
    band = np.diagonal(delta, offset=q)
    return float(np.sum(band * band))


def superdiag_orders(p: int) -> np.ndarray:
    """Offset grid for the banded family: q = 0..floor(p^0.7), capped at p-1."""
    q_max = min(int(np.floor(p**0.7)), p - 1)
    return np.arange(0, q_max + 1)


def superdiag_grid(d: TwoSampleDataset) -> StatisticVector:
    """Banded statistics over the default offset grid (combined by min-p later)."""
    delta = difference_covariance(d)
    orders = superdiag_orders(d.p)
    values = np.array(
        [float(np.sum(np.diagonal(delta, offset=int(q)) ** 2)) for q in orders]
    )
    return StatisticVector(family=SUPERDIAG_GRID, orders=orders, values=values)


def trace_stat(d: TwoSampleDataset) -> float:
    """Difference of corrected spectral-dispersion summaries.

    a_g = tr(S_g^2)/p - tr(S_g)^2 / (p n_g) per group; the statistic is
    |a_1 - a_2|.
    """
    out = []
    for x in (d.group1, d.group2):
        s = sample_covariance(x)
        n = x.shape[0]
        out.append(np.sum(s * s) / d.p - np.trace(s) ** 2 / (d.p * n))
    return float(abs(out[0] - out[1]))
