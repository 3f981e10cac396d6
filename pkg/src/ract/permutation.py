"""Permutation calibration of covariance test statistics.

The observed statistic is compared against B random relabelings of the
pooled rows. Replicates are sampled with replacement from the full
relabeling space; the identity split is not given special treatment. Ties
count toward the numerator, so every reported p-value is (1 + count)/(B+1)
and lands on the lattice {1/(B+1), ..., 1}.

Two adaptive combinations of the Ky-Fan grid are provided:

``t_ract``
    Standardize each T_k column by its permutation mean and standard
    deviation, then take the max over k = 1..K.

min-p
    Convert each T_k column to a per-k p-value and take the minimum; the
    replicate minima use the leave-one-out counts so the final comparison
    stays exact at finite B.

The truncation rank K is chosen once, from the singular-value mass of the
pooled covariance of the observed (unpermuted) grouping, and is never
recomputed under permutation.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from . import rng
from .data import DegenerateDataError, TwoSampleDataset
from .kernels import EvalRequest, evaluate_splits, identity_split, pooled_singular_values
from .spectral import select_k
from .stats import superdiag_orders

__all__ = [
    "DEFAULT_K_CUTOFF",
    "BASELINE_FAMILIES",
    "PermutationNull",
    "TestReport",
    "permute_labels",
    "build_null",
    "t_ract",
    "permutation_p_value",
    "per_order_pvalues",
    "leave_one_out_pvalues",
    "minp_observed",
    "minp_replicates",
    "minp_pvalue",
    "run_test",
]

logger = logging.getLogger(__name__)

DEFAULT_K_CUTOFF = 0.8
MIN_REPLICATES = 19
BASELINE_FAMILIES = ("frobenius", "max_elementwise", "superdiag_minp", "trace")

# permutations are distributed to workers in fixed-size blocks so the work
# split never depends on the worker budget
_BLOCK = 64


def permute_labels(
    d: TwoSampleDataset, b: int, master_seed: int, dataset_index: int = 0
) -> np.ndarray:
    """Row permutation for replicate ``b``; the first n1 entries form group 1.

    A pure function of (master_seed, dataset_index, b): evaluation order and
    worker count cannot change it.
    """
    if b < 1:
        raise ValueError("replicate indices start at 1")
    g = rng.stream(master_seed, rng.DOMAIN_PERMUTE, dataset_index, b)
    return g.permutation(d.n)


@dataclass(frozen=True)
class PermutationNull:
    """Observed statistics plus their B-row permutation replicate table."""

    B: int
    master_seed: int
    dataset_index: int
    K: int
    k_values: np.ndarray  # Ky-Fan orders covered by the table (1..max requested)
    observed: dict
    replicates: dict
    superdiag_q: np.ndarray | None
    variance_floor_hit: bool

    def __post_init__(self):
        if self.B < MIN_REPLICATES:
            raise ValueError(f"B must be >= {MIN_REPLICATES}, got {self.B}")
        if not 1 <= self.K <= self.k_values.max():
            raise ValueError("K must lie within the covered Ky-Fan orders")

    def kyfan_column(self, k: int) -> tuple[float, np.ndarray]:
        """Observed value and replicate column for Ky-Fan order ``k``."""
        idx = int(np.nonzero(self.k_values == k)[0][0])
        return float(self.observed["kyfan"][idx]), self.replicates["kyfan"][:, idx]


def build_null(
    d: TwoSampleDataset,
    B: int,
    master_seed: int,
    *,
    k_cutoff: float = DEFAULT_K_CUTOFF,
    extra_k: tuple[int, ...] = (),
    families: tuple[str, ...] = BASELINE_FAMILIES,
    pooled_centering: str = "group",
    workers: int = 1,
    dataset_index: int = 0,
) -> PermutationNull:
    """Select K, evaluate the observed statistics, and fill the null table.

    ``extra_k`` adds fixed Ky-Fan orders (beyond the adaptive 1..K) to the
    table so single-norm tests share the same replicates. ``families`` names
    baseline statistics to evaluate alongside the Ky-Fan grid.
    """
    if B < MIN_REPLICATES:
        raise ValueError(f"B must be >= {MIN_REPLICATES}, got {B}")
    unknown = set(families) - set(BASELINE_FAMILIES)
    if unknown:
        raise ValueError(f"unknown statistic families: {sorted(unknown)}")
    cap = min(d.n, d.p)
    for k in extra_k:
        if not 1 <= k <= cap:
            raise ValueError(f"fixed Ky-Fan order {k} outside [1, min(n, p)] = [1, {cap}]")

    psv = pooled_singular_values(d, centering=pooled_centering)
    K = select_k(psv, cutoff=k_cutoff, cap=cap)
    k_max = max([K, *extra_k])
    k_values = np.arange(1, k_max + 1)

    req = EvalRequest(
        k_values=k_values,
        frobenius="frobenius" in families,
        trace="trace" in families,
        max_elementwise="max_elementwise" in families,
        superdiag=superdiag_orders(d.p) if "superdiag_minp" in families else None,
    )
    x = d.stacked()
    observed = evaluate_splits(x, d.n1, identity_split(d.n), req)
    observed = {key: (val[0] if isinstance(val, np.ndarray) else val) for key, val in observed.items()}

    blocks = [(lo, min(lo + _BLOCK, B)) for lo in range(0, B, _BLOCK)]
    args = [
        (x, d.n1, master_seed, dataset_index, lo, hi, req) for lo, hi in blocks
    ]
    if workers > 1 and len(blocks) > 1:
        import concurrent.futures as cf
        import multiprocessing as mp

        ctx = mp.get_context("spawn")
        with cf.ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            pieces = list(pool.map(_eval_block, args))
    else:
        pieces = [_eval_block(a) for a in args]

    replicates: dict = {}
    for key in pieces[0]:
        if key == "max_elementwise_floored":
            continue
        replicates[key] = np.concatenate([piece[key] for piece in pieces], axis=0)
    floor_hit = bool(observed.pop("max_elementwise_floored", False)) or any(
        piece.get("max_elementwise_floored", False) for piece in pieces
    )

    return PermutationNull(
        B=B,
        master_seed=master_seed,
        dataset_index=dataset_index,
        K=K,
        k_values=k_values,
        observed=observed,
        replicates=replicates,
        superdiag_q=req.superdiag,
        variance_floor_hit=floor_hit,
    )


def _eval_block(args):
    x, n1, master_seed, dataset_index, lo, hi, req = args
    n = x.shape[0]
    splits = np.empty((hi - lo, n), dtype=np.intp)
    for i, b in enumerate(range(lo + 1, hi + 1)):
        g = rng.stream(master_seed, rng.DOMAIN_PERMUTE, dataset_index, b)
        splits[i] = g.permutation(n)
    return evaluate_splits(x, n1, splits, req)


# ---------------------------------------------------------------------------
# p-values
# ---------------------------------------------------------------------------


def permutation_p_value(observed: float, replicates: np.ndarray) -> float:
    """(1 + #{replicates >= observed}) / (B + 1); ties count as extreme."""
    replicates = np.asarray(replicates, dtype=float)
    if replicates.ndim != 1 or replicates.size < 1:
        raise ValueError("replicates must be a non-empty 1-D array")
    return float((1 + np.sum(replicates >= observed)) / (replicates.size + 1))


def per_order_pvalues(observed: np.ndarray, replicates: np.ndarray) -> np.ndarray:
    """Column-wise permutation p-values for a (B, m) replicate table."""
    observed = np.atleast_1d(np.asarray(observed, dtype=float))
    B = replicates.shape[0]
    return (1 + np.sum(replicates >= observed[None, :], axis=0)) / (B + 1)


def leave_one_out_pvalues(replicates: np.ndarray) -> np.ndarray:
    """p^{(b)}_j = (1/B) [1 + #{b' != b : T_{b'j} >= T_{bj}}].

    Since T_{bj} >= T_{bj} always, the bracket equals the count over all
    rows, so each entry is count/B with count computed by a sorted search.
    """
    B, m = replicates.shape
    out = np.empty_like(replicates, dtype=float)
    for j in range(m):
        col = replicates[:, j]
        order = np.sort(col)
        below = np.searchsorted(order, col, side="left")
        out[:, j] = (B - below) / B
    return out


def _kyfan_adaptive(null: PermutationNull) -> tuple[np.ndarray, np.ndarray]:
    mask = null.k_values <= null.K
    return null.observed["kyfan"][mask], null.replicates["kyfan"][:, mask]


def minp_observed(null: PermutationNull) -> float:
    """Smallest per-k p-value over the adaptive grid k = 1..K."""
    obs, rep = _kyfan_adaptive(null)
    return float(per_order_pvalues(obs, rep).min())


def minp_replicates(null: PermutationNull) -> np.ndarray:
    """Replicate minima of the leave-one-out per-k p-values, k = 1..K."""
    _, rep = _kyfan_adaptive(null)
    return leave_one_out_pvalues(rep).min(axis=1)


def minp_pvalue(observed_min: float, replicate_mins: np.ndarray) -> float:
    """(1 + #{replicate minima <= observed minimum}) / (B + 1)."""
    B = replicate_mins.size
    return float((1 + np.sum(replicate_mins <= observed_min)) / (B + 1))


def t_ract(null: PermutationNull) -> tuple[float, np.ndarray, dict]:
    """Standardized-max statistic over k = 1..K, observed and replicates.

    Columns are standardized by the replicate mean and sample standard
    deviation (the replicate rows standardize themselves with the same
    constants). Columns with zero spread are dropped with a warning; if all
    are degenerate the test cannot proceed.

    Returns (observed value, (B,) replicate values, info dict with means,
    sds, and dropped orders).
    """
    obs, rep = _kyfan_adaptive(null)
    means = rep.mean(axis=0)
    sds = rep.std(axis=0, ddof=1)
    keep = sds > 0
    dropped = [int(k) for k in null.k_values[null.k_values <= null.K][~keep]]
    if dropped:
        logger.warning("degenerate null spread; dropping Ky-Fan orders %s", dropped)
    if not np.any(keep):
        raise DegenerateDataError(
            "every Ky-Fan order has a degenerate permutation null"
        )
    z_obs = (obs[keep] - means[keep]) / sds[keep]
    z_rep = (rep[:, keep] - means[keep]) / sds[keep]
    info = {"means": means, "sds": sds, "dropped": dropped}
    return float(z_obs.max()), z_rep.max(axis=1), info


# ---------------------------------------------------------------------------
# full test
# ---------------------------------------------------------------------------


@dataclass
class TestReport:
    """Everything the test produced, ready for serialization."""

    n1: int
    n2: int
    p: int
    B: int
    master_seed: int
    alpha: float
    k_cutoff: float
    pooled_centering: str
    K: int
    k_values: list[int]
    observed_kyfan: dict[int, float]
    null_means: dict[int, float]
    null_sds: dict[int, float]
    dropped_k: list[int]
    t_ract_observed: float
    p_ract: float
    p_minp: float
    per_k_pvalues: dict[int, float]
    observed_baselines: dict[str, float]
    baseline_pvalues: dict[str, float]
    variance_floor_hit: bool
    runtime: float | None = None

    def reject(self, which: str = "minp") -> bool:
        p = self.p_minp if which == "minp" else self.p_ract
        return p <= self.alpha

    def to_json_dict(self, version: str, config_hash: str) -> dict:
        """Deterministic report payload. Wall-clock runtime is deliberately
        excluded so identical configurations serialize identically."""
        return {
            "version": version,
            "config_hash": config_hash,
            "master_seed": self.master_seed,
            "B": self.B,
            "alpha": self.alpha,
            "k_cutoff": self.k_cutoff,
            "pooled_centering": self.pooled_centering,
            "n1": self.n1,
            "n2": self.n2,
            "p": self.p,
            "K": self.K,
            "k_values": self.k_values,
            "observed_kyfan": {str(k): v for k, v in self.observed_kyfan.items()},
            "null_means": {str(k): v for k, v in self.null_means.items()},
            "null_sds": {str(k): v for k, v in self.null_sds.items()},
            "dropped_k": self.dropped_k,
            "t_ract_observed": self.t_ract_observed,
            "p_ract": self.p_ract,
            "p_minp": self.p_minp,
            "per_k_pvalues": {str(k): v for k, v in self.per_k_pvalues.items()},
            "observed_baselines": self.observed_baselines,
            "baseline_pvalues": self.baseline_pvalues,
            "variance_floor_hit": self.variance_floor_hit,
            "reject_at_alpha": self.reject(),
        }


def run_test(
    d: TwoSampleDataset,
    B: int = 1000,
    master_seed: int = 0,
    *,
    alpha: float = 0.05,
    k_cutoff: float = DEFAULT_K_CUTOFF,
    extra_k: tuple[int, ...] = (),
    families: tuple[str, ...] = BASELINE_FAMILIES,
    pooled_centering: str = "group",
    workers: int = 1,
    dataset_index: int = 0,
) -> TestReport:
    """Run the full two-sample covariance test and assemble the report."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    start = time.perf_counter()
    null = build_null(
        d,
        B,
        master_seed,
        k_cutoff=k_cutoff,
        extra_k=extra_k,
        families=families,
        pooled_centering=pooled_centering,
        workers=workers,
        dataset_index=dataset_index,
    )
    t_obs, t_rep, info = t_ract(null)
    p_ract_val = permutation_p_value(t_obs, t_rep)
    p_minp_val = minp_pvalue(minp_observed(null), minp_replicates(null))

    per_k = per_order_pvalues(null.observed["kyfan"], null.replicates["kyfan"])
    per_k_pvalues = {int(k): float(p) for k, p in zip(null.k_values, per_k)}

    observed_baselines: dict[str, float] = {}
    baseline_pvalues: dict[str, float] = {}
    for fam in ("frobenius", "trace", "max_elementwise"):
        if fam in null.observed:
            observed_baselines[fam] = float(null.observed[fam])
            baseline_pvalues[fam] = permutation_p_value(
                null.observed[fam], null.replicates[fam]
            )
    if "superdiag" in null.observed:
        sd_obs = np.atleast_1d(null.observed["superdiag"])
        sd_rep = null.replicates["superdiag"]
        obs_min = float(per_order_pvalues(sd_obs, sd_rep).min())
        rep_mins = leave_one_out_pvalues(sd_rep).min(axis=1)
        observed_baselines["superdiag_minp"] = obs_min
        baseline_pvalues["superdiag_minp"] = minp_pvalue(obs_min, rep_mins)

    adaptive_mask = null.k_values <= null.K
    return TestReport(
        n1=d.n1,
        n2=d.n2,
        p=d.p,
        B=B,
        master_seed=master_seed,
        alpha=alpha,
        k_cutoff=k_cutoff,
        pooled_centering=pooled_centering,
        K=null.K,
        k_values=[int(k) for k in null.k_values],
        observed_kyfan={
            int(k): float(v) for k, v in zip(null.k_values, null.observed["kyfan"])
        },
        null_means={
            int(k): float(m)
            for k, m in zip(null.k_values[adaptive_mask], info["means"])
        },
        null_sds={
            int(k): float(s) for k, s in zip(null.k_values[adaptive_mask], info["sds"])
        },
        dropped_k=info["dropped"],
        t_ract_observed=t_obs,
        p_ract=p_ract_val,
        p_minp=p_minp_val,
        per_k_pvalues=per_k_pvalues,
        observed_baselines=observed_baselines,
        baseline_pvalues=baseline_pvalues,
        variance_floor_hit=null.variance_floor_hit,
        runtime=time.perf_counter() - start,
    )
