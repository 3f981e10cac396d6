"""Simulation drivers: size, power, and null-shape studies.

Each driver simulates datasets from the scenario generators, runs the
permutation test per dataset, and aggregates rejection rates into long-format
rows (one row per grid point x method) plus a JSON-ready summary. Every
random stream is keyed by (master_seed, domain, grid point, dataset index),
so results are reproducible bit-for-bit regardless of worker count.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, replace

import numpy as np

from . import rng
from .data import TwoSampleDataset
from .permutation import BASELINE_FAMILIES, DEFAULT_K_CUTOFF, TestReport, run_test
from .scenarios import ScenarioConfig, ar_covariance, build_scenario, sample_gaussian
from .stats import t_k_grid

__all__ = [
    "ExperimentResult",
    "default_methods",
    "run_type1",
    "run_power",
    "run_nullshape",
    "package_version",
    "config_hash",
    "write_rows_csv",
    "write_summary_json",
]

_DATASET_BLOCK = 25  # datasets per worker task; fixed so results never depend on workers

_KYFAN_RE = re.compile(r"kyfan([1-9]\d*)$")


def package_version() -> str:
    try:
        from importlib.metadata import version

        return version("ract")
    except Exception:  # running from a source tree without installation
        return "0.1.0"


def config_hash(config: dict) -> str:
    """Hash of the statistical configuration (canonical JSON, sha256).

    Worker budgets and output paths must not be part of ``config``: they do
    not affect results."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ExperimentResult:
    rows: list
    summary: dict
    meta: dict


# ---------------------------------------------------------------------------
# methods
# ---------------------------------------------------------------------------


def default_methods(n: int, p: int) -> tuple[str, ...]:
    """Adaptive tests plus the single Ky-Fan orders that fit the problem size."""
    singles = tuple(f"kyfan{k}" for k in (1, 4, 10, 25) if k <= min(n, p))
    return ("ract", "ract_minp") + singles


def _parse_methods(methods, n, p) -> tuple[tuple[str, ...], tuple[str, ...], tuple[int, ...]]:
    if methods is None:
        methods = default_methods(n, p)
    methods = tuple(methods)
    families = tuple(m for m in BASELINE_FAMILIES if m in methods)
    extras = []
    for m in methods:
        match = _KYFAN_RE.fullmatch(m)
        if match:
            k = int(match.group(1))
            if k > min(n, p):
                raise ValueError(f"{m} needs min(n, p) >= {k}, have {min(n, p)}")
            extras.append(k)
        elif m not in ("ract", "ract_minp") and m not in BASELINE_FAMILIES:
            raise ValueError(f"unknown method {m!r}")
    return methods, families, tuple(sorted(set(extras)))


def _method_pvalue(report: TestReport, method: str) -> float:
    if method == "ract":
        return report.p_ract
    if method == "ract_minp":
        return report.p_minp
    match = _KYFAN_RE.fullmatch(method)
    if match:
        return report.per_k_pvalues[int(match.group(1))]
    return report.baseline_pvalues[method]


# ---------------------------------------------------------------------------
# dataset evaluation (worker task)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Plan:
    scenario: ScenarioConfig
    n1: int
    n2: int
    B: int
    master_seed: int
    k_cutoff: float
    pooled_centering: str
    methods: tuple[str, ...]
    families: tuple[str, ...]
    extra_k: tuple[int, ...]
    point: int
    n_datasets: int
    null_draw: bool  # both groups sampled from sigma1
    fixed_pair: bool  # one population draw shared by all datasets


def _eval_block(args) -> list:
    plan, lo, hi = args
    records = []
    for d in range(lo, hi):
        scen_stream = rng.stream(
            plan.master_seed, rng.DOMAIN_SCENARIO, plan.point, 0 if plan.fixed_pair else d
        )
        sigma1, sigma2 = build_scenario(plan.scenario, scen_stream)
        if plan.null_draw:
            sigma2 = sigma1
        samp = rng.stream(plan.master_seed, rng.DOMAIN_SAMPLE, plan.point, d)
        x1 = sample_gaussian(sigma1, plan.n1, samp)
        x2 = sample_gaussian(sigma2, plan.n2, samp)
        report = run_test(
            TwoSampleDataset(group1=x1, group2=x2),
            B=plan.B,
            master_seed=plan.master_seed,
            k_cutoff=plan.k_cutoff,
            extra_k=plan.extra_k,
            families=plan.families,
            pooled_centering=plan.pooled_centering,
            dataset_index=plan.point * plan.n_datasets + d,
        )
        records.append(
            {
                "K": report.K,
                "pvalues": {m: _method_pvalue(report, m) for m in plan.methods},
            }
        )
    return records


def _run_plan(plan: _Plan, workers: int) -> list:
    blocks = [
        (plan, lo, min(lo + _DATASET_BLOCK, plan.n_datasets))
        for lo in range(0, plan.n_datasets, _DATASET_BLOCK)
    ]
    if workers > 1 and len(blocks) > 1:
        import concurrent.futures as cf
        import multiprocessing as mp

        ctx = mp.get_context("spawn")
        with cf.ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            pieces = list(pool.map(_eval_block, blocks))
    else:
        pieces = [_eval_block(b) for b in blocks]
    return [record for piece in pieces for record in piece]


def _aggregate(records, alpha, methods):
    reps = len(records)
    mean_k = float(np.mean([r["K"] for r in records]))
    out = []
    for m in methods:
        pvals = np.array([r["pvalues"][m] for r in records])
        rate = float(np.mean(pvals <= alpha))
        se = float(np.sqrt(rate * (1 - rate) / reps))
        out.append({"method": m, "rate": rate, "se": se, "reps": reps, "mean_K": mean_k})
    return out


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------


def run_type1(
    scenario: ScenarioConfig,
    n1: int,
    n2: int,
    n_datasets: int,
    B: int,
    master_seed: int,
    *,
    alpha: float = 0.05,
    methods=None,
    k_cutoff: float = DEFAULT_K_CUTOFF,
    pooled_centering: str = "group",
    workers: int = 1,
    fixed_pair: bool = False,
) -> ExperimentResult:
    """Size study: every observation drawn from the group-1 population."""
    methods, families, extra_k = _parse_methods(methods, n1 + n2, scenario.p)
    plan = _Plan(
        scenario=scenario,
        n1=n1,
        n2=n2,
        B=B,
        master_seed=master_seed,
        k_cutoff=k_cutoff,
        pooled_centering=pooled_centering,
        methods=methods,
        families=families,
        extra_k=extra_k,
        point=0,
        n_datasets=n_datasets,
        null_draw=True,
        fixed_pair=fixed_pair,
    )
    records = _run_plan(plan, workers)
    rows = [
        {"scenario": scenario.scenario, "grid": "tau_sq", "value": scenario.tau_sq, **agg}
        for agg in _aggregate(records, alpha, methods)
    ]
    config = {
        "experiment": "type1",
        "scenario": scenario.scenario,
        "p": scenario.p,
        "tau_sq": scenario.tau_sq,
        "w": scenario.w,
        "n1": n1,
        "n2": n2,
        "n_datasets": n_datasets,
        "B": B,
        "alpha": alpha,
        "k_cutoff": k_cutoff,
        "pooled_centering": pooled_centering,
        "methods": list(methods),
        "master_seed": master_seed,
        "fixed_pair": fixed_pair,
    }
    return _package(rows, config, master_seed, B)


def run_power(
    scenario: ScenarioConfig,
    n1: int,
    n2: int,
    n_datasets: int,
    B: int,
    master_seed: int,
    *,
    grid: str = "tau_sq",
    values=(),
    alpha: float = 0.05,
    methods=None,
    k_cutoff: float = DEFAULT_K_CUTOFF,
    pooled_centering: str = "group",
    workers: int = 1,
    fixed_pair: bool = False,
) -> ExperimentResult:
    """Power study along a grid.

    ``grid`` picks what varies: "tau_sq" (signal scale), "cutoff"
    (singular-value-mass cutoff for K), or "n_per_group" (per-group sample
    size, fresh draws at each size).
    """
    if grid not in ("tau_sq", "cutoff", "n_per_group"):
        raise ValueError(f"grid must be tau_sq, cutoff, or n_per_group, got {grid!r}")
    values = list(values)
    if not values:
        raise ValueError("a non-empty grid of values is required")
    rows = []
    for point, value in enumerate(values):
        cfg = scenario
        cur_n1, cur_n2, cur_cutoff = n1, n2, k_cutoff
        if grid == "tau_sq":
            cfg = replace(scenario, tau_sq=float(value))
        elif grid == "cutoff":
            cur_cutoff = float(value)
        else:
            cur_n1 = cur_n2 = int(value)
        methods_pt, families, extra_k = _parse_methods(
            methods, cur_n1 + cur_n2, cfg.p
        )
        plan = _Plan(
            scenario=cfg,
            n1=cur_n1,
            n2=cur_n2,
            B=B,
            master_seed=master_seed,
            k_cutoff=cur_cutoff,
            pooled_centering=pooled_centering,
            methods=methods_pt,
            families=families,
            extra_k=extra_k,
            point=point,
            n_datasets=n_datasets,
            null_draw=False,
            fixed_pair=fixed_pair,
        )
        records = _run_plan(plan, workers)
        rows.extend(
            {"scenario": scenario.scenario, "grid": grid, "value": value, **agg}
            for agg in _aggregate(records, alpha, methods_pt)
        )
    config = {
        "experiment": "power",
        "scenario": scenario.scenario,
        "p": scenario.p,
        "tau_sq": scenario.tau_sq,
        "w": scenario.w,
        "grid": grid,
        "values": [float(v) for v in values],
        "n1": n1,
        "n2": n2,
        "n_datasets": n_datasets,
        "B": B,
        "alpha": alpha,
        "k_cutoff": k_cutoff,
        "pooled_centering": pooled_centering,
        "methods": list(methods) if methods is not None else None,
        "master_seed": master_seed,
        "fixed_pair": fixed_pair,
    }
    return _package(rows, config, master_seed, B)


def run_nullshape(
    cov: str,
    p: int,
    n1: int,
    n2: int,
    n_datasets: int,
    master_seed: int,
    *,
    k_list=(1, 5, 10, 25),
    rho: float = 0.8,
    scenario: ScenarioConfig | None = None,
) -> ExperimentResult:
    """Distribution-shape study of the Ky-Fan statistics under the null.

    Both groups are drawn from one covariance ("iid", "ar", or a scenario's
    group-1 population); T_k is computed per dataset and standardized across
    datasets. Rows carry the standardized values; the summary reports
    moments and a normality check per k.
    """
    from scipy import stats as sps

    if cov == "iid":
        sigma = np.eye(p)
    elif cov == "ar":
        sigma = ar_covariance(p, rho)
    elif cov == "scenario":
        if scenario is None:
            raise ValueError("cov='scenario' needs a ScenarioConfig")
        sigma, _ = build_scenario(scenario, rng.stream(master_seed, rng.DOMAIN_SCENARIO, 0, 0))
        p = scenario.p
    else:
        raise ValueError(f"cov must be iid, ar, or scenario, got {cov!r}")

    ks = tuple(int(k) for k in k_list)
    if any(k < 1 or k > min(n1 + n2, p) for k in ks):
        raise ValueError(f"k values must lie in [1, min(n, p)] = [1, {min(n1 + n2, p)}]")
    k_max = max(ks)
    table = np.empty((n_datasets, len(ks)))
    for d in range(n_datasets):
        samp = rng.stream(master_seed, rng.DOMAIN_SAMPLE, 0, d)
        ds = TwoSampleDataset(
            group1=sample_gaussian(sigma, n1, samp),
            group2=sample_gaussian(sigma, n2, samp),
        )
        profile = t_k_grid(ds, k_max).values
        table[d] = profile[np.array(ks) - 1]

    means = table.mean(axis=0)
    sds = table.std(axis=0, ddof=1)
    z = (table - means) / sds
    rows = [
        {"k": k, "dataset": d, "z": float(z[d, j])}
        for j, k in enumerate(ks)
        for d in range(n_datasets)
    ]
    shape = {}
    for j, k in enumerate(ks):
        ks_stat = sps.kstest(z[:, j], "norm")
        shape[str(k)] = {
            "mean": float(means[j]),
            "sd": float(sds[j]),
            "skewness": float(sps.skew(z[:, j])),
            "excess_kurtosis": float(sps.kurtosis(z[:, j])),
            "ks_stat": float(ks_stat.statistic),
            "ks_pvalue": float(ks_stat.pvalue),
        }
    config = {
        "experiment": "nullshape",
        "cov": cov,
        "rho": rho if cov == "ar" else None,
        "scenario": scenario.scenario if scenario else None,
        "p": p,
        "n1": n1,
        "n2": n2,
        "n_datasets": n_datasets,
        "k_list": list(ks),
        "master_seed": master_seed,
    }
    result = _package(rows, config, master_seed, B=0)
    result.summary["shape"] = shape
    return result


def _package(rows, config, master_seed, B) -> ExperimentResult:
    meta = {
        "version": package_version(),
        "master_seed": master_seed,
        "B": B,
        "config_hash": config_hash(config),
    }
    summary = {"meta": meta, "config": config, "results": rows}
    return ExperimentResult(rows=rows, summary=summary, meta=meta)


# ---------------------------------------------------------------------------
# output files
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows_csv(path: str, rows: list, meta: dict) -> None:
    """Long-format CSV with '#'-prefixed metadata lines before the header."""
    if not rows:
        raise ValueError("no rows to write")
    fieldnames = list(rows[0].keys())
    lines = [f"# {key}={meta[key]}" for key in ("version", "master_seed", "B", "config_hash")]
    lines.append(",".join(fieldnames))
    for row in rows:
        lines.append(",".join(_fmt(row[name]) for name in fieldnames))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_json(path: str, summary: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
