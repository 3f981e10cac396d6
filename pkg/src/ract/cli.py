"""Command-line interface.

Exit codes: 0 success, 2 rejection at alpha under --strict-exit, 64 usage or
malformed input, 65 degenerate data.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass

from .data import (
    CsvFormatError,
    DegenerateDataError,
    load_grouped_file,
    load_two_files,
    residualize,
)
from .diagnostics import increments, mc_omega_sq, snr_k, spiked_pair, PopulationPair
from .experiments import (
    config_hash,
    package_version,
    run_nullshape,
    run_power,
    run_type1,
    write_rows_csv,
    write_summary_json,
)
from .permutation import BASELINE_FAMILIES, DEFAULT_K_CUTOFF, run_test
from .scenarios import SCENARIOS, ScenarioConfig, build_scenario
from . import rng

EXIT_OK = 0
EXIT_REJECT = 2
EXIT_USAGE = 64
EXIT_DATA = 65


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for test rejections here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    """Resolved test-run settings; hashable into the report's config_hash."""

    master_seed: int
    B: int
    alpha: float
    k_cutoff: float
    families: tuple[str, ...]
    extra_k: tuple[int, ...]
    pooled_centering: str
    decision: str
    workers: int

    def __post_init__(self):
        if self.B < 19:
            raise ValueError("B must be at least 19")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if not 0 < self.k_cutoff <= 1:
            raise ValueError("k-cutoff must be in (0, 1]")
        if self.decision not in ("minp", "max"):
            raise ValueError("decision must be minp or max")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def hash_payload(self) -> dict:
        # workers deliberately excluded: results never depend on the budget
        return {
            "command": "test",
            "master_seed": self.master_seed,
            "B": self.B,
            "alpha": self.alpha,
            "k_cutoff": self.k_cutoff,
            "families": list(self.families),
            "extra_k": list(self.extra_k),
            "pooled_centering": self.pooled_centering,
            "decision": self.decision,
        }


def _resolve_workers(flag_value) -> int:
    if flag_value is not None:
        return flag_value
    env = os.environ.get("RACT_WORKERS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"RACT_WORKERS must be an integer, got {env!r}") from None
    return 1


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def build_parser() -> _Parser:
    parser = _Parser(prog="ract", description=__doc__)
    parser.add_argument("--version", action="version", version=package_version())
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, b_default):
        sp.add_argument("--b", type=int, default=b_default, metavar="B",
                        help=f"permutation replicates (default {b_default})")
        sp.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        sp.add_argument("--alpha", type=float, default=0.05)
        sp.add_argument("--k-cutoff", type=float, default=DEFAULT_K_CUTOFF,
                        help="singular-value-mass cutoff for choosing K")
        sp.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: RACT_WORKERS env or 1)")
        sp.add_argument("--pooled-centering", choices=("group", "global"), default="group")

    t = sub.add_parser("test", help="two-sample covariance test on CSV data")
    t.add_argument("--group1", help="CSV with group-1 observations")
    t.add_argument("--group2", help="CSV with group-2 observations")
    t.add_argument("--data", help="single CSV with a group-label column")
    t.add_argument("--group-col", help="label column name for --data")
    t.add_argument("--covariates", default="",
                   help="comma-separated covariate columns to regress out per group")
    t.add_argument("--k", type=_int_list, default=(), metavar="K1,K2",
                   help="extra fixed Ky-Fan orders to report")
    t.add_argument("--families", default="all",
                   help="baseline statistics: 'all', 'none', or comma list of "
                        + ",".join(BASELINE_FAMILIES))
    t.add_argument("--decision", choices=("minp", "max"), default="minp",
                   help="which adaptive p-value drives reject_at_alpha")
    t.add_argument("--strict-exit", action="store_true",
                   help="exit 2 when the test rejects at alpha")
    t.add_argument("--out", help="write the JSON report here (default: stdout)")
    common(t, b_default=1000)

    def scenario_args(sp):
        sp.add_argument("--scenario", choices=SCENARIOS, required=True)
        sp.add_argument("--p", type=int, default=100)
        sp.add_argument("--tau-sq", type=float, default=0.5)
        sp.add_argument("--w", type=int, default=2)
        sp.add_argument("--n1", type=int, default=25)
        sp.add_argument("--n2", type=int, default=25)
        sp.add_argument("--datasets", type=int, default=500)
        sp.add_argument("--methods", default=None,
                        help="comma list; default: ract, ract_minp, kyfan{1,4,10,25}")
        sp.add_argument("--fixed-pair", action="store_true",
                        help="draw the scenario populations once for all datasets")
        sp.add_argument("--out", required=True, help="long-format CSV output path")

    s = sub.add_parser("simulate", help="size study under the null")
    scenario_args(s)
    common(s, b_default=199)

    p = sub.add_parser("power", help="power study along a grid")
    scenario_args(p)
    p.add_argument("--grid", choices=("tau_sq", "cutoff", "n_per_group"), default="tau_sq")
    p.add_argument("--values", type=_float_list, required=True,
                   help="comma-separated grid values")
    common(p, b_default=199)

    ns = sub.add_parser("nullshape", help="null distribution shape of the Ky-Fan grid")
    ns.add_argument("--cov", choices=("iid", "ar", "scenario"), default="iid")
    ns.add_argument("--rho", type=float, default=0.8)
    ns.add_argument("--scenario", choices=SCENARIOS)
    ns.add_argument("--tau-sq", type=float, default=0.5)
    ns.add_argument("--w", type=int, default=2)
    ns.add_argument("--p", type=int, default=100)
    ns.add_argument("--n1", type=int, default=25)
    ns.add_argument("--n2", type=int, default=25)
    ns.add_argument("--datasets", type=int, default=500)
    ns.add_argument("--k-list", type=_int_list, default=(1, 5, 10, 25))
    ns.add_argument("--seed", type=int, default=0)
    ns.add_argument("--out", required=True)

    d = sub.add_parser("diagnose", help="population SNR table for a covariance pair")
    d.add_argument("--pair", choices=("spiked", "scenario"), default="spiked")
    d.add_argument("--c", type=float, default=1.0, help="identity scale for --pair spiked")
    d.add_argument("--spikes", type=_float_list, default=(4.0, 1.0))
    d.add_argument("--p", type=int, default=6)
    d.add_argument("--f1", type=float, default=0.5, help="group-1 sampling fraction")
    d.add_argument("--scenario", choices=SCENARIOS)
    d.add_argument("--tau-sq", type=float, default=0.5)
    d.add_argument("--w", type=int, default=2)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--k-max", type=int, default=None,
                   help="largest order to tabulate (default: rank of the difference)")
    d.add_argument("--mc-check", type=int, default=0, metavar="REPS",
                   help="cross-check omega^2 against a Monte-Carlo variance estimate")
    d.add_argument("--mc-n", type=int, default=10000, help="per-group n for --mc-check")
    d.add_argument("--out", help="CSV output path (default: stdout)")

    return parser


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_test(args) -> int:
    if args.families == "all":
        families = BASELINE_FAMILIES
    elif args.families == "none":
        families = ()
    else:
        families = tuple(tok.strip() for tok in args.families.split(",") if tok.strip())
        unknown = set(families) - set(BASELINE_FAMILIES)
        if unknown:
            raise ValueError(f"unknown families: {sorted(unknown)}")
    cfg = RunConfig(
        master_seed=args.seed,
        B=args.b,
        alpha=args.alpha,
        k_cutoff=args.k_cutoff,
        families=families,
        extra_k=args.k,
        pooled_centering=args.pooled_centering,
        decision=args.decision,
        workers=_resolve_workers(args.workers),
    )

    covariate_cols = tuple(tok.strip() for tok in args.covariates.split(",") if tok.strip())
    if args.data:
        if not args.group_col:
            raise ValueError("--data requires --group-col")
        dataset, covs = load_grouped_file(args.data, args.group_col, covariate_cols)
    elif args.group1 and args.group2:
        dataset, covs = load_two_files(args.group1, args.group2, covariate_cols)
    else:
        raise ValueError("provide either --group1 and --group2, or --data with --group-col")
    if covs is not None:
        import numpy as np

        with_intercept = tuple(
            np.hstack([np.ones((c.shape[0], 1)), c]) for c in covs
        )
        dataset = residualize(dataset, with_intercept)

    report = run_test(
        dataset,
        B=cfg.B,
        master_seed=cfg.master_seed,
        alpha=cfg.alpha,
        k_cutoff=cfg.k_cutoff,
        extra_k=cfg.extra_k,
        families=cfg.families,
        pooled_centering=cfg.pooled_centering,
        workers=cfg.workers,
    )
    payload = report.to_json_dict(
        version=package_version(), config_hash=config_hash(cfg.hash_payload())
    )
    payload["reject_at_alpha"] = report.reject(cfg.decision)
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"runtime: {report.runtime:.3f}s", file=sys.stderr)
    if args.strict_exit and report.reject(cfg.decision):
        return EXIT_REJECT
    return EXIT_OK


def _write_experiment(result, out_path: str) -> None:
    write_rows_csv(out_path, result.rows, result.meta)
    base, _ = os.path.splitext(out_path)
    write_summary_json(base + ".summary.json", result.summary)


def cmd_simulate(args) -> int:
    cfg = ScenarioConfig(scenario=args.scenario, p=args.p, tau_sq=args.tau_sq, w=args.w)
    methods = tuple(args.methods.split(",")) if args.methods else None
    result = run_type1(
        cfg,
        args.n1,
        args.n2,
        args.datasets,
        args.b,
        args.seed,
        alpha=args.alpha,
        methods=methods,
        k_cutoff=args.k_cutoff,
        pooled_centering=args.pooled_centering,
        workers=_resolve_workers(args.workers),
        fixed_pair=args.fixed_pair,
    )
    _write_experiment(result, args.out)
    return EXIT_OK


def cmd_power(args) -> int:
    cfg = ScenarioConfig(scenario=args.scenario, p=args.p, tau_sq=args.tau_sq, w=args.w)
    methods = tuple(args.methods.split(",")) if args.methods else None
    result = run_power(
        cfg,
        args.n1,
        args.n2,
        args.datasets,
        args.b,
        args.seed,
        grid=args.grid,
        values=args.values,
        alpha=args.alpha,
        methods=methods,
        k_cutoff=args.k_cutoff,
        pooled_centering=args.pooled_centering,
        workers=_resolve_workers(args.workers),
        fixed_pair=args.fixed_pair,
    )
    _write_experiment(result, args.out)
    return EXIT_OK


def cmd_nullshape(args) -> int:
    scen = None
    if args.cov == "scenario":
        if not args.scenario:
            raise ValueError("--cov scenario requires --scenario")
        scen = ScenarioConfig(scenario=args.scenario, p=args.p, tau_sq=args.tau_sq, w=args.w)
    result = run_nullshape(
        args.cov,
        args.p,
        args.n1,
        args.n2,
        args.datasets,
        args.seed,
        k_list=args.k_list,
        rho=args.rho,
        scenario=scen,
    )
    _write_experiment(result, args.out)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    if args.pair == "spiked":
        pair = spiked_pair(args.c, p=args.p, spikes=tuple(args.spikes), f1=args.f1)
    else:
        if not args.scenario:
            raise ValueError("--pair scenario requires --scenario")
        scen = ScenarioConfig(scenario=args.scenario, p=args.p, tau_sq=args.tau_sq, w=args.w)
        s1, s2 = build_scenario(scen, rng.stream(args.seed, rng.DOMAIN_SCENARIO, 0, 0))
        if args.tau_sq == 0:
            raise ValueError("tau_sq = 0 gives identical populations; nothing to diagnose")
        pair = PopulationPair(sigma1=s1, sigma2=s2, f1=args.f1, f2=1 - args.f1)

    k_max = args.k_max if args.k_max is not None else pair.rank()
    k_max = min(k_max, pair.rank())
    lines = ["k,signal,omega_sq,snr,beta,gamma,threshold,higher_k_wins"]
    prev = None
    for k in range(1, k_max + 1):
        prof = snr_k(pair, k)
        if prev is None:
            inc = ("", "", "", "")
        else:
            rep = increments(pair, k - 1, k)
            inc = (repr(rep.beta), repr(rep.gamma), repr(rep.threshold),
                   str(rep.higher_k_wins).lower())
        lines.append(
            f"{k},{prof.signal!r},{prof.omega_sq!r},{prof.snr!r},"
            + ",".join(inc)
        )
        prev = prof
    meta_cfg = {
        "command": "diagnose",
        "pair": args.pair,
        "c": args.c,
        "spikes": list(args.spikes),
        "p": args.p,
        "f1": args.f1,
        "scenario": args.scenario,
        "tau_sq": args.tau_sq,
        "w": args.w,
        "master_seed": args.seed,
    }
    header = [
        f"# version={package_version()}",
        f"# master_seed={args.seed}",
        "# B=0",
        f"# config_hash={config_hash(meta_cfg)}",
    ]
    text = "\n".join(header + lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)

    if args.mc_check:
        for k in range(1, min(k_max, pair.rank()) + 1):
            analytic = snr_k(pair, k).omega_sq
            mc = mc_omega_sq(pair, k, args.mc_n, args.mc_n, args.mc_check, args.seed)
            rel = abs(analytic / mc - 1)
            print(
                f"mc-check k={k}: omega_sq={analytic:.4f} mc={mc:.4f} rel_err={rel:.4f}",
                file=sys.stderr,
            )
    return EXIT_OK


_COMMANDS = {
    "test": cmd_test,
    "simulate": cmd_simulate,
    "power": cmd_power,
    "nullshape": cmd_nullshape,
    "diagnose": cmd_diagnose,
}


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CsvFormatError as exc:
        print(f"ract: input error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateDataError as exc:
        print(f"ract: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"ract: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
