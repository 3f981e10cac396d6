"""Rank-adaptive covariance testing.

Two-sample tests for covariance equality built on Ky-Fan(k) norms of the
sample covariance difference, calibrated by exact permutation, with an
adaptive choice of the truncation order k.
"""
from .data import (
    CsvFormatError,
    DegenerateDataError,
    TwoSampleDataset,
    center_by_group,
    load_grouped_file,
    load_two_files,
    pooled_covariance,
    residualize,
    sample_covariance,
)
from .diagnostics import (
    IncrementReport,
    PopulationPair,
    SNRProfile,
    increments,
    mc_omega_sq,
    omega_sq,
    snr_k,
    spiked_pair,
)
from .experiments import ExperimentResult, run_nullshape, run_power, run_type1
from .permutation import (
    PermutationNull,
    TestReport,
    build_null,
    minp_observed,
    minp_pvalue,
    minp_replicates,
    permutation_p_value,
    permute_labels,
    run_test,
    t_ract,
)
from .scenarios import ScenarioConfig, ar_covariance, build_scenario, lowrank_factor, sample_gaussian
from .spectral import SymmetricSpectrum, ky_fan_norm, ky_fan_profile, select_k, truncated_svd
from .stats import (
    StatisticVector,
    difference_covariance,
    frobenius_stat,
    max_elementwise_stat,
    superdiag_grid,
    superdiag_stat,
    t_k_grid,
    trace_stat,
)

try:
    from importlib.metadata import version as _version

    __version__ = _version("ract")
except Exception:  # pragma: no cover - source tree without install
    __version__ = "0.1.0"

__all__ = [
    "CsvFormatError",
    "DegenerateDataError",
    "TwoSampleDataset",
    "center_by_group",
    "load_grouped_file",
    "load_two_files",
    "pooled_covariance",
    "residualize",
    "sample_covariance",
    "IncrementReport",
    "PopulationPair",
    "SNRProfile",
    "increments",
    "mc_omega_sq",
    "omega_sq",
    "snr_k",
    "spiked_pair",
    "ExperimentResult",
    "run_nullshape",
    "run_power",
    "run_type1",
    "PermutationNull",
    "TestReport",
    "build_null",
    "minp_observed",
    "minp_pvalue",
    "minp_replicates",
    "permutation_p_value",
    "permute_labels",
    "run_test",
    "t_ract",
    "ScenarioConfig",
    "ar_covariance",
    "build_scenario",
    "lowrank_factor",
    "sample_gaussian",
    "SymmetricSpectrum",
    "ky_fan_norm",
    "ky_fan_profile",
    "select_k",
    "truncated_svd",
    "StatisticVector",
    "difference_covariance",
    "frobenius_stat",
    "max_elementwise_stat",
    "superdiag_grid",
    "superdiag_stat",
    "t_k_grid",
    "trace_stat",
]
