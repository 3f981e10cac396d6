from __future__ import annotations

import itertools
import logging

import numpy as np
import pytest

from ract import TwoSampleDataset
from ract.data import DegenerateDataError
from ract.kernels import pooled_singular_values
from ract.permutation import (
    PermutationNull,
    build_null,
    leave_one_out_pvalues,
    minp_observed,
    minp_pvalue,
    minp_replicates,
    per_order_pvalues,
    permutation_p_value,
    permute_labels,
    run_test,
    t_ract,
)
from ract.spectral import select_k
from conftest import random_dataset


# ---------------------------------------------------------------------------
# p-value arithmetic
# ---------------------------------------------------------------------------


def test_permutation_p_value_counts_ties_as_extreme():
    assert permutation_p_value(2.0, np.array([1.0, 2.0, 3.0])) == pytest.approx(3 / 4)


def test_permutation_p_value_extremes():
    assert permutation_p_value(10.0, np.array([1.0, 2.0, 3.0])) == pytest.approx(1 / 4)
    assert permutation_p_value(0.0, np.array([1.0, 2.0, 3.0])) == pytest.approx(1.0)


def test_minp_worked_example():
    # single order, three replicates (3, 1, 2), observed 4
    observed = np.array([4.0])
    reps = np.array([[3.0], [1.0], [2.0]])
    p_k = per_order_pvalues(observed, reps)
    assert p_k[0] == pytest.approx(1 / 4)
    loo = leave_one_out_pvalues(reps)
    np.testing.assert_allclose(loo[:, 0], [1 / 3, 1.0, 2 / 3])
    assert minp_pvalue(p_k.min(), loo.min(axis=1)) == pytest.approx(1 / 4)


def test_leave_one_out_handles_ties():
    reps = np.array([[2.0], [2.0], [1.0]])
    loo = leave_one_out_pvalues(reps)
    # row 1: 1 + #{other rows >= 2} = 1 + 1 -> 2/3; same for row 2; row 3: 3/3
    np.testing.assert_allclose(loo[:, 0], [2 / 3, 2 / 3, 1.0])


# ---------------------------------------------------------------------------
# permute_labels
# ---------------------------------------------------------------------------


def test_permute_labels_is_a_pure_function_of_seed_and_index():
    d = random_dataset(4, 5, 3, seed=0)
    a = permute_labels(d, 3, master_seed=11)
    b = permute_labels(d, 3, master_seed=11)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, permute_labels(d, 4, master_seed=11))
    assert not np.array_equal(a, permute_labels(d, 3, master_seed=12))


def test_permute_labels_rejects_zero_index():
    d = random_dataset(3, 3, 2, seed=0)
    with pytest.raises(ValueError):
        permute_labels(d, 0, master_seed=1)


def test_permute_labels_uniform_over_splits():
    # n = 6, n1 = 2: all C(6,2) = 15 unordered splits should be equally likely
    d = random_dataset(2, 4, 2, seed=0)
    draws = 1_000_000
    counts: dict[frozenset, int] = {}
    for b in range(1, draws + 1):
        key = frozenset(permute_labels(d, b, master_seed=5)[:2].tolist())
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 15
    freqs = np.array(list(counts.values())) / draws
    assert np.max(np.abs(freqs - 1 / 15)) < 0.005


# ---------------------------------------------------------------------------
# null construction
# ---------------------------------------------------------------------------


def test_build_null_table_shapes_and_reproducibility():
    d = random_dataset(8, 9, 6, seed=2)
    null1 = build_null(d, B=40, master_seed=3)
    null2 = build_null(d, B=40, master_seed=3)
    assert null1.replicates["kyfan"].shape == (40, null1.k_values.max())
    for fam in ("kyfan", "frobenius", "trace", "max_elementwise", "superdiag"):
        np.testing.assert_array_equal(null1.replicates[fam], null2.replicates[fam])
        np.testing.assert_array_equal(
            np.atleast_1d(null1.observed[fam]), np.atleast_1d(null2.observed[fam])
        )


def test_build_null_worker_budget_does_not_change_results():
    d = random_dataset(10, 10, 12, seed=8)
    serial = build_null(d, B=130, master_seed=21, families=("frobenius",))
    parallel = build_null(d, B=130, master_seed=21, families=("frobenius",), workers=3)
    np.testing.assert_array_equal(serial.replicates["kyfan"], parallel.replicates["kyfan"])
    np.testing.assert_array_equal(
        serial.replicates["frobenius"], parallel.replicates["frobenius"]
    )


def test_truncation_rank_fixed_by_unpermuted_pooling():
    d = random_dataset(9, 8, 7, seed=5)
    null = build_null(d, B=25, master_seed=1, k_cutoff=0.8)
    expected = select_k(pooled_singular_values(d), 0.8, cap=min(d.n, d.p))
    assert null.K == expected
    # permuting group labels changes nothing: K came from the observed grouping
    np.testing.assert_array_equal(null.k_values, np.arange(1, max(null.K, 1) + 1))


def test_build_null_extends_grid_for_fixed_orders():
    d = random_dataset(12, 12, 5, seed=9)
    null = build_null(d, B=19, master_seed=2, extra_k=(5,))
    assert null.k_values.max() >= 5
    assert null.K <= null.k_values.max()


def test_build_null_rejects_small_B_and_bad_orders():
    d = random_dataset(6, 6, 4, seed=3)
    with pytest.raises(ValueError, match="B"):
        build_null(d, B=18, master_seed=0)
    with pytest.raises(ValueError, match="order"):
        build_null(d, B=19, master_seed=0, extra_k=(5,))
    with pytest.raises(ValueError, match="famil"):
        build_null(d, B=19, master_seed=0, families=("mystery",))


def test_replicates_live_on_the_exhaustive_split_set():
    # every permutation statistic must equal one produced by some label split
    d = random_dataset(2, 2, 2, seed=31)
    null = build_null(d, B=19, master_seed=7, families=())
    from ract.kernels import EvalRequest, evaluate_splits

    req = EvalRequest(k_values=null.k_values)
    values = []
    for combo in itertools.combinations(range(4), 2):
        rest = [i for i in range(4) if i not in combo]
        split = np.array([list(combo) + rest])
        values.append(evaluate_splits(d.stacked(), 2, split, req)["kyfan"][0])
    values = np.array(values)
    for row in null.replicates["kyfan"]:
        assert np.min(np.abs(values - row).max(axis=1)) < 1e-12


# ---------------------------------------------------------------------------
# standardized max
# ---------------------------------------------------------------------------


def _manual_null(reps: np.ndarray, observed: np.ndarray) -> PermutationNull:
    k = reps.shape[1]
    return PermutationNull(
        B=reps.shape[0],
        master_seed=0,
        dataset_index=0,
        K=k,
        k_values=np.arange(1, k + 1),
        observed={"kyfan": observed},
        replicates={"kyfan": reps},
        superdiag_q=None,
        variance_floor_hit=False,
    )


def test_t_ract_standardization_against_hand_computation():
    rng = np.random.default_rng(0)
    reps = rng.normal(size=(19, 3)).cumsum(axis=1) + 5
    observed = np.array([5.2, 6.0, 7.1])
    null = _manual_null(reps, observed)
    t_obs, t_rep, info = t_ract(null)
    means = reps.mean(axis=0)
    sds = reps.std(axis=0, ddof=1)
    assert t_obs == pytest.approx(np.max((observed - means) / sds))
    np.testing.assert_allclose(t_rep, np.max((reps - means) / sds, axis=1))
    assert info["dropped"] == []


def test_t_ract_drops_degenerate_columns(caplog):
    rng = np.random.default_rng(1)
    reps = np.column_stack([np.full(19, 2.0), rng.normal(size=19)])
    null = _manual_null(reps, np.array([2.0, 1.0]))
    with caplog.at_level(logging.WARNING):
        _, _, info = t_ract(null)
    assert info["dropped"] == [1]
    assert "degenerate" in caplog.text


def test_t_ract_all_degenerate_is_an_error():
    reps = np.full((19, 2), 3.0)
    null = _manual_null(reps, np.array([3.0, 3.0]))
    with pytest.raises(DegenerateDataError):
        t_ract(null)


def test_minp_restricted_to_adaptive_grid():
    rng = np.random.default_rng(2)
    reps = rng.normal(size=(19, 4))
    null = PermutationNull(
        B=19,
        master_seed=0,
        dataset_index=0,
        K=2,  # orders 3 and 4 are fixed extras, not part of the adaptive grid
        k_values=np.arange(1, 5),
        observed={"kyfan": np.array([0.1, 0.2, 99.0, 99.0])},
        replicates={"kyfan": reps},
        superdiag_q=None,
        variance_floor_hit=False,
    )
    obs = minp_observed(null)
    expected = per_order_pvalues(
        null.observed["kyfan"][:2], reps[:, :2]
    ).min()
    assert obs == pytest.approx(expected)
    assert minp_replicates(null).shape == (19,)


# ---------------------------------------------------------------------------
# full test runs
# ---------------------------------------------------------------------------


def test_run_test_report_contents():
    d = random_dataset(10, 11, 6, seed=13)
    report = run_test(d, B=39, master_seed=4, extra_k=(6,))
    assert report.n1 == 10 and report.n2 == 11 and report.p == 6
    assert set(report.per_k_pvalues) == set(report.k_values)
    assert sorted(report.null_means) == list(range(1, report.K + 1))
    lattice = (39 + 1) * np.array(
        [report.p_ract, report.p_minp, *report.per_k_pvalues.values()]
    )
    np.testing.assert_allclose(lattice, np.round(lattice), atol=1e-9)
    for name in ("frobenius", "trace", "max_elementwise", "superdiag_minp"):
        assert 0 < report.baseline_pvalues[name] <= 1
    # observed Ky-Fan profile is a cumulative sum: non-decreasing
    vals = [report.observed_kyfan[k] for k in report.k_values]
    assert np.all(np.diff(vals) >= -1e-12)
    assert report.runtime is not None and report.runtime > 0


def test_run_test_is_deterministic():
    d = random_dataset(9, 9, 5, seed=17)
    r1 = run_test(d, B=29, master_seed=6)
    r2 = run_test(d, B=29, master_seed=6)
    d1 = r1.to_json_dict("v", "h")
    d2 = r2.to_json_dict("v", "h")
    assert d1 == d2


def test_run_test_rejects_under_strong_signal():
    rng = np.random.default_rng(23)
    g1 = rng.normal(size=(25, 4)) * np.array([6.0, 1.0, 1.0, 1.0])
    g2 = rng.normal(size=(25, 4))
    report = run_test(TwoSampleDataset(group1=g1, group2=g2), B=99, master_seed=3)
    assert report.p_minp <= 0.05
    assert report.p_ract <= 0.05
