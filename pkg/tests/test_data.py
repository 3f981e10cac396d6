from __future__ import annotations

import numpy as np
import pytest

from ract.data import (
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
from conftest import random_dataset


# ---------------------------------------------------------------------------
# container
# ---------------------------------------------------------------------------


def test_dataset_rejects_feature_mismatch():
    with pytest.raises(ValueError, match="feature count"):
        TwoSampleDataset(group1=np.ones((3, 4)), group2=np.ones((3, 5)))


def test_dataset_rejects_tiny_groups():
    with pytest.raises(DegenerateDataError):
        TwoSampleDataset(group1=np.ones((1, 4)), group2=np.ones((3, 4)))


def test_dataset_rejects_nonfinite():
    g = np.ones((3, 2))
    g[0, 0] = np.inf
    with pytest.raises(ValueError, match="finite"):
        TwoSampleDataset(group1=g, group2=np.ones((3, 2)))


def test_stacked_order():
    d = random_dataset(3, 4, 2, seed=1)
    np.testing.assert_array_equal(d.stacked()[:3], d.group1)
    np.testing.assert_array_equal(d.stacked()[3:], d.group2)


# ---------------------------------------------------------------------------
# covariances
# ---------------------------------------------------------------------------


def test_sample_covariance_double_loop_oracle():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(7, 4))
    xbar = x.mean(axis=0)
    oracle = np.zeros((4, 4))
    for i in range(7):
        oracle += np.outer(x[i] - xbar, x[i] - xbar)
    oracle /= 6
    np.testing.assert_allclose(sample_covariance(x), oracle, atol=1e-12)


def test_center_by_group_zeroes_column_means():
    d = center_by_group(random_dataset(6, 9, 5, seed=3))
    assert np.max(np.abs(d.group1.mean(axis=0))) < 1e-12
    assert np.max(np.abs(d.group2.mean(axis=0))) < 1e-12


def test_pooled_covariance_is_weighted_group_combination():
    d = random_dataset(8, 5, 4, seed=5)
    s1 = sample_covariance(d.group1)
    s2 = sample_covariance(d.group2)
    expected = ((d.n1 - 1) * s1 + (d.n2 - 1) * s2) / (d.n - 1)
    np.testing.assert_allclose(pooled_covariance(d), expected, atol=1e-12)


def test_pooled_covariance_global_centering_sees_mean_shift():
    d = random_dataset(8, 8, 3, seed=2)
    shifted = TwoSampleDataset(group1=d.group1 + 10.0, group2=d.group2)
    per_group = pooled_covariance(shifted, centering="group")
    globally = pooled_covariance(shifted, centering="global")
    # group centering is shift-invariant; global centering is not
    np.testing.assert_allclose(per_group, pooled_covariance(d), atol=1e-9)
    assert np.max(np.abs(globally - per_group)) > 1.0


def test_pooled_covariance_unknown_centering():
    with pytest.raises(ValueError):
        pooled_covariance(random_dataset(4, 4, 2), centering="nope")


# ---------------------------------------------------------------------------
# residualization
# ---------------------------------------------------------------------------


def test_residualize_orthogonal_to_covariates():
    rng = np.random.default_rng(11)
    d = random_dataset(12, 10, 6, seed=11)
    c1 = rng.normal(size=(12, 3))
    c2 = rng.normal(size=(10, 2))
    out = residualize(d, (c1, c2))
    assert np.max(np.abs(c1.T @ out.group1)) < 1e-10
    assert np.max(np.abs(c2.T @ out.group2)) < 1e-10


def test_residualize_is_idempotent():
    rng = np.random.default_rng(13)
    d = random_dataset(9, 9, 4, seed=13)
    covs = (rng.normal(size=(9, 2)), rng.normal(size=(9, 2)))
    once = residualize(d, covs)
    twice = residualize(once, covs)
    np.testing.assert_allclose(once.group1, twice.group1, atol=1e-12)


def test_residualize_on_ones_column_equals_centering():
    d = random_dataset(7, 6, 3, seed=17)
    out = residualize(d, (np.ones((7, 1)), np.ones((6, 1))))
    centered = center_by_group(d)
    np.testing.assert_allclose(out.group1, centered.group1, atol=1e-12)
    np.testing.assert_allclose(out.group2, centered.group2, atol=1e-12)


def test_residualize_rejects_rank_deficient_design():
    d = random_dataset(8, 8, 3, seed=19)
    c = np.ones((8, 2))  # duplicated column
    with pytest.raises(ValueError, match="rank"):
        residualize(d, (c, c))


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_two_file_roundtrip(tmp_path):
    f1 = _write(tmp_path / "a.csv", "x,y\n1,2\n3,4\n5,6\n")
    f2 = _write(tmp_path / "b.csv", "x,y\n0,1\n2,3\n")
    d, covs = load_two_files(f1, f2)
    assert covs is None
    assert d.feature_names == ("x", "y")
    np.testing.assert_allclose(d.group1, [[1, 2], [3, 4], [5, 6]])
    np.testing.assert_allclose(d.group2, [[0, 1], [2, 3]])


def test_two_file_header_mismatch(tmp_path):
    f1 = _write(tmp_path / "a.csv", "x,y\n1,2\n3,4\n")
    f2 = _write(tmp_path / "b.csv", "x,z\n1,2\n3,4\n")
    with pytest.raises(CsvFormatError, match="disagree"):
        load_two_files(f1, f2)


def test_grouped_file_sorted_label_order(tmp_path):
    f = _write(
        tmp_path / "d.csv",
        "grp,x,y\nb,9,9\na,1,2\nb,8,8\na,3,4\n",
    )
    d, _ = load_grouped_file(f, "grp")
    # label "a" sorts first
    np.testing.assert_allclose(d.group1, [[1, 2], [3, 4]])
    np.testing.assert_allclose(d.group2, [[9, 9], [8, 8]])
    assert d.feature_names == ("x", "y")


def test_grouped_file_covariates(tmp_path):
    f = _write(
        tmp_path / "d.csv",
        "grp,age,x,y\n1,30,1,2\n1,40,3,4\n2,50,5,6\n2,60,7,8\n",
    )
    d, covs = load_grouped_file(f, "grp", covariate_cols=("age",))
    assert d.feature_names == ("x", "y")
    np.testing.assert_allclose(covs[0][:, 0], [30, 40])
    np.testing.assert_allclose(covs[1][:, 0], [50, 60])


def test_missing_value_reports_line_and_column(tmp_path):
    f = _write(tmp_path / "d.csv", "x,y\n1,2\n3,\n5,6\n")
    with pytest.raises(CsvFormatError) as err:
        load_two_files(f, f)
    assert err.value.line == 3
    assert err.value.column == 2


def test_non_numeric_value_reports_position(tmp_path):
    f = _write(tmp_path / "d.csv", "x,y\n1,2\nfoo,4\n")
    with pytest.raises(CsvFormatError) as err:
        load_two_files(f, f)
    assert err.value.line == 3
    assert err.value.column == 1


def test_nan_counts_as_missing(tmp_path):
    f = _write(tmp_path / "d.csv", "x,y\n1,2\n3,NaN\n")
    with pytest.raises(CsvFormatError, match="non-finite"):
        load_two_files(f, f)


def test_ragged_row_rejected(tmp_path):
    f = _write(tmp_path / "d.csv", "x,y\n1,2\n3,4,5\n")
    with pytest.raises(CsvFormatError, match="fields"):
        load_two_files(f, f)


def test_duplicate_header_rejected(tmp_path):
    f = _write(tmp_path / "d.csv", "x,x\n1,2\n3,4\n")
    with pytest.raises(CsvFormatError, match="duplicate"):
        load_two_files(f, f)


def test_empty_file_rejected(tmp_path):
    f = _write(tmp_path / "d.csv", "")
    with pytest.raises(CsvFormatError, match="header"):
        load_two_files(f, f)


def test_header_only_rejected(tmp_path):
    f = _write(tmp_path / "d.csv", "x,y\n")
    with pytest.raises(CsvFormatError, match="data rows"):
        load_two_files(f, f)


def test_non_utf8_rejected(tmp_path):
    path = tmp_path / "d.csv"
    path.write_bytes(b"x,y\n1,\xff\n2,3\n")
    with pytest.raises(CsvFormatError, match="UTF-8"):
        load_two_files(str(path), str(path))


def test_grouped_file_needs_exactly_two_labels(tmp_path):
    f = _write(tmp_path / "d.csv", "g,x\na,1\nb,2\nc,3\na,1\nb,2\nc,3\n")
    with pytest.raises(DegenerateDataError, match="2 distinct"):
        load_grouped_file(f, "g")


def test_grouped_file_singleton_group_is_degenerate(tmp_path):
    f = _write(tmp_path / "d.csv", "g,x,y\na,1,2\na,3,4\nb,5,6\n")
    with pytest.raises(DegenerateDataError, match="at least 2"):
        load_grouped_file(f, "g")


def test_missing_group_column(tmp_path):
    f = _write(tmp_path / "d.csv", "x,y\n1,2\n3,4\n")
    with pytest.raises(CsvFormatError, match="group column"):
        load_grouped_file(f, "grp")


def test_missing_covariate_column(tmp_path):
    f = _write(tmp_path / "a.csv", "x,y\n1,2\n3,4\n")
    with pytest.raises(CsvFormatError, match="covariate"):
        load_two_files(f, f, covariate_cols=("age",))
