from __future__ import annotations

import numpy as np
import pytest

from ract.spectral import (
    check_symmetric,
    ky_fan_norm,
    ky_fan_profile,
    select_k,
    truncated_svd,
)


def _random_symmetric(p, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(p, p))
    return (a + a.T) / 2


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def test_check_symmetric_rejects_nonsquare():
    with pytest.raises(ValueError, match="square"):
        check_symmetric(np.ones((3, 4)))


def test_check_symmetric_rejects_nonfinite():
    a = np.eye(3)
    a[0, 1] = np.nan
    a[1, 0] = np.nan
    with pytest.raises(ValueError, match="finite"):
        check_symmetric(a)


def test_check_symmetric_rejects_asymmetry():
    a = np.eye(3)
    a[0, 1] = 1e-3
    with pytest.raises(ValueError, match="symmetric"):
        check_symmetric(a)


def test_check_symmetric_tolerates_roundoff():
    a = _random_symmetric(5, 0)
    a[0, 1] += 1e-12
    check_symmetric(a)  # within tolerance


# ---------------------------------------------------------------------------
# truncated SVD against the full-decomposition oracle
# ---------------------------------------------------------------------------


def test_truncated_svd_matches_full_svd_oracle():
    for seed in range(25):
        p = 3 + seed % 8
        a = _random_symmetric(p, seed)
        sv_oracle = np.linalg.svd(a, compute_uv=False)
        for k in range(1, p + 1):
            spec = truncated_svd(a, k)
            np.testing.assert_allclose(spec.values, sv_oracle[:k], atol=1e-10)


def test_truncated_svd_vector_conventions():
    a = _random_symmetric(7, 3)
    spec = truncated_svd(a, 7)
    # descending, non-negative
    assert np.all(spec.values[:-1] >= spec.values[1:])
    assert np.all(spec.values >= 0)
    # orthonormal left vectors
    np.testing.assert_allclose(spec.left.T @ spec.left, np.eye(7), atol=1e-10)
    # A u_j = sigma_j v_j ties the right vectors to the eigenvalue signs
    np.testing.assert_allclose(a @ spec.left, spec.right * spec.values, atol=1e-10)
    # full-rank reconstruction
    np.testing.assert_allclose(
        spec.left @ np.diag(spec.values) @ spec.right.T, a, atol=1e-8
    )


def test_truncated_svd_k_bounds():
    a = np.eye(4)
    with pytest.raises(ValueError):
        truncated_svd(a, 0)
    with pytest.raises(ValueError):
        truncated_svd(a, 5)


# ---------------------------------------------------------------------------
# Ky-Fan norms
# ---------------------------------------------------------------------------


def test_ky_fan_norm_simple_values():
    a = np.diag([3.0, 2.0, 1.0])
    assert ky_fan_norm(a, 1) == pytest.approx(3.0)
    assert ky_fan_norm(a, 2) == pytest.approx(5.0)
    assert ky_fan_norm(a, 3) == pytest.approx(6.0)


def test_ky_fan_norm_uses_absolute_eigenvalues():
    a = np.diag([-4.0, 1.0])
    assert ky_fan_norm(a, 1) == pytest.approx(4.0)
    assert ky_fan_norm(a, 2) == pytest.approx(5.0)


def test_ky_fan_extremes_are_operator_and_nuclear_norms():
    a = _random_symmetric(6, 11)
    sv = np.linalg.svd(a, compute_uv=False)
    assert ky_fan_norm(a, 1) == pytest.approx(sv[0], abs=1e-10)
    assert ky_fan_norm(a, 6) == pytest.approx(sv.sum(), abs=1e-10)


def test_ky_fan_profile_matches_individual_norms():
    a = _random_symmetric(8, 4)
    profile = ky_fan_profile(a, 8)
    for k in range(1, 9):
        assert profile[k - 1] == pytest.approx(ky_fan_norm(a, k), abs=1e-12)
    # cumulative sums of non-negative values never decrease
    assert np.all(np.diff(profile) >= 0)


def test_ky_fan_invariant_under_rotation():
    a = _random_symmetric(6, 5)
    q, _ = np.linalg.qr(np.random.default_rng(8).normal(size=(6, 6)))
    for k in (1, 3, 6):
        assert ky_fan_norm(q.T @ a @ q, k) == pytest.approx(ky_fan_norm(a, k), abs=1e-8)


# ---------------------------------------------------------------------------
# truncation-rank selection
# ---------------------------------------------------------------------------


def test_select_k_worked_examples():
    assert select_k(np.array([8.0, 1.0, 1.0]), 0.8, 3) == 2  # 0.8 is not > 0.8
    assert select_k(np.array([9.0, 1.0]), 0.8, 2) == 1
    assert select_k(np.ones(10), 0.8, 10) == 9


def test_select_k_strict_inequality_at_cutoff():
    # mass ratio exactly 0.75 at K=1 must not satisfy cutoff=0.75
    assert select_k(np.array([3.0, 1.0]), 0.75, 2) == 2


def test_select_k_cutoff_one_returns_cap():
    assert select_k(np.array([5.0, 3.0, 1.0]), 1.0, 2) == 2


def test_select_k_tiny_cutoff_returns_one():
    assert select_k(np.array([5.0, 3.0, 1.0]), 1e-9, 3) == 1


def test_select_k_sorts_input():
    assert select_k(np.array([1.0, 1.0, 8.0]), 0.8, 3) == 2


def test_select_k_all_zero_is_an_error():
    with pytest.raises(ValueError, match="zero"):
        select_k(np.zeros(4), 0.8, 4)


def test_select_k_rejects_bad_arguments():
    with pytest.raises(ValueError):
        select_k(np.array([1.0, -2.0]), 0.8, 2)
    with pytest.raises(ValueError):
        select_k(np.array([1.0]), 0.0, 1)
    with pytest.raises(ValueError):
        select_k(np.array([1.0]), 0.8, 0)
