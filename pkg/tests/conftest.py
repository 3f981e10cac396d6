from __future__ import annotations

import numpy as np

from ract import TwoSampleDataset


def contrast_basis(n: int, seed: int = 0) -> np.ndarray:
    """Orthonormal (n, n-1) basis orthogonal to the all-ones vector."""
    rng = np.random.default_rng(seed)
    m = np.hstack([np.ones((n, 1)), rng.normal(size=(n, n - 1))])
    q, _ = np.linalg.qr(m)
    return q[:, 1:]


def rows_with_covariance(cov: np.ndarray, n: int, seed: int = 0) -> np.ndarray:
    """n rows whose sample covariance (divisor n-1) equals ``cov`` exactly
    and whose column means are zero, for p <= n-1."""
    cov = np.asarray(cov, dtype=float)
    p = cov.shape[0]
    assert p <= n - 1, "need n >= p + 1 for an exact-covariance construction"
    val, vec = np.linalg.eigh(cov)
    root = vec * np.sqrt(np.clip(val, 0, None))
    h = contrast_basis(n, seed)[:, :p]
    return np.sqrt(n - 1) * h @ root.T


def dataset_with_covariances(
    c1: np.ndarray, c2: np.ndarray, n1: int, n2: int, seed: int = 0
) -> TwoSampleDataset:
    """Dataset whose group sample covariances equal c1 and c2 exactly."""
    return TwoSampleDataset(
        group1=rows_with_covariance(c1, n1, seed=seed),
        group2=rows_with_covariance(c2, n2, seed=seed + 1),
    )


def random_dataset(n1: int, n2: int, p: int, seed: int = 0) -> TwoSampleDataset:
    rng = np.random.default_rng(seed)
    return TwoSampleDataset(
        group1=rng.normal(size=(n1, p)), group2=rng.normal(size=(n2, p))
    )
