"""Spectral primitives for symmetric matrices.

Everything downstream (test statistics, truncation-rank selection, theory
diagnostics) is built on the singular values of symmetric matrices. For a
symmetric A with eigendecomposition A = U diag(L) U^T, the singular values
are |L| and the aligned right singular vectors are v_j = sign(L_j) u_j, so a
single ``eigh`` call gives the full SVD without a separate factorization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SymmetricSpectrum",
    "check_symmetric",
    "truncated_svd",
    "ky_fan_norm",
    "ky_fan_profile",
    "select_k",
]

#: absolute tolerance for accepting a matrix as symmetric
SYMMETRY_ATOL = 1e-8


def check_symmetric(a: np.ndarray, atol: float = SYMMETRY_ATOL) -> np.ndarray:
    """Validate and return a square, finite, symmetric float array.

    Raises
    ------
    ValueError
        If ``a`` is not 2-D square, contains non-finite entries, or has
        ``max |a - a.T|`` above ``atol``.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > atol:
        raise ValueError(f"matrix is not symmetric: max |a - a.T| = {asym:.3e}")
    # exact symmetry downstream keeps eigh deterministic
    return (a + a.T) / 2.0


@dataclass(frozen=True)
class SymmetricSpectrum:
    """Leading part of the SVD of a symmetric matrix.

    Attributes
    ----------
    values : (k,) ndarray
        Singular values, descending and non-negative.
    left : (p, k) ndarray
        Left singular vectors (orthonormal columns).
    right : (p, k) ndarray
        Right singular vectors; column j equals ``left[:, j]`` times the sign
        of the j-th eigenvalue.
    dim : int
        Dimension p of the source matrix.
    """

    values: np.ndarray
    left: np.ndarray
    right: np.ndarray
    dim: int

    @property
    def k(self) -> int:
        return len(self.values)


def truncated_svd(a: np.ndarray, k: int) -> SymmetricSpectrum:
    """Top-``k`` singular triplets of a symmetric matrix.

    Computed from one eigendecomposition: singular values are the absolute
    eigenvalues sorted descending, left vectors are the matching eigenvectors,
    and right vectors carry the eigenvalue signs (sign(0) taken as +1).
    """
    a = check_symmetric(a)
    p = a.shape[0]
    if not 1 <= k <= p:
        raise ValueError(f"k must be in [1, {p}], got {k}")
    eigval, eigvec = np.linalg.eigh(a)
    order = np.argsort(np.abs(eigval), kind="stable")[::-1][:k]
    lam = eigval[order]
    left = eigvec[:, order]
    signs = np.where(lam < 0, -1.0, 1.0)
    return SymmetricSpectrum(values=np.abs(lam), left=left, right=left * signs, dim=p)


def ky_fan_norm(a: np.ndarray, k: int) -> float:
    """Ky-Fan(k) norm: the sum of the k largest singular values.

    k=1 is the operator norm; k=p is the nuclear norm.
    """
    a = check_symmetric(a)
    p = a.shape[0]
    if not 1 <= k <= p:
        raise ValueError(f"k must be in [1, {p}], got {k}")
    sv = np.sort(np.abs(np.linalg.eigvalsh(a)))[::-1]
    return float(np.sum(sv[:k]))


def ky_fan_profile(a: np.ndarray, k_max: int) -> np.ndarray:
    """All Ky-Fan(k) norms for k = 1..k_max, from one decomposition.

    Returns a (k_max,) array; entry k-1 equals ``ky_fan_norm(a, k)``.
    """
    a = check_symmetric(a)
    p = a.shape[0]
    if not 1 <= k_max <= p:
        raise ValueError(f"k_max must be in [1, {p}], got {k_max}")
    sv = np.sort(np.abs(np.linalg.eigvalsh(a)))[::-1]
    return np.cumsum(sv[:k_max])


def select_k(values: np.ndarray, cutoff: float, cap: int) -> int:
    """Smallest K <= cap whose top-K singular-value mass strictly exceeds
    ``cutoff`` as a fraction of the total mass; ``cap`` if none does.

    ``values`` are singular values in any order (sorted internally). The
    comparison is strict, so cutoff=1.0 always returns ``cap`` and a cutoff
    approaching 0 returns 1.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("values must be a non-empty 1-D array")
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ValueError("singular values must be finite and non-negative")
    if not 0 < cutoff <= 1:
        raise ValueError(f"cutoff must be in (0, 1], got {cutoff}")
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    total = float(values.sum())
    if total <= 0:
        raise ValueError("all singular values are zero; truncation rank is undefined")
    sv = np.sort(values)[::-1]
    upto = min(cap, sv.size)
    ratios = np.cumsum(sv[:upto]) / total
    hits = np.nonzero(ratios > cutoff)[0]
    if hits.size == 0:
        return int(cap)
    return int(hits[0] + 1)
