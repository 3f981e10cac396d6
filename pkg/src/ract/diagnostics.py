"""Population-level signal-to-noise calculus for Ky-Fan statistics.

For populations (Sigma1, Sigma2) sampled with group fractions (f1, f2), the
centered and scaled Ky-Fan(k) statistic is asymptotically normal with
variance

    omega^2_k = 2 * sum_s (1/f_s) * tr{ (U_k^T Sigma_s V_k)^2 },

where U_k holds the top-k eigenvectors of Delta = Sigma1 - Sigma2 ordered by
absolute eigenvalue and V_k = U_k * sign(eigenvalue). The SNR at order k is
the Ky-Fan(k) norm of Delta divided by omega_k; comparing orders k1 < k2
reduces to the increment ratios

    beta  = (signal_k2 - signal_k1) / signal_k1
    gamma = (omega^2_k2 - omega^2_k1) / omega^2_k1,

with order k2 winning iff beta >= sqrt(gamma + 1) - 1.

These quantities drive the ``diagnose`` CLI command and the Monte-Carlo
variance cross-check used in tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .spectral import check_symmetric, truncated_svd

__all__ = [
    "PopulationPair",
    "SNRProfile",
    "IncrementReport",
    "omega_sq",
    "snr_k",
    "increments",
    "spiked_pair",
    "mc_omega_sq",
]

#: minimal spacing required between singular values k and k+1 of the difference
EIGEN_GAP = 1e-8


@dataclass(frozen=True)
class PopulationPair:
    """Two population covariances plus the group sampling fractions."""

    sigma1: np.ndarray
    sigma2: np.ndarray
    f1: float = 0.5
    f2: float = 0.5

    def __post_init__(self):
        s1 = check_symmetric(self.sigma1)
        s2 = check_symmetric(self.sigma2)
        if s1.shape != s2.shape:
            raise ValueError("covariances must share a dimension")
        for name, s in (("sigma1", s1), ("sigma2", s2)):
            if np.linalg.eigvalsh(s)[0] <= 0:
                raise ValueError(f"{name} must be positive definite")
        if not (self.f1 > 0 and self.f2 > 0):
            raise ValueError("group fractions must be positive")
        if abs(self.f1 + self.f2 - 1.0) > 1e-12:
            raise ValueError("group fractions must sum to 1")
        object.__setattr__(self, "sigma1", s1)
        object.__setattr__(self, "sigma2", s2)

    @property
    def p(self) -> int:
        return self.sigma1.shape[0]

    def delta(self) -> np.ndarray:
        return self.sigma1 - self.sigma2

    def rank(self) -> int:
        sv = np.abs(np.linalg.eigvalsh(self.delta()))
        return int(np.sum(sv > EIGEN_GAP))


@dataclass(frozen=True)
class SNRProfile:
    k: int
    signal: float
    omega_sq: float
    snr: float


@dataclass(frozen=True)
class IncrementReport:
    k1: int
    k2: int
    beta: float
    gamma: float
    threshold: float  # sqrt(gamma + 1) - 1
    higher_k_wins: bool


def _top_k(pair: PopulationPair, k: int):
    spec = truncated_svd(pair.delta(), pair.p)
    if k > pair.rank():
        raise ValueError(f"k={k} exceeds the rank of the covariance difference")
    if k < pair.p and spec.values[k - 1] - spec.values[k] <= EIGEN_GAP:
        raise ValueError(
            f"singular values {k} and {k + 1} of the difference are tied; "
            "the top-k subspace is not identified"
        )
    return spec.values[:k], spec.left[:, :k], spec.right[:, :k]


def omega_sq(pair: PopulationPair, k: int) -> float:
    """Asymptotic variance scale of the Ky-Fan(k) statistic at this pair."""
    _, u, v = _top_k(pair, k)
    total = 0.0
    for sigma, f in ((pair.sigma1, pair.f1), (pair.sigma2, pair.f2)):
        m = u.T @ sigma @ v
        total += (1.0 / f) * float(np.sum(m * m.T))
    return 2.0 * total


def snr_k(pair: PopulationPair, k: int) -> SNRProfile:
    values, _, _ = _top_k(pair, k)
    signal = float(values.sum())
    var = omega_sq(pair, k)
    return SNRProfile(k=k, signal=signal, omega_sq=var, snr=signal / np.sqrt(var))


def increments(pair: PopulationPair, k1: int, k2: int) -> IncrementReport:
    """Compare SNR at orders k1 < k2 through the increment-ratio criterion."""
    if not 1 <= k1 < k2:
        raise ValueError("need 1 <= k1 < k2")
    s1 = snr_k(pair, k1)
    s2 = snr_k(pair, k2)
    beta = (s2.signal - s1.signal) / s1.signal
    gamma = (s2.omega_sq - s1.omega_sq) / s1.omega_sq
    threshold = float(np.sqrt(gamma + 1.0) - 1.0)
    return IncrementReport(
        k1=k1,
        k2=k2,
        beta=float(beta),
        gamma=float(gamma),
        threshold=threshold,
        higher_k_wins=bool(beta >= threshold),
    )


def spiked_pair(
    c: float, p: int = 6, spikes: tuple[float, ...] = (4.0, 1.0), f1: float = 0.5
) -> PopulationPair:
    """Scaled identity vs the same plus a diagonal spike: Sigma1 = c*I,
    Sigma2 = c*I + diag(spikes, 0, ...). The worked example behind the
    ``diagnose`` command."""
    if c <= 0:
        raise ValueError("c must be positive")
    if len(spikes) > p:
        raise ValueError("more spikes than dimensions")
    s1 = c * np.eye(p)
    s2 = s1.copy()
    s2[range(len(spikes)), range(len(spikes))] += np.asarray(spikes, dtype=float)
    return PopulationPair(sigma1=s1, sigma2=s2, f1=f1, f2=1.0 - f1)


def mc_omega_sq(
    pair: PopulationPair,
    k: int,
    n1: int,
    n2: int,
    reps: int,
    master_seed: int = 0,
) -> float:
    """Monte-Carlo estimate of omega^2_k as n * Var(T_k) over fresh draws.

    Independent of the analytic formula: simulates Gaussian groups, computes
    the Ky-Fan(k) norm of the sample covariance difference, and rescales the
    empirical variance. Used to cross-check ``omega_sq``.
    """
    from .scenarios import sample_gaussian  # local import to avoid a cycle

    n = n1 + n2
    values = np.empty(reps)
    for i in range(reps):
        g = _rng.stream(master_seed, _rng.DOMAIN_SAMPLE, i)
        x1 = sample_gaussian(pair.sigma1, n1, g)
        x2 = sample_gaussian(pair.sigma2, n2, g)
        z1 = x1 - x1.mean(axis=0)
        z2 = x2 - x2.mean(axis=0)
        delta = z1.T @ z1 / (n1 - 1) - z2.T @ z2 / (n2 - 1)
        sv = np.sort(np.abs(np.linalg.eigvalsh(delta)))[::-1]
        values[i] = sv[:k].sum()
    return float(n * values.var(ddof=1))
