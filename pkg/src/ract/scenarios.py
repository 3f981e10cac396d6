"""Synthetic covariance pairs for simulation studies.

Four families of alternatives, all of the form "identity plus structure"
with a scale knob tau_sq on the part that differs between groups:

s1_lowrank      Sigma_g = I_p + tau_sq * P_g with P_g a random rank-w
                projection; the two groups get independent projections.
s2_block_large  Two p/2 blocks; the first carries the changing scaled
                projection, the second a shared unscaled projection.
s3_block_small  Like s2 but the changing block is only 10 x 10, so the
                signal hides next to a large shared block.
s4_offdiag      Equicorrelation block (off-diagonal tau_sq) in which group 2
                flips the correlation sign between two index sets; the
                difference is rank 2 with large entries and no new diagonal.

Under tau_sq = 0 (with shared secondary structure) the two covariances are
identical, which is the null configuration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SCENARIOS",
    "ScenarioConfig",
    "lowrank_factor",
    "build_scenario",
    "sample_gaussian",
    "ar_covariance",
]

SCENARIOS = ("s1_lowrank", "s2_block_large", "s3_block_small", "s4_offdiag")

_SMALL_BLOCK = 10  # changing-block size in s3_block_small


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    p: int
    tau_sq: float
    w: int = 2  # rank of the random projections; ignored by s4_offdiag

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.p < 2:
            raise ValueError("p must be at least 2")
        if self.tau_sq < 0:
            raise ValueError("tau_sq must be non-negative")
        if self.w < 1:
            raise ValueError("w must be a positive integer")
        if self.scenario == "s1_lowrank" and self.w > self.p:
            raise ValueError("w cannot exceed p")
        if self.scenario in ("s2_block_large", "s4_offdiag") and self.p % 2:
            raise ValueError(f"{self.scenario} needs an even p")
        if self.scenario == "s2_block_large" and self.w > self.p // 2:
            raise ValueError("w cannot exceed the block size p/2")
        if self.scenario == "s3_block_small":
            if self.p <= _SMALL_BLOCK:
                raise ValueError(f"s3_block_small needs p > {_SMALL_BLOCK}")
            if self.w > _SMALL_BLOCK:
                raise ValueError(f"w cannot exceed the changing-block size {_SMALL_BLOCK}")
        if self.scenario == "s4_offdiag" and not self.tau_sq < 1:
            raise ValueError("s4_offdiag needs tau_sq < 1 to stay positive definite")


def lowrank_factor(dim: int, w: int, g: np.random.Generator) -> np.ndarray:
    """Orthonormal (dim, w) factor: top-w eigenvectors of A A^T, A standard normal."""
    if not 1 <= w <= dim:
        raise ValueError(f"w must be in [1, {dim}]")
    a = g.standard_normal((dim, dim))
    _, vec = np.linalg.eigh(a @ a.T)
    return vec[:, ::-1][:, :w]  # descending eigenvalue order


def _projection(dim: int, w: int, g: np.random.Generator) -> np.ndarray:
    u = lowrank_factor(dim, w, g)
    return u @ u.T


def build_scenario(cfg: ScenarioConfig, g: np.random.Generator):
    """Draw (sigma1, sigma2) for the configured scenario.

    Random factors are drawn in a fixed order (group-1 changing factor,
    group-2 changing factor, then any shared factor) so a given generator
    state always yields the same pair.
    """
    p, t2, w = cfg.p, cfg.tau_sq, cfg.w
    if cfg.scenario == "s1_lowrank":
        s1 = np.eye(p) + t2 * _projection(p, w, g)
        s2 = np.eye(p) + t2 * _projection(p, w, g)
        return s1, s2
    if cfg.scenario == "s2_block_large":
        half = p // 2
        return _two_block(p, t2 * _projection(half, w, g), t2 * _projection(half, w, g),
                          _projection(half, w, g))
    if cfg.scenario == "s3_block_small":
        return _two_block(p, t2 * _projection(_SMALL_BLOCK, w, g),
                          t2 * _projection(_SMALL_BLOCK, w, g),
                          _projection(p - _SMALL_BLOCK, w, g))
    # s4_offdiag: no randomness in the populations themselves
    half = p // 2
    a1 = (1 - t2) * np.eye(half) + t2 * np.ones((half, half))
    sign = np.ones(half)
    sign[math.ceil(p / 4) - 1 :] = -1.0  # flip between index sets, symmetrically
    a2 = (1 - t2) * np.eye(half) + t2 * np.outer(sign, sign)
    s1 = np.eye(p)
    s2 = np.eye(p)
    s1[:half, :half] = a1
    s2[:half, :half] = a2
    return s1, s2


def _two_block(p, changing1, changing2, shared):
    b = changing1.shape[0]
    s1 = np.eye(p)
    s2 = np.eye(p)
    s1[:b, :b] += changing1
    s2[:b, :b] += changing2
    s1[b:, b:] += shared
    s2[b:, b:] += shared
    return s1, s2


def sample_gaussian(sigma: np.ndarray, n: int, g: np.random.Generator) -> np.ndarray:
    """n zero-mean Gaussian rows with covariance ``sigma`` (symmetric PSD),
    through an eigendecomposition factor."""
    sigma = np.asarray(sigma, dtype=float)
    val, vec = np.linalg.eigh((sigma + sigma.T) / 2)
    if val[0] < -1e-10 * max(1.0, abs(val[-1])):
        raise ValueError("covariance is not positive semi-definite")
    root = vec * np.sqrt(np.clip(val, 0, None))
    return g.standard_normal((n, sigma.shape[0])) @ root.T


def ar_covariance(p: int, rho: float = 0.8) -> np.ndarray:
    """Autoregressive structure: sigma[i, j] = rho^|i-j|."""
    if not -1 < rho < 1:
        raise ValueError("rho must be in (-1, 1)")
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])
