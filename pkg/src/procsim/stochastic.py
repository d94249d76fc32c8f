"""Seedable random source with named substreams and the samplers the mechanisms need.

Substreams are independent PCG64 generators derived from
``(master_seed, replication, purpose, key)``. Drawing extra values from one
substream never perturbs any other, which is what lets policy comparisons
share a demand realization (common random numbers).
"""

from __future__ import annotations

import math
import zlib

import numpy as np

__all__ = [
    "RandomSource",
    "sample_gamma_mean_one",
    "sample_negbin",
    "sample_truncated_negbin",
    "sample_categorical",
    "sample_mvnormal",
    "cholesky_psd",
]

_SIMPLEX_TOL = 1e-9
_CHOLESKY_JITTER = 1e-10


class RandomSource:
    """Master-seeded factory of named, mutually independent random streams."""

    def __init__(self, master_seed: int, replication: int = 0) -> None:
        self.master_seed = int(master_seed)
        self.replication = int(replication)
        self._streams: dict[tuple[str, int], np.random.Generator] = {}

    def stream(self, purpose: str, key: int = 0) -> np.random.Generator:
        """Return the generator for (purpose, key), creating it on first use."""
        cache_key = (purpose, int(key))
        gen = self._streams.get(cache_key)
        if gen is None:
            entropy = (
                self.master_seed & 0xFFFFFFFFFFFFFFFF,
                self.replication,
                zlib.crc32(purpose.encode("utf-8")),
                int(key),
            )
            gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
            self._streams[cache_key] = gen
        return gen


def sample_gamma_mean_one(
    variance: float,
    stream: np.random.Generator,
    size: int | None = None,
) -> float | np.ndarray:
    """Draw from the gamma law with mean 1 and the given variance.

    Parameterized as gamma(shape = 1/variance, scale = variance).
    """
    if variance <= 0:
        raise ValueError(f"variance must be positive, got {variance}")
    out = stream.gamma(1.0 / variance, variance, size=size)
    return float(out) if size is None else out


def sample_negbin(
    mean: float,
    dispersion: float,
    stream: np.random.Generator,
    size: int | None = None,
) -> int | np.ndarray:
    """Gamma-mixed Poisson count: Poisson(z * mean) with z ~ gamma(1, dispersion).

    Marginal mean is ``mean``; marginal variance ``mean + dispersion * mean**2``.
    """
    if mean < 0:
        raise ValueError(f"mean must be non-negative, got {mean}")
    if dispersion <= 0:
        raise ValueError(f"dispersion must be positive, got {dispersion}")
    z = stream.gamma(1.0 / dispersion, dispersion, size=size)
    out = stream.poisson(z * mean)
    return int(out) if size is None else out


def sample_truncated_negbin(
    mean: float,
    dispersion: float,
    stream: np.random.Generator,
    size: int | None = None,
) -> int | np.ndarray:
    """Zero-truncated gamma-mixed Poisson, sampled by rejection.

    Rejection preserves the count law conditioned on positivity (a "+1 shift"
    would distort the mean/variance relation). Means below 1e-6 short-circuit
    to 1, the truncated law's limit, to keep rejection bounded.
    """
    if mean < 1e-6:
        if size is None:
            return 1
        return np.ones(size, dtype=np.int64)
    if size is None:
        while True:
            q = sample_negbin(mean, dispersion, stream)
            if q >= 1:
                return q
    out = np.asarray(sample_negbin(mean, dispersion, stream, size=size))
    zero = out < 1
    while zero.any():
        out[zero] = sample_negbin(mean, dispersion, stream, size=int(zero.sum()))
        zero = out < 1
    return out


def sample_categorical(probs, stream: np.random.Generator) -> int:
    """Draw an index from a probability vector (validated as a simplex)."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probs must be a non-empty 1-d vector")
    if (p < 0).any():
        raise ValueError(f"probs must be non-negative, got {p}")
    total = p.sum()
    if abs(total - 1.0) > _SIMPLEX_TOL:
        raise ValueError(f"probs must sum to 1 within {_SIMPLEX_TOL}, got {total!r}")
    u = stream.random()
    cum = np.cumsum(p)
    cum[-1] = 1.0
    return int(np.searchsorted(cum, u, side="right"))


def cholesky_psd(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric PSD matrix, with tiny-jitter repair.

    A semi-definite matrix gets diagonal jitter 1e-10 before refactoring;
    anything that still fails (asymmetric, or indefinite beyond the jitter) is
    rejected with a diagnostic rather than silently repaired.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"covariance must be square, got shape {cov.shape}")
    if not np.allclose(cov, cov.T, atol=1e-12, rtol=1e-9):
        raise ValueError("covariance must be symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    jittered = cov + _CHOLESKY_JITTER * np.eye(cov.shape[0])
    try:
        return np.linalg.cholesky(jittered)
    except np.linalg.LinAlgError:
        eig_min = float(np.linalg.eigvalsh(cov).min())
        raise ValueError(
            f"covariance is not positive semi-definite (min eigenvalue {eig_min:.3e})"
        ) from None


def sample_mvnormal(
    mean: np.ndarray,
    cov: np.ndarray,
    stream: np.random.Generator,
    chol: np.ndarray | None = None,
) -> np.ndarray:
    """Draw mean + L z with L the (jitter-repaired) lower Cholesky factor.

    A zero covariance returns the mean exactly. A precomputed factor can be
    supplied to skip refactoring in hot paths.
    """
    mean = np.asarray(mean, dtype=float)
    if chol is None:
        cov = np.asarray(cov, dtype=float)
        if mean.shape != (cov.shape[0],):
            raise ValueError(
                f"mean shape {mean.shape} does not match covariance {cov.shape}"
            )
        if not cov.any():
            return mean.copy()
        chol = cholesky_psd(cov)
    z = stream.standard_normal(mean.shape[0])
    return mean + chol @ z


def expit(x: float) -> float:
    """Logistic function with overflow-safe branches."""
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x)) if x < 700 else 1.0
    return math.exp(x) / (1.0 + math.exp(x)) if x > -700 else 0.0
