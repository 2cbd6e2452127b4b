"""Stationary bootstrap with automatic block-length choice and null-centered bands."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import DegenerateStatisticError, InferenceError
from .series import AlignedPair

__all__ = [
    "BootstrapSpec",
    "BandResult",
    "stationary_bootstrap_indices",
    "replicate_rng",
    "replicate_indices",
    "block_length",
    "block_length_rule",
    "pair_block_prob",
    "centered_band",
    "null_band",
    "resample_pair",
]


@dataclass(frozen=True)
class BootstrapSpec:
    """Bootstrap configuration.

    ``p_geo`` is the probability of starting a new block (the reciprocal of
    the mean block length). ``None`` selects it from the data with
    :func:`block_length_rule`.
    """

    B: int = 1000
    p_geo: float | None = None
    seed: int = 0
    level: float = 0.95

    def __post_init__(self) -> None:
        if self.B < 1:
            raise ValueError("B must be >= 1")
        if self.p_geo is not None and not 0.0 < self.p_geo <= 1.0:
            raise ValueError("p_geo must lie in (0, 1]")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")


@dataclass(frozen=True)
class BandResult:
    lo: float
    hi: float
    replicates: np.ndarray | None = None

    def excludes(self, value: float) -> bool:
        return value < self.lo or value > self.hi


def stationary_bootstrap_indices(T: int, p_geo: float, rng: np.random.Generator) -> np.ndarray:
    """Politis-Romano resampling indices of length ``T``.

    Blocks start at uniform positions and have geometric(``p_geo``) lengths;
    positions wrap around modulo ``T``.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if not 0.0 < p_geo <= 1.0:
        raise ValueError("p_geo must lie in (0, 1]")
    starts = rng.integers(0, T, size=T)
    new_block = rng.random(T) < p_geo
    new_block[0] = True
    pos = np.arange(T)
    block_head = np.maximum.accumulate(np.where(new_block, pos, 0))
    return (starts[block_head] + (pos - block_head)) % T


def replicate_rng(seed: int, b: int) -> np.random.Generator:
    # one independent stream per (seed, replicate) so any execution order gives the same draws
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))


def replicate_indices(T: int, p_geo: float, seed: int, B: int, first: int = 0) -> np.ndarray:
    """Index rows for replicates ``first..B-1``; row ``b`` depends only on ``(seed, b)``."""
    out = np.empty((B - first, T), dtype=np.intp)
    for i, b in enumerate(range(first, B)):
        out[i] = stationary_bootstrap_indices(T, p_geo, replicate_rng(seed, b))
    return out


def _flat_top(x: np.ndarray) -> np.ndarray:
    x = np.abs(x)
    return np.where(x <= 0.5, 1.0, 2.0 * (1.0 - x))


def block_length(values) -> float:
    """Politis-White automatic mean block length for the stationary bootstrap.

    Includes the Patton-Politis-White (2009) correction of the ``D_SB``
    constant. The result is capped at ``ceil(min(3 sqrt(n), n / 3))`` and then
    clamped to ``[1, n / 3]``.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 10:
        raise ValueError(f"block length rule needs at least 10 observations, got {n}")
    e = x - x.mean()
    gamma0 = e @ e / n
    if not gamma0 > 0:
        raise ValueError("block length rule is undefined for a constant series")

    kn = max(5, math.ceil(math.sqrt(math.log10(n))))
    m_max = math.ceil(math.sqrt(n)) + kn
    m_max = min(m_max, n - 1)
    b_max = math.ceil(min(3.0 * math.sqrt(n), n / 3.0))
    crit = 2.0 * math.sqrt(math.log10(n) / n)

    acov = np.array([e[k:] @ e[: n - k] / n for k in range(m_max + 1)])
    acorr = np.abs(acov[1:] / gamma0)  # lags 1..m_max

    # smallest m with kn consecutive insignificant autocorrelations after it
    m_hat = None
    for m in range(0, m_max - kn + 1):
        if np.all(acorr[m : m + kn] < crit):
            m_hat = m
            break
    M = m_max if m_hat is None else min(2 * max(m_hat, 1), m_max)

    k = np.arange(1, M + 1)
    w = _flat_top(k / M)
    g = 2.0 * np.sum(w * k * acov[1 : M + 1])
    lrv = acov[0] + 2.0 * np.sum(w * acov[1 : M + 1])
    if lrv <= 0:
        b = 1.0
    else:
        d_sb = 2.0 * lrv**2
        b = (2.0 * g**2 / d_sb) ** (1.0 / 3.0) * n ** (1.0 / 3.0)
    b = min(b, b_max)
    return float(min(max(b, 1.0), n / 3.0))


def block_length_rule(values) -> float:
    """Block probability ``1 / b`` for the stationary bootstrap of ``values``."""
    return 1.0 / block_length(values)


def pair_block_prob(pair: AlignedPair) -> float:
    """One block probability per pair: reciprocal of the averaged block lengths."""
    b = 0.5 * (block_length(pair.a.ret) + block_length(pair.b.ret))
    return 1.0 / b


def resample_pair(pair: AlignedPair, idx: np.ndarray) -> AlignedPair:
    """Apply one index sequence to both members, keeping rows intact.

    The original date vector is kept so that the result is a valid pair; the
    values in each position come from row ``idx[t]``.
    """

    def pick(s):
        return replace(s, ret=s.ret[idx], rv=None if s.rv is None else s.rv[idx])

    return AlignedPair(pick(pair.a), pick(pair.b))


def centered_band(draws, level: float) -> tuple[np.ndarray, np.ndarray]:
    """Quantiles of the mean-centered draws at ``(1 -/+ level) / 2``, widened to contain 0.

    Draws are centered at their own mean rather than at the sample estimate:
    short blocks break lagged dependence, so replicates cluster around zero
    instead of around the estimate, and centering at the estimate shifts the
    band by it. ``draws`` may be 1-d or ``(B, K)``; NaN rows are ignored.
    """
    draws = np.asarray(draws, dtype=float)
    centered = draws - np.nanmean(draws, axis=0)
    alpha = 1.0 - level
    lo = np.nanquantile(centered, alpha / 2.0, axis=0)
    hi = np.nanquantile(centered, 1.0 - alpha / 2.0, axis=0)
    return np.minimum(lo, 0.0), np.maximum(hi, 0.0)


def null_band(
    stat: Callable[[AlignedPair], float],
    pair: AlignedPair,
    spec: BootstrapSpec,
    keep_replicates: bool = False,
) -> BandResult:
    """Null band for ``stat`` from jointly resampled rows of ``pair``.

    Raises
    ------
    InferenceError
        More than half of the replicates produced a degenerate statistic.
    """
    stat(pair)  # fails early when the sample statistic is degenerate
    T = len(pair)
    p = spec.p_geo if spec.p_geo is not None else pair_block_prob(pair)
    draws = np.full(spec.B, np.nan)
    failures = 0
    last_err = None
    for b in range(spec.B):
        idx = stationary_bootstrap_indices(T, p, replicate_rng(spec.seed, b))
        try:
            draws[b] = stat(resample_pair(pair, idx))
        except DegenerateStatisticError as err:
            failures += 1
            last_err = err
    if failures * 2 > spec.B:
        raise InferenceError(
            f"{failures} of {spec.B} bootstrap replicates were degenerate: {last_err}"
        )
    lo, hi = centered_band(draws, spec.level)
    return BandResult(float(lo), float(hi), draws if keep_replicates else None)
