"""Quantile-hit processes, cross-/auto-quantilograms and portmanteau statistics."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bootstrap import BootstrapSpec, centered_band, pair_block_prob, replicate_indices
from .errors import DegenerateStatisticError, InferenceError
from .series import AlignedPair, QuantileRange, ReturnSeries, empirical_quantile, order_statistic_rank

__all__ = [
    "HitSeries",
    "CrossQuantilogramResult",
    "hit_process",
    "hit_bounds",
    "cross_quantilogram",
    "quantilogram_curve",
    "quantilogram_grid",
    "auto_quantilogram",
    "box_ljung",
    "box_pierce",
]


@dataclass(frozen=True)
class HitSeries:
    psi: np.ndarray
    range: QuantileRange

    @property
    def n(self) -> int:
        return self.psi.size

    @property
    def hits(self) -> np.ndarray:
        return self.psi > 0


def hit_bounds(values, rng: QuantileRange) -> tuple[float, float]:
    """Sample quantile bounds of the half-open event ``(q(lo), q(hi)]``."""
    lo = -math.inf if rng.lo == 0.0 else empirical_quantile(values, rng.lo)
    hi = math.inf if rng.hi == 1.0 else empirical_quantile(values, rng.hi)
    return lo, hi


def hit_process(values, rng: QuantileRange) -> HitSeries:
    """Centered indicator of ``q(lo) < y <= q(hi)`` with unconditional sample quantiles.

    Entries equal ``1 - (hi - lo)`` inside the range and ``-(hi - lo)``
    outside. ``lo = 0`` and ``hi = 1`` are open bounds at -inf and +inf.
    """
    y = np.asarray(values, dtype=float)
    q_lo, q_hi = hit_bounds(y, rng)
    w = rng.hi - rng.lo
    inside = (y > q_lo) & (y <= q_hi)
    return HitSeries(np.where(inside, 1.0 - w, -w), rng)


def _seq_sum(x: np.ndarray) -> float:
    # left-to-right accumulation; np.sum's pairwise order would not match a plain loop
    return float(np.cumsum(x)[-1]) if x.size else 0.0


def _rho_from_hits(psi1: np.ndarray, psi2: np.ndarray, k: int) -> float:
    T = psi1.size
    x1 = psi1[k:]
    x2 = psi2[: T - k]
    if np.all(x1 == x1[0]) or np.all(x2 == x2[0]):
        raise DegenerateStatisticError(f"constant hit series over the lag-{k} index set")
    num = _seq_sum(x1 * x2)
    d1 = _seq_sum(x1 * x1)
    d2 = _seq_sum(x2 * x2)
    return num / (math.sqrt(d1) * math.sqrt(d2))


def cross_quantilogram(
    pair: AlignedPair, tau1: QuantileRange, tau2: QuantileRange, k: int
) -> float:
    """Sample cross-quantilogram from ``pair.b`` at ``t - k`` to ``pair.a`` at ``t``.

    Sums run over ``t = k+1, ..., T`` in the numerator and in both
    denominator terms.
    """
    T = len(pair)
    if k < 0:
        raise ValueError("lag must be >= 0")
    if T <= k:
        raise ValueError(f"need more than {k} observations for lag {k}, got {T}")
    psi1 = hit_process(pair.a.ret, tau1).psi
    psi2 = hit_process(pair.b.ret, tau2).psi
    return _rho_from_hits(psi1, psi2, k)


def box_ljung(rho: Sequence[float], T: int) -> np.ndarray:
    """Cumulative Box-Ljung statistics ``T(T+2) sum_{k<=p} rho_k^2 / (T-k)``, p = 1..len(rho)."""
    r = np.asarray(rho, dtype=float)
    if T <= r.size:
        raise ValueError(f"T={T} must exceed the maximum lag {r.size}")
    k = np.arange(1, r.size + 1)
    return T * (T + 2.0) * np.cumsum(r**2 / (T - k))


def box_pierce(rho: Sequence[float], T: int) -> np.ndarray:
    r = np.asarray(rho, dtype=float)
    if T <= r.size:
        raise ValueError(f"T={T} must exceed the maximum lag {r.size}")
    return T * np.cumsum(r**2)


@dataclass(frozen=True, eq=False)
class CrossQuantilogramResult:
    """Quantilogram over lags ``1..K`` with null bands and Box-Ljung statistics.

    ``ci_lo``/``ci_hi`` bracket zero; a lag is significant when ``rho`` falls
    outside them. ``q_bl_crit`` holds the pointwise bootstrap critical value of
    ``q_bl`` for each cutoff ``p``.
    """

    lags: np.ndarray
    rho: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    q_bl: np.ndarray
    q_bl_crit: np.ndarray
    tau1: QuantileRange
    tau2: QuantileRange
    T: int
    B: int
    p_geo: float
    level: float
    labels: tuple[str, str] = ("a", "b")
    meta: dict = field(default_factory=dict)

    @property
    def significant(self) -> np.ndarray:
        return (self.rho < self.ci_lo) | (self.rho > self.ci_hi)

    @property
    def q_significant(self) -> np.ndarray:
        return self.q_bl > self.q_bl_crit

    def rows(self) -> list[dict]:
        return [
            {
                "lag": int(k),
                "rho": float(r),
                "ci_lo": float(lo),
                "ci_hi": float(hi),
                "q_bl": float(q),
                "q_crit": float(c),
            }
            for k, r, lo, hi, q, c in zip(
                self.lags, self.rho, self.ci_lo, self.ci_hi, self.q_bl, self.q_bl_crit
            )
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(
            buf, fieldnames=["lag", "rho", "ci_lo", "ci_hi", "q_bl", "q_crit"], lineterminator="\n"
        )
        w.writeheader()
        for row in self.rows():
            w.writerow({k: (v if k == "lag" else repr(v)) for k, v in row.items()})
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "y1": self.labels[0],
            "y2": self.labels[1],
            "tau1": [self.tau1.lo, self.tau1.hi],
            "tau2": [self.tau2.lo, self.tau2.hi],
            "T": self.T,
            "B": self.B,
            "p_geo": self.p_geo,
            "level": self.level,
            "rows": self.rows(),
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> CrossQuantilogramResult:
        rows = d["rows"]

        def col(name):
            return np.array([r[name] for r in rows], dtype=float)

        return cls(
            lags=np.array([r["lag"] for r in rows], dtype=int),
            rho=col("rho"),
            ci_lo=col("ci_lo"),
            ci_hi=col("ci_hi"),
            q_bl=col("q_bl"),
            q_bl_crit=col("q_crit"),
            tau1=QuantileRange(*d["tau1"]),
            tau2=QuantileRange(*d["tau2"]),
            T=int(d["T"]),
            B=int(d["B"]),
            p_geo=float(d["p_geo"]),
            level=float(d["level"]),
            labels=(d.get("y1", "a"), d.get("y2", "b")),
            meta=d.get("meta", {}),
        )


def _batch_hits(samples: np.ndarray, rng: QuantileRange) -> np.ndarray:
    """Row-wise :func:`hit_process` for a ``(B, T)`` matrix of resampled values."""
    B, T = samples.shape
    srt = np.sort(samples, axis=1)
    q_lo = (
        np.full(B, -np.inf) if rng.lo == 0.0 else srt[:, order_statistic_rank(rng.lo, T) - 1]
    )
    q_hi = np.full(B, np.inf) if rng.hi == 1.0 else srt[:, order_statistic_rank(rng.hi, T) - 1]
    inside = (samples > q_lo[:, None]) & (samples <= q_hi[:, None])
    w = rng.hi - rng.lo
    return np.where(inside, 1.0 - w, -w)


def _batch_rho(psi1: np.ndarray, psi2: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """``(B, K)`` quantilograms; rows with a constant hit series are NaN."""
    B, T = psi1.shape
    out = np.empty((B, lags.size))
    for j, k in enumerate(lags):
        x1 = psi1[:, k:]
        x2 = psi2[:, : T - k]
        num = np.einsum("ij,ij->i", x1, x2)
        d1 = np.einsum("ij,ij->i", x1, x1)
        d2 = np.einsum("ij,ij->i", x2, x2)
        flat = (x1.max(axis=1) == x1.min(axis=1)) | (x2.max(axis=1) == x2.min(axis=1))
        with np.errstate(invalid="ignore", divide="ignore"):
            r = num / (np.sqrt(d1) * np.sqrt(d2))
        r[flat] = np.nan
        out[:, j] = r
    return out


def _curve_from_draws(
    rho: np.ndarray,
    draws: np.ndarray,
    lags: np.ndarray,
    T: int,
    spec: BootstrapSpec,
    tau1: QuantileRange,
    tau2: QuantileRange,
    p_geo: float,
    labels: tuple[str, str],
) -> CrossQuantilogramResult:
    bad = np.isnan(draws).any(axis=1)
    if bad.sum() * 2 > draws.shape[0]:
        raise InferenceError(
            f"{int(bad.sum())} of {draws.shape[0]} bootstrap replicates had a constant hit "
            f"series for tau1={tau1.label()}, tau2={tau2.label()}"
        )
    good = draws[~bad]
    ci_lo, ci_hi = centered_band(good, spec.level)
    centered = good - good.mean(axis=0)
    weights = T * (T + 2.0) / (T - lags)
    q_star = np.cumsum(centered**2 * weights, axis=1)
    q_crit = np.quantile(q_star, spec.level, axis=0)
    return CrossQuantilogramResult(
        lags=lags,
        rho=rho,
        ci_lo=ci_lo,
        ci_hi=ci_hi,
        q_bl=box_ljung(rho, T),
        q_bl_crit=q_crit,
        tau1=tau1,
        tau2=tau2,
        T=T,
        B=spec.B,
        p_geo=p_geo,
        level=spec.level,
        labels=labels,
        meta={"degenerate_replicates": int(bad.sum())},
    )


def quantilogram_grid(
    pair: AlignedPair,
    cells: Sequence[tuple[QuantileRange, QuantileRange]],
    max_lag: int,
    boot: BootstrapSpec | None = None,
) -> list[CrossQuantilogramResult]:
    """Quantilogram curves for several ``(tau1, tau2)`` cells of one pair.

    All cells share one set of bootstrap index sequences, so results do not
    depend on which cells are requested together.
    """
    boot = boot or BootstrapSpec()
    T = len(pair)
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if T <= max_lag + 1:
        raise ValueError(f"series of length {T} is too short for max_lag={max_lag}")
    lags = np.arange(1, max_lag + 1)
    p_geo = boot.p_geo if boot.p_geo is not None else pair_block_prob(pair)
    labels = (pair.a.id, pair.b.id)
    rhos = []
    for tau1, tau2 in cells:
        psi1 = hit_process(pair.a.ret, tau1).psi
        psi2 = hit_process(pair.b.ret, tau2).psi
        rhos.append(np.array([_rho_from_hits(psi1, psi2, int(k)) for k in lags]))

    draws = [np.empty((boot.B, lags.size)) for _ in cells]
    # replicates are processed in chunks to bound memory at large T
    chunk = max(1, min(boot.B, 4_000_000 // max(T, 1)))
    for start in range(0, boot.B, chunk):
        stop = min(start + chunk, boot.B)
        idx = replicate_indices(T, p_geo, boot.seed, stop, first=start)
        a_star = pair.a.ret[idx]
        b_star = pair.b.ret[idx]
        hits_a: dict[QuantileRange, np.ndarray] = {}
        hits_b: dict[QuantileRange, np.ndarray] = {}
        for c, (tau1, tau2) in enumerate(cells):
            if tau1 not in hits_a:
                hits_a[tau1] = _batch_hits(a_star, tau1)
            if tau2 not in hits_b:
                hits_b[tau2] = _batch_hits(b_star, tau2)
            draws[c][start:stop] = _batch_rho(hits_a[tau1], hits_b[tau2], lags)

    results = [
        _curve_from_draws(rho, d, lags, T, boot, tau1, tau2, p_geo, labels)
        for rho, d, (tau1, tau2) in zip(rhos, draws, cells)
    ]
    return results


def quantilogram_curve(
    pair: AlignedPair,
    tau1: QuantileRange,
    tau2: QuantileRange,
    max_lag: int = 20,
    boot: BootstrapSpec | None = None,
) -> CrossQuantilogramResult:
    """Cross-quantilogram for lags ``1..max_lag`` with stationary-bootstrap inference.

    Rows of the pair are resampled jointly and quantiles are re-estimated in
    every replicate. Bands are quantiles of the replicates centered at their
    bootstrap mean (see :func:`~quantvol.bootstrap.centered_band`); Box-Ljung
    critical values come from the same centered replicates.
    """
    return quantilogram_grid(pair, [(tau1, tau2)], max_lag, boot)[0]


def auto_quantilogram(
    s: ReturnSeries,
    tau: QuantileRange,
    max_lag: int = 20,
    boot: BootstrapSpec | None = None,
) -> CrossQuantilogramResult:
    return quantilogram_curve(AlignedPair(s, s), tau, tau, max_lag, boot)
