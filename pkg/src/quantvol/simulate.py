"""Synthetic data-generating processes with known dependence and volatility structure.

One master seed fans out through ``numpy.random.SeedSequence.spawn`` into
three sub-streams, in this order: innovations of the target series,
innovations of the driver series, noise of the realized-variance proxy.
Ports to other languages should reproduce Monte-Carlo conclusions, not the
bit streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .series import ReturnSeries, empirical_quantile

__all__ = ["DgpSpec", "Simulation", "simulate", "business_days", "DEFAULT_GJR"]

Kind = Literal["iid", "ar1", "gjr", "qa", "additive_x"]

DEFAULT_GJR = {"omega": 0.05, "alpha": 0.03, "gamma": 0.10, "beta": 0.85}


@dataclass(frozen=True)
class DgpSpec:
    """Simulation recipe.

    ``params`` keys by kind (missing keys take defaults):

    - ``iid``: ``scale``
    - ``ar1``: ``phi``, ``scale``
    - ``gjr``: ``omega``, ``alpha``, ``gamma``, ``beta``
    - ``qa``: the gjr keys for the target, ``delta`` = ``(d0, d1, d2)``,
      ``tails`` = ``(lo, hi)``, ``driver`` = dict of gjr keys for the driver,
      ``devolatized`` (default False) drives the GJR part by ``y / sqrt(f)``
      instead of ``y``
    - ``additive_x``: the gjr keys plus ``delta`` = ``(d1, d2)``, ``tails``
      and ``driver``

    ``innovation`` is ``"gaussian"`` or ``"student_t"`` (unit variance, ``nu``
    degrees of freedom). ``rv_df`` sets the proxy noise: ``rv = sigma2 *
    chi2(rv_df) / rv_df``.
    """

    kind: Kind
    T: int
    seed: int = 0
    params: dict = field(default_factory=dict)
    innovation: Literal["gaussian", "student_t"] = "gaussian"
    nu: float = 8.0
    rv_df: int = 1
    burn: int = 500
    start: str = "2000-01-03"

    def __post_init__(self) -> None:
        if self.kind not in ("iid", "ar1", "gjr", "qa", "additive_x"):
            raise ValueError(f"unknown DGP kind {self.kind!r}")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.innovation == "student_t" and not self.nu > 2:
            raise ValueError("nu must exceed 2")
        if self.rv_df < 1 or self.burn < 0:
            raise ValueError("rv_df must be >= 1 and burn >= 0")
        if self.kind in ("gjr", "qa", "additive_x"):
            p = self.gjr_params()
            if min(p.values()) < 0 or p["omega"] <= 0:
                raise ValueError("GJR parameters must be nonnegative with omega > 0")
            if p["alpha"] + 0.5 * p["gamma"] + p["beta"] >= 1:
                raise ValueError("GJR parameters must satisfy alpha + gamma/2 + beta < 1")
        if self.kind == "ar1" and not abs(self.params.get("phi", 0.5)) < 1:
            raise ValueError("AR(1) coefficient must satisfy |phi| < 1")

    def gjr_params(self, which: str | None = None) -> dict:
        src = self.params if which is None else self.params.get(which, {})
        return {k: float(src.get(k, v)) for k, v in DEFAULT_GJR.items()}


@dataclass(frozen=True, eq=False)
class Simulation:
    """Simulated target ``y`` (with ``rv``), optional ``driver`` and true paths."""

    y: ReturnSeries
    sigma2: np.ndarray
    h: np.ndarray
    f: np.ndarray | None = None
    driver: ReturnSeries | None = None
    q_lo: float | None = None
    q_hi: float | None = None


def business_days(start: str, n: int) -> np.ndarray:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(n), roll="forward")


def _innovations(rng: np.random.Generator, n: int, spec: DgpSpec) -> np.ndarray:
    if spec.innovation == "student_t":
        return rng.standard_t(spec.nu, size=n) * math.sqrt((spec.nu - 2.0) / spec.nu)
    return rng.standard_normal(n)


def _gjr_path(z: np.ndarray, p: dict) -> tuple[np.ndarray, np.ndarray]:
    n = z.size
    h = np.empty(n)
    y = np.empty(n)
    h[0] = p["omega"] / (1.0 - p["alpha"] - 0.5 * p["gamma"] - p["beta"])
    y[0] = math.sqrt(h[0]) * z[0]
    for t in range(1, n):
        yl = y[t - 1]
        h[t] = p["omega"] + (p["alpha"] + p["gamma"] * (yl < 0)) * yl * yl + p["beta"] * h[t - 1]
        y[t] = math.sqrt(h[t]) * z[t]
    return y, h


def _tail_terms(driver: np.ndarray, q_lo: float, q_hi: float) -> tuple[np.ndarray, np.ndarray]:
    lag = np.concatenate([[0.0], driver[:-1]])
    sq = lag * lag
    x1 = np.where(lag <= q_lo, sq, 0.0)
    x2 = np.where(lag >= q_hi, sq, 0.0)
    x1[0] = x2[0] = 0.0
    return x1, x2


def simulate(spec: DgpSpec) -> Simulation:
    """Draw one sample path from ``spec``; identical specs give identical output."""
    ss_y, ss_d, ss_rv = np.random.SeedSequence(spec.seed).spawn(3)
    rng_y = np.random.default_rng(ss_y)
    n = spec.T + spec.burn
    keep = slice(spec.burn, None)
    z = _innovations(rng_y, n, spec)
    p = spec.params
    f = driver = q_lo = q_hi = None

    if spec.kind == "iid":
        y = p.get("scale", 1.0) * z
        h = np.full(n, p.get("scale", 1.0) ** 2)
        sigma2 = h
    elif spec.kind == "ar1":
        phi, scale = p.get("phi", 0.5), p.get("scale", 1.0)
        y = np.empty(n)
        y[0] = scale * z[0] / math.sqrt(1 - phi * phi)
        for t in range(1, n):
            y[t] = phi * y[t - 1] + scale * z[t]
        h = np.full(n, scale**2)
        sigma2 = h
    elif spec.kind == "gjr":
        y, h = _gjr_path(z, spec.gjr_params())
        sigma2 = h
    else:
        d_raw, _ = _gjr_path(_innovations(np.random.default_rng(ss_d), n, spec), spec.gjr_params("driver"))
        tails = p.get("tails", (0.05, 0.95))
        q_lo = empirical_quantile(d_raw[keep], tails[0])
        q_hi = empirical_quantile(d_raw[keep], tails[1])
        x1, x2 = _tail_terms(d_raw, q_lo, q_hi)
        g = spec.gjr_params()
        y = np.empty(n)
        h = np.empty(n)
        if spec.kind == "qa":
            d0, d1, d2 = p.get("delta", (1.0, 0.3, 0.1))
            devol = p.get("devolatized", False)
            f = d0 + d1 * x1 + d2 * x2
            if np.any(f <= 0):
                raise ValueError("delta must give a positive multiplicative factor")
            # devolatized: the GJR part sees y / sqrt(f) instead of y
            h[0] = g["omega"] / (1.0 - g["alpha"] - 0.5 * g["gamma"] - g["beta"])
            y[0] = math.sqrt(h[0] * f[0]) * z[0]
            for t in range(1, n):
                e = y[t - 1] / math.sqrt(f[t - 1]) if devol else y[t - 1]
                h[t] = g["omega"] + (g["alpha"] + g["gamma"] * (e < 0)) * e * e + g["beta"] * h[t - 1]
                y[t] = math.sqrt(h[t] * f[t]) * z[t]
            sigma2 = h * f
        else:
            d1, d2 = p.get("delta", (0.05, 0.02))
            if d1 < 0 or d2 < 0:
                raise ValueError("additive_x deltas must be nonnegative")
            h[0] = g["omega"] / (1.0 - g["alpha"] - 0.5 * g["gamma"] - g["beta"])
            y[0] = math.sqrt(h[0]) * z[0]
            for t in range(1, n):
                yl = y[t - 1]
                h[t] = (
                    g["omega"]
                    + (g["alpha"] + g["gamma"] * (yl < 0)) * yl * yl
                    + g["beta"] * h[t - 1]
                    + d1 * x1[t]
                    + d2 * x2[t]
                )
                y[t] = math.sqrt(h[t]) * z[t]
            sigma2 = h
        driver = d_raw

    rng_rv = np.random.default_rng(ss_rv)
    rv = sigma2 * rng_rv.chisquare(spec.rv_df, size=n) / spec.rv_df
    dates = business_days(spec.start, spec.T)
    ys = ReturnSeries(f"{spec.kind}_y", dates, y[keep], rv=rv[keep])
    ds = None if driver is None else ReturnSeries(f"{spec.kind}_driver", dates, driver[keep])
    return Simulation(
        y=ys,
        sigma2=sigma2[keep],
        h=h[keep],
        f=None if f is None else f[keep],
        driver=ds,
        q_lo=q_lo,
        q_hi=q_hi,
    )
