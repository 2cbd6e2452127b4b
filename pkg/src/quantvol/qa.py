"""Quantile-augmented (QA) multiplicative volatility model and the additive GARCH-X comparator.

The QA model scales a base conditional variance ``h_t`` by

    f_t = d0 + d1 * x_{t-1}^2 * 1[x_{t-1} <= q(lo)] + d2 * x_{t-1}^2 * 1[x_{t-1} >= q(hi)]

where ``x`` is a driver series (returns of another market, or its GJR
standardized residuals) and ``q`` are the driver's sample quantiles.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np

from . import garch
from .errors import EstimationError, FitError, NumericalError
from .garch import GjrParams, HeavyParams, VolatilityFit
from .series import empirical_quantile

__all__ = [
    "TailSpec",
    "QaFit",
    "GarchXParams",
    "DegenerateQuantileWarning",
    "tail_quantiles",
    "tail_regressors",
    "fit_base",
    "fit_qa",
    "fit_garch_x",
    "filter_garch_x",
    "forecast_one_step",
]

BaseModel = Literal["gjr", "gjr_t", "heavy"]


class DegenerateQuantileWarning(UserWarning):
    """The lower and upper tail thresholds coincide, so both indicators can fire together."""


@dataclass(frozen=True)
class TailSpec:
    lo_tau: float = 0.05
    hi_tau: float = 0.95
    source: Literal["returns", "residuals"] = "returns"

    def __post_init__(self) -> None:
        if not 0.0 < self.lo_tau < self.hi_tau < 1.0:
            raise ValueError("need 0 < lo_tau < hi_tau < 1")
        if self.source not in ("returns", "residuals"):
            raise ValueError(f"unknown driver source {self.source!r}")


def tail_quantiles(driver, tail: TailSpec) -> tuple[float, float]:
    d = np.asarray(driver, dtype=float)
    q_lo = empirical_quantile(d, tail.lo_tau)
    q_hi = empirical_quantile(d, tail.hi_tau)
    if q_lo >= q_hi:
        warnings.warn(
            f"tail thresholds coincide (q_lo={q_lo}, q_hi={q_hi}); both indicators can fire",
            DegenerateQuantileWarning,
            stacklevel=2,
        )
    return q_lo, q_hi


def tail_regressors(
    driver, tail: TailSpec, q_lo: float | None = None, q_hi: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Lagged squared tail events of ``driver``, aligned so entry ``t`` uses ``driver[t-1]``.

    Thresholds default to the driver's own sample quantiles. The pre-sample
    driver value is 0, so both regressors are 0 at ``t = 0``.
    """
    d = np.asarray(driver, dtype=float)
    if d.size == 0:
        raise ValueError("driver is empty")
    if q_lo is None or q_hi is None:
        q_lo, q_hi = tail_quantiles(d, tail)
    lag = np.empty_like(d)
    lag[0] = 0.0
    lag[1:] = d[:-1]
    sq = lag * lag
    x1 = np.where(lag <= q_lo, sq, 0.0)
    x2 = np.where(lag >= q_hi, sq, 0.0)
    x1[0] = x2[0] = 0.0
    return x1, x2


@dataclass(frozen=True, eq=False)
class QaFit:
    """Two-step QA fit: base model, OLS loadings ``delta`` and the combined path.

    ``sigma2 = base.h * f`` elementwise. ``q_lo``/``q_hi`` are the tail
    thresholds frozen from the estimation sample; ``driver`` holds the driver
    values the thresholds apply to (returns or standardized residuals).
    """

    base: VolatilityFit
    delta: np.ndarray
    f: np.ndarray
    sigma2: np.ndarray
    tail: TailSpec
    q_lo: float
    q_hi: float
    driver: np.ndarray
    driver_fit: VolatilityFit | None = None
    ols_resid: np.ndarray | None = None
    f_min: float = 0.0
    floored: int = 0

    model = "qa"

    @property
    def h(self) -> np.ndarray:
        return self.base.h

    @property
    def y(self) -> np.ndarray:
        return self.base.y

    def to_dict(self, with_paths: bool = True) -> dict:
        d = {
            "model": f"qa_{self.base.model}",
            "base": self.base.to_dict(with_paths=False),
            "delta": self.delta.tolist(),
            "tail": asdict(self.tail),
            "q_lo": self.q_lo,
            "q_hi": self.q_hi,
            "f_min": self.f_min,
            "floored": self.floored,
        }
        if self.driver_fit is not None:
            d["driver_fit"] = self.driver_fit.to_dict(with_paths=False)
        if with_paths:
            d["sigma2"] = self.sigma2.tolist()
            d["h"] = self.base.h.tolist()
            d["f"] = self.f.tolist()
        return d


def fit_base(y, model: BaseModel = "gjr", rm=None) -> VolatilityFit:
    if model == "gjr":
        return garch.fit_gjr(y, "gaussian")
    if model == "gjr_t":
        return garch.fit_gjr(y, "student_t")
    if model == "heavy":
        if rm is None:
            raise FitError("HEAVY base model needs a realized measure")
        return garch.fit_heavy(y, rm)
    raise ValueError(f"unknown base model {model!r}")


def _driver_values(driver: np.ndarray, tail: TailSpec) -> tuple[np.ndarray, VolatilityFit | None]:
    if tail.source == "residuals":
        dfit = garch.fit_gjr(driver)
        return dfit.resid, dfit
    return driver, None


def _check_pair(y1, driver) -> tuple[np.ndarray, np.ndarray]:
    y1 = np.asarray(y1, dtype=float)
    driver = np.asarray(driver, dtype=float)
    if y1.shape != driver.shape:
        raise ValueError(f"y1 and driver must be aligned: lengths {y1.size} and {driver.size}")
    return y1, driver


def fit_qa(
    y1,
    driver,
    base_model: BaseModel = "gjr",
    tail: TailSpec | None = None,
    rm=None,
    base_fit: VolatilityFit | None = None,
) -> QaFit:
    """Fit the QA model in three steps.

    1. QMLE of the base model on ``y1``.
    2. OLS of ``y1_t^2 / h_t`` on ``(1, x1_t, x2_t)`` over ``t >= 2``.
    3. ``sigma2_t = h_t * f_t`` with ``f`` floored at ``1e-6 * max(d0, 1e-8)``.

    ``base_fit`` skips step 1 when a fit of the same ``y1`` is at hand.

    Raises
    ------
    EstimationError
        A tail indicator never fires in the sample, or the regressors are
        collinear.
    """
    tail = tail or TailSpec()
    y1, driver = _check_pair(y1, driver)
    base = base_fit if base_fit is not None else fit_base(y1, base_model, rm)
    d, dfit = _driver_values(driver, tail)
    q_lo, q_hi = tail_quantiles(d, tail)
    x1, x2 = tail_regressors(d, tail, q_lo, q_hi)

    z = (y1 * y1 / base.h)[1:]
    X = np.column_stack([np.ones(y1.size - 1), x1[1:], x2[1:]])
    if not np.any(X[:, 1]):
        raise EstimationError("lower-tail regressor is identically zero: no lower-tail events")
    if not np.any(X[:, 2]):
        raise EstimationError("upper-tail regressor is identically zero: no upper-tail events")
    if np.linalg.matrix_rank(X) < 3:
        raise EstimationError("tail regressors are collinear with the intercept")
    delta, *_ = np.linalg.lstsq(X, z, rcond=None)
    resid = z - X @ delta

    f_min = 1e-6 * max(delta[0], 1e-8)
    f_raw = delta[0] + delta[1] * x1 + delta[2] * x2
    f = np.maximum(f_raw, f_min)
    return QaFit(
        base=base,
        delta=delta,
        f=f,
        sigma2=base.h * f,
        tail=tail,
        q_lo=q_lo,
        q_hi=q_hi,
        driver=d,
        driver_fit=dfit,
        ols_resid=resid,
        f_min=f_min,
        floored=int(np.sum(f_raw < f_min)),
    )


# --------------------------------------------------------------------------- GARCH-X


@dataclass(frozen=True)
class GarchXParams:
    omega: float
    alpha: float
    gamma: float
    beta: float
    delta1: float
    delta2: float

    @property
    def gjr(self) -> GjrParams:
        return GjrParams(self.omega, self.alpha, self.gamma, self.beta)


def filter_garch_x(y, x1, x2, params: GarchXParams, h0: float) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    drive = garch.gjr_drive(y, params.gjr)
    drive[1:] += params.delta1 * x1[1:] + params.delta2 * x2[1:]
    return garch._check_finite(garch._linear_recursion(drive, params.beta, h0))


def fit_garch_x(y1, driver, tail: TailSpec | None = None) -> VolatilityFit:
    """Joint Gaussian QMLE of the additive GJR-GARCH-X recursion with ``delta1, delta2 >= 0``."""
    tail = tail or TailSpec()
    y1, driver = _check_pair(y1, driver)
    y = garch._check_input(y1)
    d, dfit = _driver_values(driver, tail)
    q_lo, q_hi = tail_quantiles(d, tail)
    x1, x2 = tail_regressors(d, tail, q_lo, q_hi)
    h0 = float(np.var(y))
    n = y.size

    def unpack(u):
        g = garch.gjr_from_raw(u[:4])
        return GarchXParams(g.omega, g.alpha, g.gamma, g.beta, float(u[4]), float(u[5]))

    def nll(u):
        h = filter_garch_x(y, x1, x2, unpack(u), h0)
        return -garch.gaussian_loglik(y, h) / n

    mean_x = max(float(np.mean(x1[x1 > 0])) if np.any(x1 > 0) else 1.0, 1e-12)
    starts = []
    for (a, g, b), dscale in zip(garch._GJR_STARTS, (0.0, 0.02, 0.05)):
        omega = h0 * (1.0 - a - 0.5 * g - b)
        dx = dscale * h0 / mean_x
        starts.append(np.append(garch.gjr_to_raw(GjrParams(omega, a, g, b)), [dx, dx]))
    bounds = [(None, None)] * 4 + [(0.0, None), (0.0, None)]
    res = garch._minimize(garch._safe(nll), starts, bounds=bounds)
    params = unpack(res.x)
    if not res.success:
        raise FitError(f"GARCH-X fit did not converge: {res.message}", best_params=params)
    h = filter_garch_x(y, x1, x2, params, h0)
    return VolatilityFit(
        model="garch_x",
        params=params,
        h=h,
        resid=y / np.sqrt(h),
        loglik=-res.fun * n,
        converged=True,
        y=y,
        boundary=garch._gjr_boundary(params.gjr),
        message=str(res.message),
        nit=int(res.nit),
        extra={"q_lo": q_lo, "q_hi": q_hi, "tail": asdict(tail)},
        driver=d,
        driver_fit=dfit,
    )


# --------------------------------------------------------------------------- forecasting


def _driver_value(driver_t, driver_fit, driver_h_t, default):
    if driver_t is None:
        return default
    if driver_fit is None:
        return driver_t
    h = driver_fit.h[-1] if driver_h_t is None else driver_h_t
    return driver_t / math.sqrt(h)


def _tail_f(delta, value: float, q_lo: float, q_hi: float, f_min: float) -> float:
    sq = value * value
    f = delta[0] + delta[1] * sq * (value <= q_lo) + delta[2] * sq * (value >= q_hi)
    return max(f, f_min)


def _base_next(fit: VolatilityFit, y_t: float, h_t: float, rm_t: float | None) -> float:
    p = fit.params
    if isinstance(p, HeavyParams):
        rm_t = fit.rm[-1] if rm_t is None else rm_t
        return p.omega + p.beta * h_t + p.pi * rm_t
    return p.omega + (p.alpha + p.gamma * (y_t < 0)) * y_t * y_t + p.beta * h_t


def forecast_one_step(
    fit: QaFit | VolatilityFit,
    y_t: float | None = None,
    driver_t: float | None = None,
    h_t: float | None = None,
    rm_t: float | None = None,
    driver_h_t: float | None = None,
) -> float:
    """One-step-ahead conditional variance ``sigma2_{t+1}``.

    Every state argument defaults to the last in-sample value of the fit, so
    ``forecast_one_step(fit)`` forecasts the day after the estimation sample.
    ``driver_t`` is a raw driver return; for residual-driven fits it is
    standardized with the driver's GJR variance ``driver_h_t``. Tail
    thresholds stay frozen at their estimation-sample values.
    """
    if isinstance(fit, QaFit):
        base = fit.base
        y_t = base.y[-1] if y_t is None else y_t
        h_t = base.h[-1] if h_t is None else h_t
        h_next = _base_next(base, y_t, h_t, rm_t)
        x = _driver_value(driver_t, fit.driver_fit, driver_h_t, fit.driver[-1])
        out = h_next * _tail_f(fit.delta, x, fit.q_lo, fit.q_hi, fit.f_min)
    else:
        y_t = fit.y[-1] if y_t is None else y_t
        h_t = fit.h[-1] if h_t is None else h_t
        out = _base_next(fit, y_t, h_t, rm_t)
        if isinstance(fit.params, GarchXParams):
            x = _driver_value(driver_t, fit.driver_fit, driver_h_t, fit.driver[-1])
            sq = x * x
            out += fit.params.delta1 * sq * (x <= fit.extra["q_lo"])
            out += fit.params.delta2 * sq * (x >= fit.extra["q_hi"])
    if not (math.isfinite(out) and out > 0):
        raise NumericalError(f"one-step forecast is not finite and positive: {out}")
    return float(out)
