"""GJR-GARCH(1,1) and HEAVY-r estimation by (quasi-)maximum likelihood.

All recursions start from ``h_1 = h0`` (the sample variance of ``y`` when
fitting) and are driven by observed data from ``t = 2`` on. Parameters are
optimized on an unconstrained scale: log for positive quantities and a
logistic/softmax map that keeps ``alpha + gamma / 2 + beta`` below one.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy import optimize, signal, special, stats

from .errors import FitError, NumericalError

__all__ = [
    "GjrParams",
    "HeavyParams",
    "VolatilityFit",
    "filter_gjr",
    "filter_heavy",
    "fit_gjr",
    "fit_heavy",
    "gaussian_loglik",
    "student_t_loglik",
    "ljung_box_usual",
    "LjungBox",
]

Dist = Literal["gaussian", "student_t"]

MIN_OBS = 100
_MAXITER = 500
_FTOL = 1e-8
_GTOL = 1e-6


@dataclass(frozen=True)
class GjrParams:
    omega: float
    alpha: float
    gamma: float
    beta: float
    nu: float | None = None

    def __post_init__(self) -> None:
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if min(self.alpha, self.gamma, self.beta) < 0:
            raise ValueError("alpha, gamma and beta must be nonnegative")
        if self.nu is not None and not self.nu > 2:
            raise ValueError("nu must exceed 2")

    @property
    def persistence(self) -> float:
        return self.alpha + 0.5 * self.gamma + self.beta

    @property
    def stationary(self) -> bool:
        return self.persistence < 1.0


@dataclass(frozen=True)
class HeavyParams:
    omega: float
    beta: float
    pi: float

    def __post_init__(self) -> None:
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if self.pi < 0:
            raise ValueError("pi must be nonnegative")


@dataclass(frozen=True, eq=False)
class VolatilityFit:
    """A fitted conditional-variance model.

    ``h`` is the in-sample conditional variance path and ``resid`` the
    standardized residuals ``y / sqrt(h)``. ``y`` and ``rm`` keep the data the
    model was fitted on, which one-step forecasts need.
    """

    model: str
    params: object
    h: np.ndarray
    resid: np.ndarray
    loglik: float
    converged: bool
    y: np.ndarray
    boundary: bool = False
    message: str = ""
    nit: int = 0
    rm: np.ndarray | None = None
    extra: dict = field(default_factory=dict)
    driver: np.ndarray | None = None
    driver_fit: VolatilityFit | None = None

    @property
    def sigma2(self) -> np.ndarray:
        return self.h

    def to_dict(self, with_paths: bool = True) -> dict:
        d = {
            "model": self.model,
            "params": asdict(self.params),
            "loglik": self.loglik,
            "converged": self.converged,
            "boundary": self.boundary,
            "message": self.message,
            "nit": self.nit,
            "nobs": int(self.y.size),
        }
        d.update(self.extra)
        if with_paths:
            d["sigma2"] = self.h.tolist()
        return d


# --------------------------------------------------------------------------- filters


def _check_finite(h: np.ndarray) -> np.ndarray:
    bad = np.flatnonzero(~np.isfinite(h) | (h <= 0))
    if bad.size:
        t = int(bad[0])
        raise NumericalError(f"conditional variance is not finite and positive at t={t + 1}")
    return h


def _linear_recursion(x: np.ndarray, beta: float, h0: float) -> np.ndarray:
    """``h_1 = h0`` and ``h_t = x_t + beta * h_{t-1}``; ``x[0]`` is ignored."""
    h = np.empty(x.size)
    h[0] = h0
    if x.size > 1:
        h[1:], _ = signal.lfilter([1.0], [1.0, -beta], x[1:], zi=[beta * h0])
    return h


def gjr_drive(y: np.ndarray, params: GjrParams) -> np.ndarray:
    """Non-recursive part ``omega + (alpha + gamma 1[y_{t-1}<0]) y_{t-1}^2``, aligned at t."""
    x = np.empty(y.size)
    x[0] = 0.0
    y1 = y[:-1]
    with np.errstate(over="ignore"):
        # overflow shows up as inf and is reported by _check_finite
        x[1:] = params.omega + (params.alpha + params.gamma * (y1 < 0)) * y1 * y1
    return x


def filter_gjr(y, params: GjrParams, h0: float) -> np.ndarray:
    """GJR-GARCH(1,1) conditional variances with ``h_1 = h0``.

    Raises
    ------
    NumericalError
        A variance is non-finite or nonpositive; the message names ``t``.
    """
    y = np.asarray(y, dtype=float)
    if not h0 > 0:
        raise ValueError("h0 must be positive")
    return _check_finite(_linear_recursion(gjr_drive(y, params), params.beta, h0))


def filter_heavy(rm, params: HeavyParams, h0: float) -> np.ndarray:
    rm = np.asarray(rm, dtype=float)
    if not h0 > 0:
        raise ValueError("h0 must be positive")
    x = np.empty(rm.size)
    x[0] = 0.0
    x[1:] = params.omega + params.pi * rm[:-1]
    return _check_finite(_linear_recursion(x, params.beta, h0))


# --------------------------------------------------------------------------- likelihoods


def gaussian_loglik(y: np.ndarray, h: np.ndarray) -> float:
    return float(-0.5 * np.sum(math.log(2 * math.pi) + np.log(h) + y * y / h))


def student_t_loglik(y: np.ndarray, h: np.ndarray, nu: float) -> float:
    """Log-likelihood with unit-variance Student-t innovations."""
    c = (
        special.gammaln(0.5 * (nu + 1))
        - special.gammaln(0.5 * nu)
        - 0.5 * math.log(math.pi * (nu - 2))
    )
    return float(
        np.sum(c - 0.5 * np.log(h) - 0.5 * (nu + 1) * np.log1p(y * y / ((nu - 2) * h)))
    )


# --------------------------------------------------------------------------- transforms


def _logistic(x: float) -> float:
    return 0.5 * (1.0 + math.tanh(0.5 * x))


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def gjr_from_raw(u: np.ndarray, nu: float | None = None) -> GjrParams:
    """Map ``(log omega, logit persistence, share logits for alpha and gamma/2)``."""
    s = _logistic(u[1])
    e1, e2 = math.exp(u[2]), math.exp(u[3])
    z = 1.0 + e1 + e2
    return GjrParams(
        omega=math.exp(u[0]),
        alpha=s * e1 / z,
        gamma=2.0 * s * e2 / z,
        beta=s / z,
        nu=nu,
    )


def gjr_to_raw(p: GjrParams) -> np.ndarray:
    floor = 1e-8
    a, g2, b = max(p.alpha, floor), max(0.5 * p.gamma, floor), max(p.beta, floor)
    s = min(a + g2 + b, 1 - 1e-8)
    return np.array([math.log(p.omega), _logit(s), math.log(a / b), math.log(g2 / b)])


_GJR_STARTS = [
    (0.05, 0.10, 0.85),
    (0.02, 0.05, 0.92),
    (0.10, 0.05, 0.80),
]


def _minimize(
    nll: Callable[[np.ndarray], float],
    starts: list[np.ndarray],
    bounds=None,
) -> optimize.OptimizeResult:
    """Run L-BFGS-B from each start and return the best result.

    A start that ends without L-BFGS-B convergence is polished once with
    Nelder-Mead.
    """
    best = None
    for x0 in starts:
        if not np.isfinite(nll(x0)):
            continue
        res = optimize.minimize(
            nll,
            x0,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": _MAXITER, "ftol": _FTOL, "gtol": _GTOL},
        )
        if not res.success and bounds is None:
            polish = optimize.minimize(
                nll,
                res.x,
                method="Nelder-Mead",
                options={"maxiter": 4 * _MAXITER, "xatol": 1e-7, "fatol": 1e-10},
            )
            if polish.fun <= res.fun:
                polish.nit = res.nit + polish.nit
                res = polish
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise FitError("no feasible starting point")
    return best


def _safe(f: Callable[[np.ndarray], float]) -> Callable[[np.ndarray], float]:
    def wrapped(u):
        try:
            v = f(u)
        except (NumericalError, ValueError, OverflowError, FloatingPointError):
            return 1e10
        return v if np.isfinite(v) else 1e10

    return wrapped


def _check_input(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size < MIN_OBS:
        raise FitError(f"need at least {MIN_OBS} observations, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise FitError("y contains non-finite values")
    if not np.var(y) > 0:
        raise FitError("y has zero variance")
    return y


def _gjr_boundary(p: GjrParams) -> bool:
    edge = min(p.alpha, p.gamma, p.beta) < 1e-6 or p.persistence > 1 - 1e-6
    return edge or (p.nu is not None and p.nu > 500)


def fit_gjr(y, dist: Dist = "gaussian") -> VolatilityFit:
    """Fit GJR-GARCH(1,1) by maximum likelihood (Gaussian QMLE or Student-t MLE).

    Parameters
    ----------
    y : array_like
        Demeaned returns, at least 100 observations.
    dist : {"gaussian", "student_t"}
        Innovation distribution. With ``"student_t"`` the degrees of freedom
        are estimated jointly.

    Returns
    -------
    VolatilityFit
        ``model`` is ``"gjr"`` or ``"gjr_t"``. ``boundary`` flags a solution
        on the edge of the admissible region.

    Raises
    ------
    FitError
        Degenerate input, or the optimizer did not converge (``best_params``
        carries the best point found).
    """
    y = _check_input(y)
    h0 = float(np.var(y))
    n = y.size
    student = dist == "student_t"
    if dist not in ("gaussian", "student_t"):
        raise ValueError(f"unknown distribution {dist!r}")

    def unpack(u):
        nu = 2.0 + math.exp(u[4]) if student else None
        return gjr_from_raw(u[:4], nu)

    def nll(u):
        p = unpack(u)
        h = filter_gjr(y, p, h0)
        if student:
            return -student_t_loglik(y, h, p.nu) / n
        return -gaussian_loglik(y, h) / n

    starts = []
    for a, g, b in _GJR_STARTS:
        omega = h0 * (1.0 - a - 0.5 * g - b)
        u = gjr_to_raw(GjrParams(omega, a, g, b))
        starts.append(np.append(u, math.log(8.0 - 2.0)) if student else u)

    res = _minimize(_safe(nll), starts)
    params = unpack(res.x)
    if not res.success:
        raise FitError(f"GJR-GARCH fit did not converge: {res.message}", best_params=params)
    h = filter_gjr(y, params, h0)
    return VolatilityFit(
        model="gjr_t" if student else "gjr",
        params=params,
        h=h,
        resid=y / np.sqrt(h),
        loglik=-res.fun * n,
        converged=True,
        y=y,
        boundary=_gjr_boundary(params),
        message=str(res.message),
        nit=int(res.nit),
    )


def fit_heavy(y, rm, pi_zero: bool = False) -> VolatilityFit:
    """Fit the HEAVY-r variance equation by Gaussian QMLE.

    ``rm`` is the realized measure (e.g. a realized kernel) on the same days as
    ``y``. ``pi_zero=True`` fixes ``pi = 0``, leaving a deterministic
    recursion that converges to ``omega / (1 - beta)``.
    """
    y = _check_input(y)
    rm = np.asarray(rm, dtype=float)
    if rm.shape != y.shape:
        raise FitError("rm must have the same length as y")
    if np.any(np.isnan(rm)):
        raise FitError(f"rm is missing at t={int(np.flatnonzero(np.isnan(rm))[0]) + 1}")
    if np.any(rm <= 0):
        raise FitError(f"rm must be positive; first violation at t={int(np.flatnonzero(rm <= 0)[0]) + 1}")
    h0 = float(np.var(y))
    n = y.size
    scale = h0 / float(np.mean(rm))

    def unpack(u):
        pi = 0.0 if pi_zero else math.exp(u[2])
        return HeavyParams(omega=math.exp(u[0]), beta=_logistic(u[1]), pi=pi)

    def nll(u):
        h = filter_heavy(rm, unpack(u), h0)
        return -gaussian_loglik(y, h) / n

    starts = []
    for b, share in [(0.6, 0.35), (0.3, 0.6), (0.85, 0.12)]:
        pi = share * scale
        omega = max(h0 * (1 - b) - pi * float(np.mean(rm)), 0.05 * h0 * (1 - b))
        u = [math.log(omega), _logit(b)]
        if not pi_zero:
            u.append(math.log(pi))
        starts.append(np.array(u))

    res = _minimize(_safe(nll), starts)
    params = unpack(res.x)
    if not res.success:
        raise FitError(f"HEAVY fit did not converge: {res.message}", best_params=params)
    h = filter_heavy(rm, params, h0)
    return VolatilityFit(
        model="heavy",
        params=params,
        h=h,
        resid=y / np.sqrt(h),
        loglik=-res.fun * n,
        converged=True,
        y=y,
        boundary=params.beta > 1 - 1e-6 or (not pi_zero and params.pi < 1e-10),
        message=str(res.message),
        nit=int(res.nit),
        rm=rm,
    )


# --------------------------------------------------------------------------- diagnostics


@dataclass(frozen=True)
class LjungBox:
    lags: np.ndarray
    statistic: np.ndarray
    p_value: np.ndarray


def ljung_box_usual(x, max_lag: int) -> LjungBox:
    """Ljung-Box Q on sample autocorrelations of ``x`` for cutoffs ``1..max_lag``.

    p-values are chi-square with ``p`` degrees of freedom.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if not 1 <= max_lag < n:
        raise ValueError(f"max_lag must lie in [1, {n - 1}]")
    e = x - x.mean()
    denom = e @ e
    if not denom > 0:
        raise ValueError("Ljung-Box statistic is undefined for a constant series")
    lags = np.arange(1, max_lag + 1)
    r = np.array([e[k:] @ e[: n - k] for k in lags]) / denom
    q = n * (n + 2.0) * np.cumsum(r**2 / (n - lags))
    return LjungBox(lags, q, stats.chi2.sf(q, lags))
