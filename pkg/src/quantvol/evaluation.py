"""QLIKE losses, Diebold-Mariano-West tests and rolling out-of-sample forecasting."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
from scipy import stats

from . import garch
from .errors import DegenerateTestError, EstimationError, LookAheadError, QuantvolError
from .garch import GjrParams, HeavyParams, VolatilityFit
from .qa import GarchXParams, QaFit, TailSpec, fit_base, fit_garch_x, fit_qa, forecast_one_step
from .qa import filter_garch_x, tail_quantiles, tail_regressors
from .series import ReturnSeries

__all__ = [
    "LossSeries",
    "DmwResult",
    "ModelSpec",
    "qlike",
    "newey_west_avar",
    "nw_lags",
    "dmw_test",
    "insample_compare",
    "rolling_oos",
    "parse_models",
    "proxy_scale_ok",
]


def qlike(sigma2_hat, sigma2_proxy):
    """QLIKE loss ``s/s_hat - log(s/s_hat) - 1``; works elementwise on arrays.

    Raises ``ValueError`` when either argument is not strictly positive.
    """
    f = np.asarray(sigma2_hat, dtype=float)
    p = np.asarray(sigma2_proxy, dtype=float)
    if np.any(~(f > 0)) or np.any(~(p > 0)):
        raise ValueError("QLIKE is defined only for strictly positive variances")
    r = p / f
    out = r - np.log(r) - 1.0
    return float(out) if out.ndim == 0 else out


def nw_lags(T: int) -> int:
    """``floor(T ** (1/3))`` computed exactly for integers."""
    k = int(round(T ** (1.0 / 3.0)))
    while k**3 > T:
        k -= 1
    while (k + 1) ** 3 <= T:
        k += 1
    return k


def newey_west_avar(d, lags: int) -> float:
    """Bartlett-weighted long-run variance ``g0 + 2 sum_j (1 - j/(L+1)) g_j``.

    Autocovariances are taken about the sample mean with divisor ``T``.
    """
    d = np.asarray(d, dtype=float)
    T = d.size
    if T < 2:
        raise ValueError("need at least two observations")
    if lags < 0:
        raise ValueError("lags must be >= 0")
    e = d - d.mean()
    out = e @ e / T
    for j in range(1, min(lags, T - 1) + 1):
        out += 2.0 * (1.0 - j / (lags + 1.0)) * (e[j:] @ e[:-j]) / T
    return float(out)


@dataclass(frozen=True, eq=False)
class LossSeries:
    """Dated per-day losses of one model against one proxy.

    ``forecast`` holds the variance forecasts that were scored. For rolling
    runs, ``fit_through`` is the last date of each estimation window and
    ``fallback`` marks days scored with the previous window's parameters.
    Missing days carry NaN losses.
    """

    dates: np.ndarray
    loss: np.ndarray
    model_id: str
    proxy_id: str = "rv"
    forecast: np.ndarray | None = None
    fit_through: np.ndarray | None = None
    fallback: np.ndarray | None = None

    def __len__(self) -> int:
        return self.loss.size

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.loss).sum())


@dataclass(frozen=True)
class DmwResult:
    """DMW statistic; positive values favour the alternative model."""

    statistic: float
    p_value: float
    mean_diff: float
    T: int
    nw_lags: int
    base: str = "base"
    alt: str = "alt"

    @property
    def stars(self) -> str:
        if self.p_value < 0.01:
            return "**"
        if self.p_value < 0.05:
            return "*"
        return ""

    def to_dict(self) -> dict:
        return {
            "base": self.base,
            "alt": self.alt,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "mean_diff": self.mean_diff,
            "T": self.T,
            "nw_lags": self.nw_lags,
        }


MIN_DMW_OBS = 30


def dmw_test(loss_base: LossSeries | Sequence[float], loss_alt: LossSeries | Sequence[float]) -> DmwResult:
    """Test equal predictive accuracy from ``d_t = L_base - L_alt``.

    Newey-West lags are ``floor(T^(1/3))``; the p-value is two-sided normal.
    Days where either loss is NaN are dropped.

    Raises
    ------
    DegenerateTestError
        The loss differential has zero estimated long-run variance.
    """
    names = ["base", "alt"]
    arrays = []
    for i, ls in enumerate((loss_base, loss_alt)):
        if isinstance(ls, LossSeries):
            names[i] = ls.model_id
            arrays.append(np.asarray(ls.loss, dtype=float))
        else:
            arrays.append(np.asarray(ls, dtype=float))
    if isinstance(loss_base, LossSeries) and isinstance(loss_alt, LossSeries):
        if not np.array_equal(loss_base.dates, loss_alt.dates):
            raise ValueError("loss series are not aligned on dates")
    a, b = arrays
    if a.shape != b.shape:
        raise ValueError("loss series differ in length")
    keep = ~(np.isnan(a) | np.isnan(b))
    d = a[keep] - b[keep]
    T = d.size
    if T < MIN_DMW_OBS:
        raise ValueError(f"DMW test needs at least {MIN_DMW_OBS} losses, got {T}")
    L = nw_lags(T)
    avar = newey_west_avar(d, L)
    if not avar > 0:
        raise DegenerateTestError("loss differential has zero long-run variance")
    dbar = d.sum() / T
    stat = float(math.sqrt(T) * dbar / math.sqrt(avar))
    p = float(2.0 * stats.norm.sf(abs(stat)))
    return DmwResult(stat, p, float(dbar), T, L, names[0], names[1])


def insample_compare(fit_base, fit_alt, rv, base_id: str = "base", alt_id: str = "qa") -> DmwResult:
    """DMW test on in-sample QLIKE losses of two fitted variance paths."""
    rv = np.asarray(rv, dtype=float)
    s_base = np.asarray(fit_base.sigma2)
    s_alt = np.asarray(fit_alt.sigma2)
    if not (rv.shape == s_base.shape == s_alt.shape):
        raise ValueError("fitted paths and proxy differ in length")
    dates = np.arange(rv.size)
    lb = LossSeries(dates, qlike(s_base, rv), base_id)
    la = LossSeries(dates, qlike(s_alt, rv), alt_id)
    return dmw_test(lb, la)


def proxy_scale_ok(rv, sigma2) -> bool:
    """True when ``median(rv) / median(sigma2)`` lies in ``[0.1, 10]``."""
    r = float(np.nanmedian(rv)) / float(np.nanmedian(sigma2))
    return 0.1 <= r <= 10.0


# --------------------------------------------------------------------------- rolling


@dataclass(frozen=True)
class ModelSpec:
    """One forecasting model in a rolling run.

    ``kind`` is ``"base"``, ``"qa"`` or ``"garch_x"``; ``base`` names the base
    variance model and ``tail`` the driver thresholds and source.
    """

    name: str
    kind: Literal["base", "qa", "garch_x"]
    base: Literal["gjr", "gjr_t", "heavy"] = "gjr"
    tail: TailSpec = field(default_factory=TailSpec)

    @property
    def needs_driver(self) -> bool:
        return self.kind != "base"

    @property
    def needs_rv(self) -> bool:
        return self.base == "heavy" and self.kind != "garch_x"


def parse_models(text: str | Sequence[str], tails: tuple[float, float] = (0.05, 0.95)) -> list[ModelSpec]:
    """Parse names like ``gjr, gjr-t, heavy, qa-gjr, qa-heavy-resid, garchx``.

    A ``-resid`` suffix drives QA/GARCH-X models by the driver's GJR
    standardized residuals instead of its returns.
    """
    names = text.split(",") if isinstance(text, str) else list(text)
    out = []
    for raw in names:
        name = raw.strip().lower().replace("_", "-")
        if not name:
            continue
        source = "returns"
        body = name
        if body.endswith("-resid"):
            source = "residuals"
            body = body[: -len("-resid")]
        tail = TailSpec(tails[0], tails[1], source)
        if body in ("gjr", "gjr-t", "heavy"):
            if source != "returns":
                raise ValueError(f"base model {raw!r} takes no driver")
            out.append(ModelSpec(name, "base", body.replace("-", "_")))
        elif body.startswith("qa-") and body[3:] in ("gjr", "gjr-t", "heavy"):
            out.append(ModelSpec(name, "qa", body[3:].replace("-", "_"), tail))
        elif body in ("garchx", "garch-x"):
            out.append(ModelSpec(name, "garch_x", "gjr", tail))
        else:
            raise ValueError(f"unknown model {raw!r}")
    if not out:
        raise ValueError("no models given")
    return out


def _fit_window(specs: Sequence[ModelSpec], y, driver, rm):
    """Fit every spec on one window. Returns ``{name: fit or exception}``."""
    base_cache: dict[str, object] = {}
    out = {}
    for spec in specs:
        try:
            if spec.kind == "garch_x":
                out[spec.name] = fit_garch_x(y, driver, spec.tail)
                continue
            if spec.base not in base_cache:
                try:
                    base_cache[spec.base] = fit_base(y, spec.base, rm)
                except QuantvolError as err:
                    base_cache[spec.base] = err
            base = base_cache[spec.base]
            if isinstance(base, Exception):
                raise base
            if spec.kind == "base":
                out[spec.name] = base
            else:
                out[spec.name] = fit_qa(y, driver, spec.base, spec.tail, rm=rm, base_fit=base)
        except (QuantvolError, ValueError, ArithmeticError) as err:
            out[spec.name] = err
    return out


def _fit_window_task(args):
    return _fit_window(*args)


def _refilter(fit, y, driver, rm):
    """Re-run a fitted model's recursions on new window data with its old parameters."""
    if isinstance(fit, QaFit):
        base = _refilter(fit.base, y, None, rm)
        d = driver
        dfit = None
        if fit.driver_fit is not None:
            dfit = _refilter(fit.driver_fit, driver, None, None)
            d = dfit.resid
        q_lo, q_hi = tail_quantiles(d, fit.tail)
        x1, x2 = tail_regressors(d, fit.tail, q_lo, q_hi)
        f = np.maximum(fit.delta[0] + fit.delta[1] * x1 + fit.delta[2] * x2, fit.f_min)
        return replace(
            fit, base=base, f=f, sigma2=base.h * f, q_lo=q_lo, q_hi=q_hi, driver=d, driver_fit=dfit
        )
    y = np.asarray(y, dtype=float)
    h0 = float(np.var(y))
    p = fit.params
    if isinstance(p, HeavyParams):
        h = garch.filter_heavy(rm, p, h0)
        return replace(fit, h=h, resid=y / np.sqrt(h), y=y, rm=np.asarray(rm, dtype=float))
    if isinstance(p, GarchXParams):
        d = driver
        dfit = None
        if fit.driver_fit is not None:
            dfit = _refilter(fit.driver_fit, driver, None, None)
            d = dfit.resid
        tail = TailSpec(**fit.extra["tail"])
        q_lo, q_hi = tail_quantiles(d, tail)
        x1, x2 = tail_regressors(d, tail, q_lo, q_hi)
        h = filter_garch_x(y, x1, x2, p, h0)
        extra = dict(fit.extra, q_lo=q_lo, q_hi=q_hi)
        return replace(fit, h=h, resid=y / np.sqrt(h), y=y, driver=d, driver_fit=dfit, extra=extra)
    if isinstance(p, GjrParams):
        h = garch.filter_gjr(y, p, h0)
        return replace(fit, h=h, resid=y / np.sqrt(h), y=y)
    raise TypeError(f"cannot refilter {type(p).__name__}")


def rolling_oos(
    y1: ReturnSeries,
    driver: ReturnSeries | None,
    models: Sequence[ModelSpec] | str,
    window: int = 2016,
    n_jobs: int = 1,
    max_failure_rate: float = 0.05,
) -> dict[str, LossSeries]:
    """One-step-ahead rolling forecasts scored by QLIKE against ``y1.rv``.

    For each target day ``t >= window`` every model is refitted on days
    ``t - window .. t - 1`` and its forecast for ``t`` is scored against the
    proxy on ``t``. Tail thresholds are re-estimated inside each window. A
    failed window fit falls back once to the previous window's parameters;
    otherwise the day's loss is NaN.

    Raises
    ------
    EstimationError
        More than ``max_failure_rate`` of the window fits failed for a model.
    LookAheadError
        A forecast was scored with a model fitted on data reaching the target.
    """
    specs = parse_models(models) if isinstance(models, str) else list(models)
    T = len(y1)
    if not 1 <= window < T:
        raise ValueError(f"window must lie in [1, {T - 1}]")
    if y1.rv is None:
        raise ValueError("y1 carries no realized-variance proxy")
    if driver is not None and not np.array_equal(driver.dates, y1.dates):
        raise ValueError("driver is not aligned with y1")
    if any(s.needs_driver for s in specs) and driver is None:
        raise ValueError("QA and GARCH-X models need a driver series")
    rv = np.asarray(y1.rv, dtype=float)
    targets = np.arange(window, T)
    if np.any(~(rv[targets] > 0)):
        bad = targets[~(rv[targets] > 0)][0]
        raise ValueError(f"proxy missing or nonpositive on target day {y1.dates[bad]}")
    needs_rm = any(s.needs_rv for s in specs)

    def task(t):
        sl = slice(t - window, t)
        rm = rv[sl] if needs_rm else None
        d = None if driver is None else driver.ret[sl]
        return (specs, y1.ret[sl], d, rm)

    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            fits = list(pool.map(_fit_window_task, (task(t) for t in targets), chunksize=8))
    else:
        fits = [_fit_window(*task(t)) for t in targets]

    out: dict[str, LossSeries] = {}
    for spec in specs:
        fc = np.full(targets.size, np.nan)
        fallback = np.zeros(targets.size, dtype=bool)
        failures = 0
        prev_real = None
        for i, t in enumerate(targets):
            sl = slice(t - window, t)
            fit = fits[i][spec.name]
            if isinstance(fit, Exception):
                failures += 1
                if prev_real is not None:
                    try:
                        d = None if driver is None else driver.ret[sl]
                        rm = rv[sl] if spec.needs_rv else None
                        fit = _refilter(prev_real, y1.ret[sl], d, rm)
                        fallback[i] = True
                    except (QuantvolError, ValueError, ArithmeticError):
                        fit = None
                else:
                    fit = None
                prev_real = None
            else:
                prev_real = fit
            if fit is None:
                continue
            try:
                fc[i] = forecast_one_step(fit)
            except QuantvolError:
                failures += 1
        if failures > max_failure_rate * targets.size:
            raise EstimationError(
                f"model {spec.name}: {failures} of {targets.size} window fits failed"
            )
        fit_through = y1.dates[targets - 1]
        if np.any(fit_through >= y1.dates[targets]):
            raise LookAheadError(f"model {spec.name} was scored on data it was fitted on")
        loss = np.full(targets.size, np.nan)
        ok = ~np.isnan(fc)
        loss[ok] = qlike(fc[ok], rv[targets][ok])
        out[spec.name] = LossSeries(
            dates=y1.dates[targets],
            loss=loss,
            model_id=spec.name,
            proxy_id="rv",
            forecast=fc,
            fit_through=fit_through,
            fallback=fallback,
        )
    return out
