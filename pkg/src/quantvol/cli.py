"""Command-line front end: ``quantvol <command> [options]``.

Every command is deterministic given its inputs, options and ``--seed``.
Options can also come from an INI-style config file (``--config``); values
are read from the ``[quantvol]`` section and then from a section named after
the command, and flags given on the command line always win. Relative input
paths that do not exist are looked up in ``$QUANTVOL_DATA_DIR``.

Exit status is 0 on success, 1 on a data or estimation error and 2 on a
usage error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import garch
from .bootstrap import BootstrapSpec
from .errors import QuantvolError
from .evaluation import (
    DmwResult,
    dmw_test,
    insample_compare,
    parse_models,
    proxy_scale_ok,
    rolling_oos,
)
from .qa import TailSpec, fit_base, fit_garch_x, fit_qa
from .quantilogram import CrossQuantilogramResult, quantilogram_grid
from .series import DEFAULT_GRID, AlignedPair, CsvSchema, QuantileRange, ReturnSeries, align, demean, load_csv
from .simulate import DgpSpec, simulate

__all__ = ["main", "build_parser", "render_svg", "DATA_DIR_ENV"]

DATA_DIR_ENV = "QUANTVOL_DATA_DIR"
TAIL_RANGES = (QuantileRange(0.0, 0.05), QuantileRange(0.95, 1.0))

# dest -> (default, converter); filled by _opt while the parser is built
_DEFAULTS: dict[str, dict[str, tuple[object, Callable]]] = {}


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt(p: argparse.ArgumentParser, scope: str, *flags, default=None, type=str, **kw) -> None:
    dest = kw.pop("dest", None) or flags[0].lstrip("-").replace("-", "_")
    conv = _bool if kw.get("action") == "store_true" else type
    _DEFAULTS.setdefault(scope, {})[dest] = (default, conv)
    if kw.get("action") != "store_true":
        kw["type"] = type
    p.add_argument(*flags, dest=dest, default=argparse.SUPPRESS, **kw)


def _block_prob(text: str) -> float | None:
    if text == "auto":
        return None
    p = float(text)
    if not 0.0 < p <= 1.0:
        raise ValueError("block probability must lie in (0, 1]")
    return p


def _tails(text: str) -> tuple[float, float]:
    lo, hi = (float(x) for x in text.split(","))
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    _DEFAULTS.clear()
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    _opt(g, "*", "--seed", default=0, type=int, help="master random seed")
    _opt(g, "*", "--boot-reps", default=1000, type=int, help="bootstrap replicates B")
    _opt(g, "*", "--boot-seed", default=None, type=int, help="bootstrap seed (defaults to --seed)")
    _opt(g, "*", "--block-prob", default=None, type=_block_prob, help="'auto' or a probability in (0, 1]")
    _opt(g, "*", "--level", default=0.95, type=float, help="band coverage")
    _opt(g, "*", "--out-dir", default=".", help="output directory")
    _opt(g, "*", "--format", default="csv", choices=["csv", "json", "svg-bars"], help="table format")
    _opt(g, "*", "--date-col", default="date", help="CSV date column")
    _opt(g, "*", "--ret-col", default="ret", help="CSV return column")
    _opt(g, "*", "--rv-col", default="rk", help="CSV realized-variance column")
    common.add_argument("--config", default=argparse.SUPPRESS, help="INI config file")

    parser = argparse.ArgumentParser(
        prog="quantvol",
        description="Cross-quantilogram dependence and quantile-augmented volatility models.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name: str, help: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, help=help, parents=[common], description=help)

    p = add("ingest", "validate a CSV series and store it as JSON")
    p.add_argument("input")
    _opt(p, "ingest", "--demean", action="store_true", help="subtract the sample mean")

    p = add("simulate", "simulate a synthetic series to CSV")
    _opt(p, "simulate", "--kind", default="qa", choices=["iid", "ar1", "gjr", "qa", "additive_x"])
    _opt(p, "simulate", "--T", dest="T", default=2000, type=int, help="sample length")
    _opt(p, "simulate", "--params", default="{}", help="JSON object of DGP parameters")
    _opt(p, "simulate", "--innovation", default="gaussian", choices=["gaussian", "student_t"])
    _opt(p, "simulate", "--nu", default=8.0, type=float)
    _opt(p, "simulate", "--out", default=None, help="output CSV (driver goes to <stem>_driver.csv)")

    p = add("xquant", "cross-quantilograms of y1 on lagged y2")
    p.add_argument("y1")
    p.add_argument("y2")
    _opt(p, "xquant", "--mode", default="grid", choices=["grid", "cross"])
    _opt(p, "xquant", "--max-lag", default=20, type=int)
    _opt(p, "xquant", "--residualize", default="none", choices=["none", "a", "b", "both"])
    _opt(p, "xquant", "--ranges", default=None, help="semicolon-separated ranges, e.g. '0,0.05;0.95,1'")

    p = add("auto", "quantile autocorrelograms of one series")
    p.add_argument("input")
    _opt(p, "auto", "--max-lag", default=20, type=int)
    _opt(p, "auto", "--residualize", action="store_true", help="use GJR standardized residuals")
    _opt(p, "auto", "--ranges", default=None)

    p = add("fit-garch", "fit a GJR-GARCH or HEAVY-r model")
    p.add_argument("input")
    _opt(p, "fit-garch", "--model", default="gjr", choices=["gjr", "gjr-t", "heavy"])
    _opt(p, "fit-garch", "--ljung-box", default=10, type=int, help="lags for residual diagnostics")

    p = add("fit-qa", "fit the quantile-augmented volatility model")
    p.add_argument("input")
    _opt(p, "fit-qa", "--driver", default=None, help="driver series CSV")
    _opt(p, "fit-qa", "--base", default="gjr", choices=["gjr", "gjr-t", "heavy"])
    _opt(p, "fit-qa", "--tails", default=(0.05, 0.95), type=_tails)
    _opt(p, "fit-qa", "--driver-source", default="returns", choices=["returns", "residuals"])

    p = add("fit-garchx", "fit the additive GARCH-X comparator")
    p.add_argument("input")
    _opt(p, "fit-garchx", "--driver", default=None)
    _opt(p, "fit-garchx", "--tails", default=(0.05, 0.95), type=_tails)
    _opt(p, "fit-garchx", "--driver-source", default="returns", choices=["returns", "residuals"])

    p = add("oos", "rolling one-step-ahead forecasts scored by QLIKE")
    p.add_argument("input")
    _opt(p, "oos", "--driver", default=None)
    _opt(p, "oos", "--window", default=2016, type=int)
    _opt(p, "oos", "--models", default="gjr,qa-gjr,garchx")
    _opt(p, "oos", "--tails", default=(0.05, 0.95), type=_tails)
    _opt(p, "oos", "--jobs", default=1, type=int)

    p = add("evaluate", "in-sample DMW test of two saved fits")
    _opt(p, "evaluate", "--base", default=None, help="base fit JSON")
    _opt(p, "evaluate", "--alt", default=None, help="alternative fit JSON")
    _opt(p, "evaluate", "--series", default=None, help="CSV holding the proxy column")
    _opt(p, "evaluate", "--proxy", default=None, help="proxy column (defaults to --rv-col)")

    p = add("report", "lag-1 significance and DMW summary tables")
    _opt(p, "report", "--xquant", default=[], type=str, nargs="+", help="xquant summary JSON files")
    _opt(p, "report", "--dmw", default=[], type=str, nargs="+", help="evaluate/oos DMW JSON files")
    _opt(p, "report", "--lag", default=1, type=int)
    return parser


def _read_config(path: str | None, command: str) -> dict[str, str]:
    if path is None:
        return {}
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(f"config file not found: {path}")
    out: dict[str, str] = {}
    for section in ("quantvol", command):
        if cp.has_section(section):
            out.update({k.replace("-", "_"): v for k, v in cp.items(section)})
    return out


def _resolve(ns: argparse.Namespace) -> argparse.Namespace:
    conf = _read_config(getattr(ns, "config", None), ns.command)
    for scope in ("*", ns.command):
        for dest, (default, conv) in _DEFAULTS.get(scope, {}).items():
            if hasattr(ns, dest):
                continue
            if dest in conf:
                raw = conf[dest]
                value = raw.split() if isinstance(default, list) else conv(raw)
            else:
                value = default
            setattr(ns, dest, value)
    if ns.boot_seed is None:
        ns.boot_seed = ns.seed
    return ns


# --------------------------------------------------------------------------- io helpers


def _input_path(name: str) -> Path:
    p = Path(name)
    if p.exists() or p.is_absolute():
        return p
    base = os.environ.get(DATA_DIR_ENV)
    if base and (Path(base) / p).exists():
        return Path(base) / p
    return p


def _schema(ns) -> CsvSchema:
    return CsvSchema(date=ns.date_col, ret=ns.ret_col, rv=ns.rv_col)


def _load(ns, name: str) -> ReturnSeries:
    path = _input_path(name)
    if not path.exists():
        raise FileNotFoundError(f"input not found: {name}")
    if path.suffix == ".json":
        return ReturnSeries.from_json(path.read_text())
    return load_csv(path, _schema(ns))


def _write(path: Path, text: str) -> Path:
    """Write atomically: a temp file in the target directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, default=_jsonable) + "\n"


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _safe_label(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in text)


def _range_tag(r: QuantileRange) -> str:
    return f"{r.lo:g}-{r.hi:g}"


def _ranges(text: str | None) -> tuple[QuantileRange, ...]:
    if not text:
        return DEFAULT_GRID
    return tuple(QuantileRange.parse(part) for part in text.split(";") if part.strip())


def _boot(ns) -> BootstrapSpec:
    return BootstrapSpec(B=ns.boot_reps, p_geo=ns.block_prob, seed=ns.boot_seed, level=ns.level)


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _residualize(s: ReturnSeries) -> ReturnSeries:
    fit = garch.fit_gjr(demean(s).ret)
    return s.with_values(fit.resid, id=f"{s.id}_resid")


def _check_proxy(rv, sigma2, label: str) -> None:
    ok = np.isfinite(rv) & (rv > 0)
    if ok.any() and not proxy_scale_ok(rv[ok], np.asarray(sigma2)[ok]):
        _note(
            f"warning: {label}: median(proxy)/median(fitted variance) lies outside [0.1, 10]; "
            "check that proxy and returns are in matching units"
        )


# --------------------------------------------------------------------------- svg


def render_svg(res: CrossQuantilogramResult, width: int = 480, height: int = 240) -> str:
    """Bar panel of ``rho`` by lag with the bootstrap band as dashed steps."""
    pad = 30
    K = res.lags.size
    vals = np.concatenate([res.rho, res.ci_lo, res.ci_hi])
    top = max(float(np.nanmax(np.abs(vals))), 1e-3) * 1.1
    bw = (width - 2 * pad) / K

    def y(v: float) -> float:
        return height / 2 - v / top * (height / 2 - pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<text x="{pad}" y="16" font-size="12">{res.labels[0]} {res.tau1.label()} | '
        f"{res.labels[1]} {res.tau2.label()}</text>",
        f'<line x1="{pad}" y1="{y(0):.2f}" x2="{width - pad}" y2="{y(0):.2f}" stroke="black"/>',
    ]
    for i in range(K):
        x0 = pad + i * bw
        r = float(res.rho[i])
        y0, y1 = sorted((y(0), y(r)))
        parts.append(
            f'<rect x="{x0 + 0.15 * bw:.2f}" y="{y0:.2f}" width="{0.7 * bw:.2f}" '
            f'height="{y1 - y0:.2f}" fill="steelblue"/>'
        )
        for v in (res.ci_lo[i], res.ci_hi[i]):
            parts.append(
                f'<line x1="{x0:.2f}" y1="{y(v):.2f}" x2="{x0 + bw:.2f}" y2="{y(v):.2f}" '
                'stroke="red" stroke-dasharray="3,2"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _write_cell(ns, out: Path, stem: str, res: CrossQuantilogramResult) -> list[Path]:
    if ns.format == "json":
        return [_write(out / f"{stem}.json", res.to_json() + "\n")]
    paths = [_write(out / f"{stem}.csv", res.to_csv())]
    if ns.format == "svg-bars":
        paths.append(_write(out / f"{stem}.svg", render_svg(res)))
    return paths


# --------------------------------------------------------------------------- commands


def cmd_ingest(ns) -> int:
    s = _load(ns, ns.input)
    if ns.demean:
        s = demean(s)
    out = Path(ns.out_dir)
    path = _write(out / f"{_safe_label(s.id)}.json", s.to_json() + "\n")
    n_rv = 0 if s.rv is None else int(np.sum(~np.isnan(s.rv)))
    print(f"{s.id}: {len(s)} rows {s.dates[0]}..{s.dates[-1]}, rv present on {n_rv} rows -> {path}")
    return 0


def cmd_simulate(ns) -> int:
    params = json.loads(ns.params)
    spec = DgpSpec(ns.kind, ns.T, seed=ns.seed, params=params, innovation=ns.innovation, nu=ns.nu)
    sim = simulate(spec)
    out = Path(ns.out) if ns.out else Path(ns.out_dir) / f"sim_{ns.kind}.csv"
    schema = _schema(ns)
    written = [_write(out, sim.y.to_csv(schema))]
    if sim.driver is not None:
        written.append(_write(out.with_name(f"{out.stem}_driver{out.suffix}"), sim.driver.to_csv(schema)))
    for p in written:
        print(p)
    return 0


def _cells(mode: str, ranges) -> list[tuple[QuantileRange, QuantileRange]]:
    if mode == "grid":
        return [(r, r) for r in ranges]
    return [(r, t) for t in TAIL_RANGES for r in ranges]


def cmd_xquant(ns) -> int:
    a = _load(ns, ns.y1)
    b = _load(ns, ns.y2)
    if ns.residualize in ("a", "both"):
        a = _residualize(a)
    if ns.residualize in ("b", "both"):
        b = _residualize(b)
    pair = align(a, b)
    cells = _cells(ns.mode, _ranges(ns.ranges))
    results = quantilogram_grid(pair, cells, ns.max_lag, _boot(ns))
    out = Path(ns.out_dir)
    prefix = f"xquant_{_safe_label(a.id)}_{_safe_label(b.id)}"
    for (t1, t2), res in zip(cells, results):
        _write_cell(ns, out, f"{prefix}_{_range_tag(t1)}_{_range_tag(t2)}", res)
    summary = {
        "kind": "xquant",
        "y1": a.id,
        "y2": b.id,
        "mode": ns.mode,
        "residualize": ns.residualize,
        "T": len(pair),
        "cells": [r.to_dict() for r in results],
    }
    path = _write(out / f"{prefix}_summary.json", _dump(summary))
    for res in results:
        star = "*" if res.significant[0] else ""
        print(f"{res.tau1.label()} | {res.tau2.label()}: rho(1) = {res.rho[0]:.4f}{star}")
    print(path)
    return 0


def cmd_auto(ns) -> int:
    s = _load(ns, ns.input)
    if ns.residualize:
        s = _residualize(s)
    pair = AlignedPair(s, s)
    ranges = _ranges(ns.ranges)
    results = quantilogram_grid(pair, [(r, r) for r in ranges], ns.max_lag, _boot(ns))
    out = Path(ns.out_dir)
    prefix = f"auto_{_safe_label(s.id)}"
    for r, res in zip(ranges, results):
        _write_cell(ns, out, f"{prefix}_{_range_tag(r)}", res)
    summary = {
        "kind": "xquant",
        "y1": s.id,
        "y2": s.id,
        "mode": "auto",
        "residualize": "both" if ns.residualize else "none",
        "T": len(s),
        "cells": [r.to_dict() for r in results],
    }
    print(_write(out / f"{prefix}_summary.json", _dump(summary)))
    return 0


def _fit_payload(fit, s: ReturnSeries, extra: dict | None = None) -> dict:
    d = {"series": s.id, "dates": [str(x) for x in s.dates]}
    d.update(fit.to_dict(with_paths=True))
    if extra:
        d.update(extra)
    return d


def _model_tag(name: str) -> str:
    return name.replace("-", "_")


def cmd_fit_garch(ns) -> int:
    s = demean(_load(ns, ns.input))
    rm = None
    if ns.model == "heavy":
        if s.rv is None:
            raise QuantvolError(f"HEAVY needs a realized measure column {ns.rv_col!r}")
        rm = s.rv
    fit = fit_base(s.ret, _model_tag(ns.model), rm)
    lb = garch.ljung_box_usual(fit.resid, ns.ljung_box)
    lb2 = garch.ljung_box_usual(fit.resid**2, ns.ljung_box)
    extra = {
        "ljung_box": {"lags": ns.ljung_box, "resid": [lb.statistic, lb.p_value], "resid_sq": [lb2.statistic, lb2.p_value]}
    }
    if s.rv is not None:
        _check_proxy(s.rv, fit.h, s.id)
    path = _write(Path(ns.out_dir) / f"fit_{_model_tag(ns.model)}_{_safe_label(s.id)}.json", _dump(_fit_payload(fit, s, extra)))
    print(f"{fit.model}: {fit.params} loglik={fit.loglik:.4f} converged={fit.converged}")
    print(path)
    return 0


def _pair_inputs(ns) -> tuple[ReturnSeries, ReturnSeries]:
    if not ns.driver:
        raise QuantvolError("--driver is required")
    pair = align(demean(_load(ns, ns.input)), demean(_load(ns, ns.driver)))
    return pair.a, pair.b


def cmd_fit_qa(ns) -> int:
    y, d = _pair_inputs(ns)
    base = _model_tag(ns.base)
    rm = y.rv if base == "heavy" else None
    if base == "heavy" and rm is None:
        raise QuantvolError(f"HEAVY base needs a realized measure column {ns.rv_col!r}")
    tail = TailSpec(ns.tails[0], ns.tails[1], ns.driver_source)
    fit = fit_qa(y.ret, d.ret, base, tail, rm=rm)
    if y.rv is not None:
        _check_proxy(y.rv, fit.sigma2, y.id)
    payload = _fit_payload(fit, y, {"driver_series": d.id})
    name = f"fit_qa_{base}_{ns.driver_source}_{_safe_label(y.id)}_{_safe_label(d.id)}.json"
    path = _write(Path(ns.out_dir) / name, _dump(payload))
    print(f"qa_{base}: delta={fit.delta.tolist()} q_lo={fit.q_lo:.6g} q_hi={fit.q_hi:.6g} floored={fit.floored}")
    print(path)
    return 0


def cmd_fit_garchx(ns) -> int:
    y, d = _pair_inputs(ns)
    tail = TailSpec(ns.tails[0], ns.tails[1], ns.driver_source)
    fit = fit_garch_x(y.ret, d.ret, tail)
    payload = _fit_payload(fit, y, {"driver_series": d.id})
    name = f"fit_garchx_{ns.driver_source}_{_safe_label(y.id)}_{_safe_label(d.id)}.json"
    path = _write(Path(ns.out_dir) / name, _dump(payload))
    print(f"garch_x: {fit.params} loglik={fit.loglik:.4f}")
    print(path)
    return 0


def _comparisons(names: Sequence[str]) -> list[tuple[str, str]]:
    """Pairs ``(base, alt)``: each QA model against its base, GARCH-X against GJR."""
    out = []
    for spec in parse_models(list(names)):
        if spec.kind == "qa" and spec.base.replace("_", "-") in names:
            out.append((spec.base.replace("_", "-"), spec.name))
        elif spec.kind == "garch_x" and "gjr" in names:
            out.append(("gjr", spec.name))
    return out


def _dmw_record(res: DmwResult, setting: str, series: str) -> dict:
    return dict(res.to_dict(), setting=setting, series=series)


def cmd_oos(ns) -> int:
    y = demean(_load(ns, ns.input))
    d = None
    specs = parse_models(ns.models, ns.tails)
    if any(s.needs_driver for s in specs):
        y, d = _pair_inputs(ns)
    losses = rolling_oos(y, d, specs, window=ns.window, n_jobs=ns.jobs)
    names = [s.name for s in specs]
    out = Path(ns.out_dir)
    first = losses[names[0]]
    if ns.format == "json":
        body = {
            "series": y.id,
            "window": ns.window,
            "dates": [str(x) for x in first.dates],
            "fit_through": [str(x) for x in first.fit_through],
            "loss": {n: [None if math.isnan(v) else v for v in losses[n].loss.tolist()] for n in names},
        }
        loss_path = _write(out / f"oos_losses_{_safe_label(y.id)}.json", _dump(body))
    else:
        rows = [
            [str(first.dates[i]), str(first.fit_through[i])] + [repr(float(losses[n].loss[i])) for n in names]
            for i in range(len(first))
        ]
        loss_path = _write(out / f"oos_losses_{_safe_label(y.id)}.csv", _csv_text(["date", "fit_through", *names], rows))
    records = []
    for base, alt in _comparisons(names):
        res = dmw_test(losses[base], losses[alt])
        records.append(_dmw_record(res, "out-of-sample", y.id))
        print(f"{alt} vs {base}: DMW = {res.statistic:.3f}{res.stars} (p = {res.p_value:.4f}, T = {res.T})")
    dmw_path = _write(out / f"oos_dmw_{_safe_label(y.id)}.json", _dump(records))
    print(f"{len(first)} forecasts per model")
    print(loss_path)
    print(dmw_path)
    return 0


class _SavedFit:
    def __init__(self, path: str):
        self.path = path
        d = json.loads(_input_path(path).read_text())
        if "sigma2" not in d:
            raise QuantvolError(f"{path}: fit file holds no fitted variance path")
        self.model = d.get("model", Path(path).stem)
        self.series = d.get("series", "")
        self.dates = d.get("dates")
        self.sigma2 = np.asarray(d["sigma2"], dtype=float)


def cmd_evaluate(ns) -> int:
    missing = [f for f in ("base", "alt", "series") if not getattr(ns, f)]
    if missing:
        raise QuantvolError("evaluate needs " + ", ".join(f"--{m}" for m in missing))
    base, alt = _SavedFit(ns.base), _SavedFit(ns.alt)
    proxy_col = ns.proxy or ns.rv_col
    s = load_csv(_input_path(ns.series), CsvSchema(ns.date_col, ns.ret_col, proxy_col, rv_required=True))
    if base.dates is not None or alt.dates is not None:
        want = base.dates if base.dates is not None else alt.dates
        if alt.dates is not None and alt.dates != want:
            raise QuantvolError("base and alt fits cover different dates")
        pos = {str(x): i for i, x in enumerate(s.dates)}
        missing_days = [x for x in want if x not in pos]
        if missing_days:
            raise QuantvolError(f"{ns.series}: no proxy on fit date {missing_days[0]}")
        s = s.take(np.array([pos[x] for x in want], dtype=int))
    if base.sigma2.size != len(s) or alt.sigma2.size != len(s):
        raise QuantvolError("fits and proxy series differ in length")
    rv = np.asarray(s.rv)
    _check_proxy(rv, base.sigma2, s.id)
    res = insample_compare(base, alt, rv, base_id=base.model, alt_id=alt.model)
    rec = _dmw_record(res, "in-sample", base.series or s.id)
    name = f"dmw_{_safe_label(alt.model)}_vs_{_safe_label(base.model)}_{_safe_label(rec['series'])}.json"
    path = _write(Path(ns.out_dir) / name, _dump([rec]))
    print(f"{alt.model} vs {base.model}: DMW = {res.statistic:.3f}{res.stars} (p = {res.p_value:.4f}, T = {res.T})")
    print(path)
    return 0


def cmd_report(ns) -> int:
    if not ns.xquant and not ns.dmw:
        raise QuantvolError(
            "report needs at least one artifact: --xquant <xquant/auto *_summary.json> "
            "and/or --dmw <evaluate dmw_*.json | oos oos_dmw_*.json>"
        )
    out = Path(ns.out_dir)
    for p in [*ns.xquant, *ns.dmw]:
        if not _input_path(p).exists():
            raise FileNotFoundError(f"missing artifact: {p}")
    ext = "json" if ns.format == "json" else "csv"
    if ns.xquant:
        columns = []
        table: dict[str, dict[str, str]] = {}
        order: list[str] = []
        for p in ns.xquant:
            d = json.loads(_input_path(p).read_text())
            col = f"{d['y2']}->{d['y1']}" + ("" if d.get("residualize", "none") == "none" else f" ({d['residualize']})")
            columns.append(col)
            for cell in d["cells"]:
                res = CrossQuantilogramResult.from_dict(cell)
                i = int(np.searchsorted(res.lags, ns.lag))
                if i >= res.lags.size or res.lags[i] != ns.lag:
                    raise QuantvolError(f"{p}: lag {ns.lag} not available")
                row = f"{res.tau1.label()}|{res.tau2.label()}"
                if row not in table:
                    table[row] = {}
                    order.append(row)
                table[row][col] = f"{res.rho[i]:.3f}" + ("*" if res.significant[i] else "")
        if ext == "json":
            text = _dump({"lag": ns.lag, "columns": columns, "rows": {r: table[r] for r in order}})
        else:
            text = _csv_text(["range", *columns], [[r, *(table[r].get(c, "") for c in columns)] for r in order])
        print(_write(out / f"table_lag{ns.lag}.{ext}", text))
    if ns.dmw:
        records = []
        for p in ns.dmw:
            d = json.loads(_input_path(p).read_text())
            records.extend(d if isinstance(d, list) else [d])
        cols: list[str] = []
        rows: dict[str, dict[str, str]] = {}
        order = []
        for r in records:
            col = f"{r['series']} {r['setting']}"
            if col not in cols:
                cols.append(col)
            row = f"{r['alt'].replace('_', '-')} vs {r['base'].replace('_', '-')}"
            if row not in rows:
                rows[row] = {}
                order.append(row)
            stars = "**" if r["p_value"] < 0.01 else "*" if r["p_value"] < 0.05 else ""
            rows[row][col] = f"{r['statistic']:.2f}{stars}"
        if ext == "json":
            text = _dump({"columns": cols, "rows": {r: rows[r] for r in order}})
        else:
            text = _csv_text(["comparison", *cols], [[r, *(rows[r].get(c, "") for c in cols)] for r in order])
        print(_write(out / f"table_dmw.{ext}", text))
    return 0


COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "ingest": cmd_ingest,
    "simulate": cmd_simulate,
    "xquant": cmd_xquant,
    "auto": cmd_auto,
    "fit-garch": cmd_fit_garch,
    "fit-qa": cmd_fit_qa,
    "fit-garchx": cmd_fit_garchx,
    "oos": cmd_oos,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        ns = _resolve(ns)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[ns.command](ns)
    except (QuantvolError, ValueError, OSError, KeyError, json.JSONDecodeError) as err:
        print(f"quantvol {ns.command}: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
