"""Daily return series: ingestion, alignment, demeaning, empirical quantiles, windows."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import AlignmentError, EmptyInputError, ParseError, SchemaError

__all__ = [
    "Observation",
    "ReturnSeries",
    "AlignedPair",
    "QuantileRange",
    "CsvSchema",
    "load_csv",
    "align",
    "demean",
    "empirical_quantile",
    "order_statistic_rank",
    "rolling_windows",
    "DEFAULT_GRID",
]


class Observation(NamedTuple):
    date: date
    ret: float
    rv: float | None = None


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Dated daily returns with an optional realized-variance proxy.

    Arrays are copied and made read-only on construction. ``dates`` is a
    ``datetime64[D]`` array and must be strictly increasing.
    """

    id: str
    dates: np.ndarray
    ret: np.ndarray
    rv: np.ndarray | None = None
    demeaned: bool = False

    def __post_init__(self) -> None:
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        ret = np.asarray(self.ret, dtype=float)
        if dates.ndim != 1 or ret.shape != dates.shape:
            raise ValueError("dates and ret must be 1-d arrays of equal length")
        if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
            raise ValueError(f"series {self.id!r}: dates must be strictly increasing")
        object.__setattr__(self, "dates", _frozen(dates))
        object.__setattr__(self, "ret", _frozen(ret))
        if self.rv is not None:
            rv = np.asarray(self.rv, dtype=float)
            if rv.shape != ret.shape:
                raise ValueError("rv must have the same length as ret")
            if np.any(rv[~np.isnan(rv)] < 0):
                raise ValueError(f"series {self.id!r}: rv must be nonnegative")
            object.__setattr__(self, "rv", _frozen(rv))

    def __len__(self) -> int:
        return self.ret.size

    @property
    def observations(self) -> list[Observation]:
        rv = self.rv if self.rv is not None else [None] * len(self)
        return [
            Observation(d.item(), float(r), None if v is None or np.isnan(v) else float(v))
            for d, r, v in zip(self.dates, self.ret, rv)
        ]

    def take(self, idx) -> ReturnSeries:
        """Restrict to the rows selected by ``idx`` (a slice or sorted index array)."""
        return replace(
            self,
            dates=self.dates[idx],
            ret=self.ret[idx],
            rv=None if self.rv is None else self.rv[idx],
        )

    def with_values(self, ret: np.ndarray, id: str | None = None) -> ReturnSeries:
        return replace(self, ret=ret, id=self.id if id is None else id, demeaned=False)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "demeaned": self.demeaned,
            "dates": [str(d) for d in self.dates],
            "ret": self.ret.tolist(),
            "rv": None
            if self.rv is None
            else [None if np.isnan(v) else float(v) for v in self.rv],
        }

    @classmethod
    def from_dict(cls, d: dict) -> ReturnSeries:
        rv = d.get("rv")
        if rv is not None:
            rv = np.array([np.nan if v is None else v for v in rv], dtype=float)
        return cls(
            id=d["id"],
            dates=np.array(d["dates"], dtype="datetime64[D]"),
            ret=np.array(d["ret"], dtype=float),
            rv=rv,
            demeaned=bool(d.get("demeaned", False)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> ReturnSeries:
        return cls.from_dict(json.loads(text))

    def to_csv(self, schema: CsvSchema | None = None) -> str:
        """CSV text readable by :func:`load_csv`; missing rv values are left blank."""
        schema = schema or CsvSchema()
        header = [schema.date, schema.ret]
        with_rv = self.rv is not None and schema.rv is not None
        if with_rv:
            header.append(schema.rv)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for i in range(len(self)):
            row = [str(self.dates[i]), repr(float(self.ret[i]))]
            if with_rv:
                v = self.rv[i]
                row.append("" if np.isnan(v) else repr(float(v)))
            w.writerow(row)
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class AlignedPair:
    a: ReturnSeries
    b: ReturnSeries

    def __post_init__(self) -> None:
        if not np.array_equal(self.a.dates, self.b.dates):
            raise AlignmentError("pair members must share an identical date vector")

    def __len__(self) -> int:
        return len(self.a)

    @property
    def dates(self) -> np.ndarray:
        return self.a.dates

    def take(self, idx) -> AlignedPair:
        return AlignedPair(self.a.take(idx), self.b.take(idx))


@dataclass(frozen=True, order=True)
class QuantileRange:
    """Probability interval ``[lo, hi]`` defining a quantile event."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.lo < self.hi <= 1.0):
            raise ValueError(f"need 0 <= lo < hi <= 1, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @classmethod
    def parse(cls, text: str) -> QuantileRange:
        """Parse ``"0.05,0.1"``, ``"[0.05,0.1]"`` or ``"0.05-0.1"``."""
        body = text.strip().strip("[]()")
        sep = "," if "," in body else "-"
        lo, hi = (float(x) for x in body.split(sep))
        return cls(lo, hi)

    def label(self) -> str:
        return f"[{self.lo:g},{self.hi:g}]"


DEFAULT_GRID: tuple[QuantileRange, ...] = tuple(
    QuantileRange(lo, hi)
    for lo, hi in [
        (0.0, 0.05),
        (0.05, 0.1),
        (0.1, 0.2),
        (0.2, 0.4),
        (0.4, 0.6),
        (0.6, 0.8),
        (0.8, 0.9),
        (0.9, 0.95),
        (0.95, 1.0),
    ]
)


@dataclass(frozen=True)
class CsvSchema:
    """Column names for :func:`load_csv`.

    ``rv`` is read when present; set ``rv_required`` to make its absence an
    error, or ``rv=None`` to ignore it.
    """

    date: str = "date"
    ret: str = "ret"
    rv: str | None = "rk"
    rv_required: bool = False


def load_csv(path, schema: CsvSchema | None = None, id: str | None = None) -> ReturnSeries:
    """Read a dated return series from CSV, sorted ascending by date.

    Raises
    ------
    SchemaError
        A required column is missing from the header.
    ParseError
        Bad dates or numbers, negative rv, or duplicate dates. Every offending
        line is listed in the message; ``line`` holds the first.
    EmptyInputError
        No data rows.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyInputError(f"{path}: file is empty") from None
        cols = {name: i for i, name in enumerate(header)}
        for need in (schema.date, schema.ret):
            if need not in cols:
                raise SchemaError(f"{path}: missing column {need!r} (have {header})")
        rv_col = None
        if schema.rv is not None:
            if schema.rv in cols:
                rv_col = cols[schema.rv]
            elif schema.rv_required:
                raise SchemaError(f"{path}: missing column {schema.rv!r} (have {header})")

        rows: list[tuple[np.datetime64, float, float, int]] = []
        bad: list[tuple[int, str]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                d = date.fromisoformat(row[cols[schema.date]].strip())
            except (ValueError, IndexError):
                bad.append((lineno, f"invalid date in row {row!r}"))
                continue
            try:
                r = float(row[cols[schema.ret]])
                if not math.isfinite(r):
                    raise ValueError
                v = math.nan
                if rv_col is not None and row[rv_col].strip():
                    v = float(row[rv_col])
                    if not v >= 0:
                        raise ValueError
            except (ValueError, IndexError):
                bad.append((lineno, f"invalid number in row {row!r}"))
                continue
            rows.append((np.datetime64(d, "D"), r, v, lineno))

    if bad:
        msg = "; ".join(f"line {ln}: {m}" for ln, m in bad)
        err = ParseError(f"{path}: {msg}")
        err.line = bad[0][0]
        raise err
    if not rows:
        raise EmptyInputError(f"{path}: no valid data rows")

    rows.sort(key=lambda r: r[0])
    dates = np.array([r[0] for r in rows], dtype="datetime64[D]")
    dup = np.flatnonzero(dates[1:] == dates[:-1])
    if dup.size:
        first = rows[dup[0] + 1]
        raise ParseError(f"{path}: duplicate date {first[0]}", line=first[3])
    rv = None
    if rv_col is not None:
        rv = np.array([r[2] for r in rows])
    return ReturnSeries(
        id=id or path.stem,
        dates=dates,
        ret=np.array([r[1] for r in rows]),
        rv=rv,
    )


def align(a: ReturnSeries, b: ReturnSeries) -> AlignedPair:
    """Restrict both series to the dates they have in common."""
    if len(a) == 0 or len(b) == 0:
        raise AlignmentError("cannot align an empty series")
    common, ia, ib = np.intersect1d(a.dates, b.dates, assume_unique=True, return_indices=True)
    if common.size == 0:
        raise AlignmentError(f"series {a.id!r} and {b.id!r} share no dates")
    return AlignedPair(a.take(ia), b.take(ib))


def demean(s: ReturnSeries) -> ReturnSeries:
    ret = s.ret - s.ret.mean()
    # second pass removes the rounding residue of the first
    ret = ret - ret.mean()
    return replace(s, ret=ret, demeaned=True)


def order_statistic_rank(tau: float, n: int) -> int:
    """1-based rank ``ceil(tau * n)`` clamped to ``[1, n]``.

    The product is rounded to 10 decimals first so that e.g. ``0.1 * 30``
    gives rank 3 rather than 4.
    """
    k = math.ceil(round(tau * n, 10))
    return min(max(k, 1), n)


def empirical_quantile(values: Sequence[float], tau: float) -> float:
    """The ``ceil(tau*T)``-th order statistic of ``values`` (no interpolation).

    ``tau == 0`` returns ``-inf``: the lower end of a range starting at zero is
    an open bound.
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise EmptyInputError("empirical_quantile of an empty sample")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if tau == 0.0:
        return -math.inf
    k = order_statistic_rank(tau, x.size)
    return float(np.partition(x, k - 1)[k - 1])


def rolling_windows(
    s: ReturnSeries | int, width: int, step: int = 1, forecast: bool = False
) -> list[range]:
    """Contiguous windows ``range(i, i + width)`` for ``i = 0, step, 2*step, ...``.

    With ``forecast=True`` only windows followed by at least one more
    observation are returned, one per one-step-ahead target, so a sample of
    length ``n`` yields ``n - width`` windows at ``step=1``.
    """
    n = s if isinstance(s, int) else len(s)
    if width < 1 or step < 1:
        raise ValueError("width and step must be >= 1")
    if width > n:
        raise ValueError(f"window width {width} exceeds series length {n}")
    last_start = n - width - (1 if forecast else 0)
    return [range(i, i + width) for i in range(0, last_start + 1, step)]
