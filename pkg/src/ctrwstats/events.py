"""
Excessive-loss / excessive-profit events in a return series.

A loss event at threshold Q is a tick with ``return <= -Q`` (its magnitude
``|return|`` is recorded); a profit event is a tick with ``return >= Q``.
Interevent times are tick differences.  The empirical R_Q is the mean
interevent time; the quantile estimate ``n_ticks / n_events`` is reported
alongside it.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .extreme_model import ThresholdPoint

DEFAULT_MIN_EVENTS = 10

MODES = ("loss", "profit")


class InputError(ValueError):
    """Malformed input data; carries the offending line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class ReturnSeries:
    timestamps: np.ndarray
    returns: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps)
        r = np.asarray(self.returns, dtype=float)
        if t.ndim != 1 or r.ndim != 1 or len(t) != len(r):
            raise InputError("timestamps and returns must be 1-d arrays of equal length")
        if len(t) and not np.issubdtype(t.dtype, np.integer):
            if not np.all(np.equal(np.mod(t, 1), 0)):
                raise InputError("timestamps must be integer ticks")
            t = t.astype(np.int64)
        if np.any(np.diff(t) <= 0):
            bad = int(np.argmax(np.diff(t) <= 0)) + 1
            raise InputError(f"timestamps must be strictly increasing (index {bad})")
        if not np.all(np.isfinite(r)):
            bad = int(np.argmax(~np.isfinite(r)))
            raise InputError(f"non-finite return at index {bad}")
        object.__setattr__(self, "timestamps", t.astype(np.int64))
        object.__setattr__(self, "returns", r)

    def __len__(self):
        return len(self.returns)

    @classmethod
    def from_returns(cls, returns) -> "ReturnSeries":
        r = np.asarray(returns, dtype=float)
        return cls(np.arange(len(r), dtype=np.int64), r)

    def negated(self) -> "ReturnSeries":
        return ReturnSeries(self.timestamps.copy(), -self.returns)


@dataclass
class InterEventSample:
    mode: str
    q: float
    event_times: np.ndarray
    deltas: np.ndarray
    r_q_empirical: float | None
    magnitudes: np.ndarray | None = None
    n_ticks: int | None = None
    min_events: int = DEFAULT_MIN_EVENTS
    notes: list[str] = field(default_factory=list)

    @property
    def n_events(self) -> int:
        return int(len(self.event_times))

    @property
    def empty(self) -> bool:
        return len(self.deltas) == 0

    @property
    def reliable(self) -> bool:
        return self.n_events >= self.min_events and not self.empty

    @property
    def r_q_quantile(self) -> float | None:
        if self.n_ticks is None or self.n_events == 0:
            return None
        return self.n_ticks / self.n_events

    def to_dict(self) -> dict:
        def plain(a):
            a = np.asarray(a)
            return a.tolist()

        return {
            "mode": self.mode,
            "q": self.q,
            "event_times": plain(self.event_times),
            "deltas": plain(self.deltas),
            "r_q_empirical": self.r_q_empirical,
            "n_events": self.n_events,
            "reliable": self.reliable,
        }

    def to_json(self, path=None, indent=None) -> str:
        text = json.dumps(self.to_dict(), indent=indent)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "InterEventSample":
        for key in ("mode", "q", "event_times", "deltas"):
            if key not in d:
                raise InputError(f"interevent sample is missing '{key}'")
        deltas = np.asarray(d["deltas"], dtype=float)
        if deltas.size and np.all(deltas == np.round(deltas)):
            deltas = deltas.astype(np.int64)
        return cls(
            mode=d["mode"],
            q=float(d["q"]),
            event_times=np.asarray(d["event_times"]),
            deltas=deltas,
            r_q_empirical=d.get("r_q_empirical"),
        )


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    densities: np.ndarray
    binning: str
    degenerate: bool = False

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        if self.binning == "logarithmic" and self.edges[0] > 0:
            return np.sqrt(self.edges[:-1] * self.edges[1:])
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_lo", "bin_hi", "count", "density"])
            for lo, hi, c, d in zip(self.edges[:-1], self.edges[1:], self.counts, self.densities):
                w.writerow([repr(float(lo)), repr(float(hi)), int(c), repr(float(d))])

    @classmethod
    def from_csv(cls, path, binning="logarithmic") -> "Histogram":
        rows = _read_csv_rows(path, ("bin_lo", "bin_hi", "count", "density"))
        lo = np.array([float(r[0]) for _, r in rows])
        hi = np.array([float(r[1]) for _, r in rows])
        if len(lo) == 0:
            raise InputError("histogram file has no bins")
        if np.any(lo[1:] != hi[:-1]) or np.any(hi <= lo):
            raise InputError("histogram bins must be contiguous and increasing")
        counts = np.array([int(float(r[2])) for _, r in rows])
        dens = np.array([float(r[3]) for _, r in rows])
        return cls(np.concatenate([lo, hi[-1:]]), counts, dens, binning)


def _read_csv_rows(path, header):
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise InputError("empty file", line=1) from None
        names = [c.strip() for c in first]
        if tuple(names[: len(header)]) != tuple(header[: len(names)]) or len(names) < 2:
            raise InputError(f"expected header {','.join(header)}, got {','.join(names)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(names):
                raise InputError(f"expected {len(names)} fields, got {len(row)}", line=lineno)
            out.append((lineno, [c.strip() for c in row]))
    return out


def read_series_csv(path, log_returns: bool = False) -> ReturnSeries:
    """Read a ``t,r`` CSV.

    ``log_returns`` converts simple returns to ``ln(1 + r)`` on ingestion.
    """
    rows = _read_csv_rows(path, ("t", "r"))
    ts, rs = [], []
    prev = None
    for lineno, (t_txt, r_txt) in rows:
        try:
            t = int(t_txt)
        except ValueError:
            raise InputError(f"tick '{t_txt}' is not an integer", line=lineno) from None
        try:
            r = float(r_txt)
        except ValueError:
            raise InputError(f"return '{r_txt}' is not a number", line=lineno) from None
        if not math.isfinite(r):
            raise InputError("non-finite return", line=lineno)
        if prev is not None and t == prev:
            raise InputError(f"duplicate tick {t}", line=lineno)
        if prev is not None and t < prev:
            raise InputError(f"tick {t} out of order", line=lineno)
        if log_returns:
            if r <= -1.0:
                raise InputError("simple return <= -1 has no log return", line=lineno)
            r = math.log1p(r)
        prev = t
        ts.append(t)
        rs.append(r)
    if not ts:
        raise InputError("series is empty")
    return ReturnSeries(np.array(ts, dtype=np.int64), np.array(rs))


def write_series_csv(s: ReturnSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "r"])
        for t, r in zip(s.timestamps.tolist(), s.returns.tolist()):
            w.writerow([t, repr(r)])


def _event_mask(s: ReturnSeries, mode: str, q: float, inclusive: bool):
    if mode == "loss":
        return s.returns <= -q if inclusive else s.returns < -q
    if mode == "profit":
        return s.returns >= q if inclusive else s.returns > q
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def extract_events(
    s: ReturnSeries,
    mode: str,
    q: float,
    inclusive: bool = True,
    min_events: int = DEFAULT_MIN_EVENTS,
) -> InterEventSample:
    """Events at threshold ``q`` and the interevent times between them.

    An empty result (fewer than two events) is returned with
    ``r_q_empirical=None`` and a note rather than raised.
    """
    if not (q > 0 and math.isfinite(q)):
        raise ValueError("q must be finite and > 0")
    if len(s) == 0:
        raise InputError("series is empty")
    mask = _event_mask(s, mode, q, inclusive)
    times = s.timestamps[mask]
    deltas = np.diff(times)
    sample = InterEventSample(
        mode=mode,
        q=float(q),
        event_times=times,
        deltas=deltas,
        r_q_empirical=float(deltas.mean()) if len(deltas) else None,
        magnitudes=np.abs(s.returns[mask]),
        n_ticks=len(s),
        min_events=min_events,
    )
    if sample.empty:
        sample.notes.append("fewer than two events; R_Q undefined")
    return sample


def centered_moving_average(x, window: int) -> np.ndarray:
    """Mean over ``[i - (w-1)//2, i + w//2]``, truncated at the ends."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if window < 2:
        raise ValueError("window must be >= 2")
    if window > n:
        raise ValueError("window longer than the series")
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(n)
    lo = np.maximum(idx - (window - 1) // 2, 0)
    hi = np.minimum(idx + window // 2 + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def detrend(s: ReturnSeries, window: int) -> ReturnSeries:
    """Subtract a centered moving average of the returns."""
    trend = centered_moving_average(s.returns, window)
    return ReturnSeries(s.timestamps.copy(), s.returns - trend)


def histogram(sample, binning: str = "logarithmic", n_bins: int = 30) -> Histogram:
    """Unit-mass histogram of interevent times.

    ``sample`` is an :class:`InterEventSample` or an array of deltas.
    Logarithmic binning uses geometric edges from the smallest to the largest
    delta.  A sample with a single distinct value gives one bin and is flagged
    ``degenerate``.
    """
    deltas = np.asarray(sample.deltas if isinstance(sample, InterEventSample) else sample, dtype=float)
    if deltas.size == 0:
        raise ValueError("cannot histogram an empty sample")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if binning in ("log", "logarithmic"):
        binning = "logarithmic"
    elif binning in ("lin", "linear"):
        binning = "linear"
    else:
        raise ValueError(f"unknown binning {binning!r}")
    lo, hi = float(deltas.min()), float(deltas.max())
    if lo == hi:
        half = 0.5 if lo >= 1 else 0.5 * lo if lo > 0 else 0.5
        edges = np.array([lo - half, hi + half])
        counts = np.array([deltas.size])
        return Histogram(edges, counts, counts / (deltas.size * np.diff(edges)), binning, degenerate=True)
    if binning == "logarithmic":
        if lo <= 0:
            raise ValueError("logarithmic binning needs positive deltas")
        edges = np.geomspace(lo, hi, n_bins + 1)
    else:
        edges = np.linspace(lo, hi, n_bins + 1)
    edges[0], edges[-1] = lo, hi
    counts, _ = np.histogram(deltas, bins=edges)
    dens = counts / (deltas.size * np.diff(edges))
    return Histogram(edges, counts, dens, binning)


def rq_curve(
    s: ReturnSeries,
    mode: str,
    q_grid,
    min_events: int = DEFAULT_MIN_EVENTS,
    inclusive: bool = True,
) -> list[ThresholdPoint]:
    """Empirical mean interevent time at each threshold of ``q_grid``.

    Each point carries the event count, a reliability flag (at least
    ``min_events`` events), the standard error of the mean delta, and the
    quantile estimate ``n_ticks / n_events``.  Thresholds with fewer than two
    events give ``r_q = nan``.
    """
    q_grid = np.asarray(q_grid, dtype=float)
    if np.any(q_grid <= 0) or np.any(np.diff(q_grid) <= 0):
        raise ValueError("q_grid must be positive and strictly increasing")
    out = []
    for q in q_grid:
        smp = extract_events(s, mode, float(q), inclusive=inclusive, min_events=min_events)
        if smp.empty:
            out.append(ThresholdPoint(float(q), math.nan, smp.n_events, False, None, smp.r_q_quantile))
            continue
        d = smp.deltas
        se = float(d.std(ddof=1) / math.sqrt(len(d))) if len(d) > 1 else None
        out.append(ThresholdPoint(float(q), smp.r_q_empirical, smp.n_events, smp.reliable, se, smp.r_q_quantile))
    return out


def write_rq_curve_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "r_q", "n_events", "reliable"])
        for p in points:
            w.writerow([repr(float(p.q)), repr(float(p.r_q)), p.n_events if p.n_events is not None else "", int(p.reliable)])


def read_rq_curve_csv(path) -> list[ThresholdPoint]:
    rows = _read_csv_rows(path, ("q", "r_q", "n_events", "reliable"))
    out = []
    for lineno, row in rows:
        try:
            q, r = float(row[0]), float(row[1])
            n = int(row[2]) if len(row) > 2 and row[2] else None
            rel = bool(int(row[3])) if len(row) > 3 and row[3] else True
        except ValueError:
            raise InputError("unparseable R_Q curve row", line=lineno) from None
        out.append(ThresholdPoint(q, r, n, rel))
    return out
