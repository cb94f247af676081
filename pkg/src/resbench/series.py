"""Time-series model and preprocessing for throughput/latency curves.

All analysis downstream (detection, scoring) assumes a uniform sampling
grid, so :func:`fill_missing` is the mandatory first step of any pipeline.
Operations are pure: each returns a new series and never mutates its input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    EmptySeries,
    InvalidSegmentation,
    InvalidWindow,
    MalformedSeriesCsv,
    OutOfRange,
)

SERIES_CSV_HEADER = "timestamp_ms,throughput_tps,latency_ms"


class Metric(Enum):
    THROUGHPUT = "throughput"
    LATENCY = "latency"


@dataclass(frozen=True)
class Sample:
    """One point of a performance curve: milliseconds since run start, value."""

    t_ms: int
    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError(f"sample value must be finite, got {self.value!r}")
        if self.value < 0:
            raise ValueError(f"sample value must be >= 0, got {self.value!r}")


@dataclass(frozen=True)
class MetricSeries:
    """Uniformly sampled (after fill_missing) throughput or latency curve."""

    metric: Metric
    unit: str
    cadence_ms: int
    samples: tuple[Sample, ...]

    def __post_init__(self) -> None:
        if self.cadence_ms <= 0:
            raise ValueError("cadence_ms must be positive")
        ts = [s.t_ms for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def times_ms(self) -> np.ndarray:
        return np.array([s.t_ms for s in self.samples], dtype=np.int64)

    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.samples], dtype=np.float64)

    def span_ms(self) -> tuple[int, int]:
        if not self.samples:
            raise EmptySeries("series has no samples")
        return self.samples[0].t_ms, self.samples[-1].t_ms

    def index_at_or_after(self, t_ms: int) -> int:
        """Index of the first sample with timestamp >= t_ms."""
        return int(np.searchsorted(self.times_ms(), t_ms, side="left"))

    def with_values(self, values: Sequence[float]) -> "MetricSeries":
        if len(values) != len(self.samples):
            raise ValueError("value count mismatch")
        new = tuple(
            Sample(s.t_ms, float(v)) for s, v in zip(self.samples, values)
        )
        return replace(self, samples=new)

    @staticmethod
    def from_arrays(
        metric: Metric,
        unit: str,
        cadence_ms: int,
        t_ms: Sequence[int],
        values: Sequence[float],
    ) -> "MetricSeries":
        samples = tuple(Sample(int(t), float(v)) for t, v in zip(t_ms, values))
        return MetricSeries(metric, unit, cadence_ms, samples)


def throughput_series(cadence_ms: int, t_ms: Sequence[int], values: Sequence[float]) -> MetricSeries:
    return MetricSeries.from_arrays(Metric.THROUGHPUT, "tps", cadence_ms, t_ms, values)


def latency_series(cadence_ms: int, t_ms: Sequence[int], values: Sequence[float]) -> MetricSeries:
    return MetricSeries.from_arrays(Metric.LATENCY, "ms", cadence_ms, t_ms, values)


# -- preprocessing ------------------------------------------------------------

def fill_missing(series: MetricSeries, cadence_ms: int) -> MetricSeries:
    """Resample onto an arithmetic grid at cadence_ms, interpolating gaps.

    The grid starts at the first original timestamp and extends by whole
    cadence steps up to the last original timestamp (a trailing partial
    step is dropped). Values already on the grid are preserved bit-exactly;
    holes are filled by linear interpolation between nearest neighbours.
    """
    if cadence_ms <= 0:
        raise ValueError("cadence_ms must be positive")
    if len(series) < 2:
        raise EmptySeries("fill_missing needs at least 2 samples")
    t = series.times_ms()
    v = series.values()
    first, last = int(t[0]), int(t[-1])
    grid = np.arange(first, last + 1, cadence_ms, dtype=np.int64)
    interp = np.interp(grid, t.astype(np.float64), v)
    # keep original values exact where the grid hits an original timestamp
    exact = {int(ti): vi for ti, vi in zip(t, v)}
    out_vals = [exact.get(int(g), float(x)) for g, x in zip(grid, interp)]
    return MetricSeries.from_arrays(series.metric, series.unit, cadence_ms, grid, out_vals)


def _check_window(series: MetricSeries, window: int) -> None:
    if window <= 0 or window % 2 == 0:
        raise InvalidWindow(f"window must be odd and positive, got {window}")
    if window > len(series):
        raise InvalidWindow(
            f"window {window} exceeds series length {len(series)}"
        )


def smooth(series: MetricSeries, window: int) -> MetricSeries:
    """Centered moving average; edges use the truncated window."""
    _check_window(series, window)
    v = series.values()
    kernel = np.ones(window)
    sums = np.convolve(v, kernel, mode="same")
    counts = np.convolve(np.ones_like(v), kernel, mode="same")
    return series.with_values(sums / counts)


def median_filter(series: MetricSeries, window: int) -> MetricSeries:
    """Centered running median; edges use the truncated window."""
    _check_window(series, window)
    v = series.values()
    h = window // 2
    n = len(v)
    out = np.empty(n)
    for i in range(n):
        lo = max(0, i - h)
        hi = min(n, i + h + 1)
        out[i] = np.median(v[lo:hi])
    return series.with_values(out)


def normalize(series: MetricSeries) -> MetricSeries:
    """Min-max normalization onto [0, 1]; a flat series maps to all 0.5."""
    if len(series) == 0:
        raise EmptySeries("cannot normalize an empty series")
    v = series.values()
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return series.with_values(np.full_like(v, 0.5))
    return series.with_values((v - lo) / (hi - lo))


def integrate(series: MetricSeries, a_ms: int, b_ms: int) -> float:
    """Trapezoidal integral of the curve over [a_ms, b_ms], in value*seconds.

    Endpoints falling between samples are linearly interpolated.
    """
    if len(series) == 0:
        raise EmptySeries("cannot integrate an empty series")
    first, last = series.span_ms()
    if a_ms >= b_ms:
        raise OutOfRange(f"integration bounds must satisfy a < b, got [{a_ms}, {b_ms}]")
    if a_ms < first or b_ms > last:
        raise OutOfRange(
            f"bounds [{a_ms}, {b_ms}] outside series span [{first}, {last}]"
        )
    t = series.times_ms().astype(np.float64)
    v = series.values()
    inside = (t > a_ms) & (t < b_ms)
    knots_t = np.concatenate(([float(a_ms)], t[inside], [float(b_ms)]))
    knots_v = np.concatenate(
        ([np.interp(a_ms, t, v)], v[inside], [np.interp(b_ms, t, v)])
    )
    dt_s = np.diff(knots_t) / 1000.0
    return float(np.sum((knots_v[:-1] + knots_v[1:]) / 2.0 * dt_s))


def segment_bounds(n: int, k: int) -> list[tuple[int, int]]:
    """K contiguous, as-equal-as-possible index ranges covering [0, n)."""
    return [(j * n // k, (j + 1) * n // k) for j in range(k)]


def segment_variances(series: MetricSeries, k: int) -> list[float]:
    """Population variance of each of K contiguous, near-equal segments."""
    if k <= 0:
        raise InvalidSegmentation("K must be positive")
    n = len(series)
    if k > n:
        raise InvalidSegmentation(f"K={k} exceeds series length {n}")
    v = series.values()
    return [float(np.var(v[lo:hi])) for lo, hi in segment_bounds(n, k)]


# -- CSV format ----------------------------------------------------------------

def _format_cell(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def dump_series_csv(
    throughput: MetricSeries | None, latency: MetricSeries | None
) -> str:
    """Render the canonical CSV text for a run's series pair.

    One row per grid point over the union of timestamps; missing cells empty;
    LF line endings. Float cells use repr so a read-back round-trips exactly.
    """
    thr = {s.t_ms: s.value for s in (throughput.samples if throughput else ())}
    lat = {s.t_ms: s.value for s in (latency.samples if latency else ())}
    times = sorted(set(thr) | set(lat))
    lines = [SERIES_CSV_HEADER]
    for t in times:
        lines.append(f"{t},{_format_cell(thr.get(t))},{_format_cell(lat.get(t))}")
    return "\n".join(lines) + "\n"


def write_series_csv(
    path,
    throughput: MetricSeries | None,
    latency: MetricSeries | None,
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_series_csv(throughput, latency))


def _infer_cadence(times: list[int]) -> int:
    diffs = [b - a for a, b in zip(times, times[1:])]
    return min(diffs) if diffs else 1000


def parse_series_csv(text: str) -> tuple[MetricSeries | None, MetricSeries | None]:
    """Strict parser for the canonical CSV format.

    Raises MalformedSeriesCsv naming the offending line. Returns (throughput,
    latency); either may be None when its column is entirely empty.
    """
    lines = text.splitlines()
    if not lines:
        raise MalformedSeriesCsv(1, "empty input")
    if lines[0].strip() != SERIES_CSV_HEADER:
        raise MalformedSeriesCsv(1, f"expected header {SERIES_CSV_HEADER!r}")
    thr_t: list[int] = []
    thr_v: list[float] = []
    lat_t: list[int] = []
    lat_v: list[float] = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise MalformedSeriesCsv(line_no, f"expected 3 cells, got {len(parts)}")
        try:
            t = int(parts[0])
        except ValueError:
            raise MalformedSeriesCsv(line_no, f"bad timestamp {parts[0]!r}") from None
        for cell, (ts, vs) in ((parts[1], (thr_t, thr_v)), (parts[2], (lat_t, lat_v))):
            cell = cell.strip()
            if not cell:
                continue
            try:
                val = float(cell)
            except ValueError:
                raise MalformedSeriesCsv(line_no, f"bad value {cell!r}") from None
            if not math.isfinite(val) or val < 0:
                raise MalformedSeriesCsv(line_no, f"value out of domain: {cell!r}")
            ts.append(t)
            vs.append(val)
    throughput = (
        throughput_series(_infer_cadence(thr_t), thr_t, thr_v) if thr_t else None
    )
    latency = latency_series(_infer_cadence(lat_t), lat_t, lat_v) if lat_t else None
    return throughput, latency


def read_series_csv(path) -> tuple[MetricSeries | None, MetricSeries | None]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_series_csv(fh.read())
