"""Pipeline glue: raw series pair in, triangle + score card out.

Runs the mandatory preprocessing chain (grid fill, spike removal, moving
average), detection, triangle extraction, classification, and per-run
scoring. Shared by the orchestrator's compute phase, the offline CLI
commands, and the service's /score endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptySeries, InsufficientData
from .resilience import (
    ChangePoint,
    DetectionConfig,
    ResilienceTriangle,
    detect_change_points,
    extract_triangle,
)
from .scoring import ScoreCard, ScoreConfig, ScoreInputs, score_run
from .series import MetricSeries, fill_missing, median_filter, smooth

PREPROC_MEDIAN_WINDOW = 5
PREPROC_SMOOTH_WINDOW = 5


@dataclass(frozen=True)
class AnalysisResult:
    throughput: MetricSeries  # preprocessed
    latency: Optional[MetricSeries]  # preprocessed
    change_points: list[ChangePoint]
    triangle: Optional[ResilienceTriangle]
    baseline_latency: Optional[float]
    card: ScoreCard


def preprocess(series: MetricSeries, cadence_ms: int) -> MetricSeries:
    """Grid fill, then median despike, then moving average."""
    out = fill_missing(series, cadence_ms)
    for window, op in ((PREPROC_MEDIAN_WINDOW, median_filter), (PREPROC_SMOOTH_WINDOW, smooth)):
        w = min(window, len(out) if len(out) % 2 == 1 else len(out) - 1)
        if w >= 3:
            out = op(out, w)
    return out


def estimate_baseline_latency(latency: MetricSeries, t0_ms: int) -> float:
    """Median latency over the pre-degradation window."""
    t = latency.times_ms()
    v = latency.values()
    pre = v[t < t0_ms]
    if len(pre) == 0:
        pre = v[: max(1, min(10, len(v)))]
    return float(np.median(pre))


def analyze(
    throughput: MetricSeries,
    latency: Optional[MetricSeries],
    detection: DetectionConfig,
    scoring: ScoreConfig,
    cadence_ms: Optional[int] = None,
) -> AnalysisResult:
    """Full computing pass over one run's raw series pair.

    A series too short for detection is treated as disturbance-free rather
    than an error: the run still scores (all 100, no pattern).
    """
    if len(throughput) < 2:
        raise EmptySeries("throughput series has fewer than 2 samples")
    cadence = cadence_ms or throughput.cadence_ms
    thr = preprocess(throughput, cadence)
    lat = preprocess(latency, cadence) if latency is not None and len(latency) >= 2 else None
    try:
        cps = detect_change_points(thr, detection)
    except InsufficientData:
        cps = []
    triangle = extract_triangle(thr, cps, detection)
    if triangle is not None and lat is not None:
        lat_first, lat_last = lat.span_ms()
        if triangle.t0_ms < lat_first or triangle.tr_ms > lat_last:
            lat = None  # latency cannot cover the window; score it as flat
    baseline_latency = (
        estimate_baseline_latency(lat, triangle.t0_ms)
        if triangle is not None and lat is not None
        else None
    )
    if triangle is None:
        inputs = ScoreInputs(thr, thr, 1.0, None)
    elif lat is None:
        # flat unit latency scores 100 on the latency dimension
        flat = thr.with_values(np.ones(len(thr)))
        from dataclasses import replace as _replace

        flat = MetricSeries(
            metric=latency.metric if latency else thr.metric,
            unit="ms",
            cadence_ms=thr.cadence_ms,
            samples=flat.samples,
        )
        inputs = ScoreInputs(thr, flat, 1.0, triangle)
    else:
        inputs = ScoreInputs(thr, lat, baseline_latency, triangle)
    card = score_run(inputs, scoring, detection)
    return AnalysisResult(thr, lat, cps, triangle, baseline_latency, card)
