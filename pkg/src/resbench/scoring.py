"""The eight resilience scores: five per-run dimensions plus three campaign ones.

Per-run scores grade throughput loss, latency amplification, stability,
resistance, and recovery over one degradation episode. Campaign scores grade
the dispersion of repeated runs: disturbance period, deviation from the first
run, and adaptability (spread around the mean).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateBaseline,
    DegenerateLatency,
    DegenerateMean,
    EmptyCampaign,
    InconsistentCampaign,
    InvalidSegmentation,
)
from .resilience import DetectionConfig, PatternKind, ResilienceTriangle, classify_pattern
from .series import MetricSeries, integrate, normalize, segment_variances

SCORE_TYPES = ("tho", "lat", "sta", "res", "rec")


@dataclass(frozen=True)
class ScoreConfig:
    alpha: float = 1.0
    beta: float = 0.05  # 1/seconds
    segments: int = 10
    omega_phase: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    omega_type: tuple[float, ...] = (0.2, 0.2, 0.2, 0.2, 0.2)
    clamp: bool = True

    def __post_init__(self) -> None:
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.segments < 1:
            raise ValueError("segments must be >= 1")
        if len(self.omega_phase) != 3 or len(self.omega_type) != 5:
            raise ValueError("omega_phase needs 3 weights, omega_type needs 5")
        for weights in (self.omega_phase, self.omega_type):
            if any(w < 0 for w in weights):
                raise ValueError("weights must be non-negative")
            if abs(sum(weights) - 1.0) > 1e-9:
                raise ValueError("weights must sum to 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["omega_phase"] = list(self.omega_phase)
        d["omega_type"] = list(self.omega_type)
        return d

    @staticmethod
    def from_dict(d: dict) -> "ScoreConfig":
        d = dict(d)
        if "omega_phase" in d:
            d["omega_phase"] = tuple(d["omega_phase"])
        if "omega_type" in d:
            d["omega_type"] = tuple(d["omega_type"])
        return ScoreConfig(**d)


@dataclass(frozen=True)
class ScoreInputs:
    throughput: MetricSeries
    latency: MetricSeries
    baseline_latency: float  # constant baseline latency level, ms
    triangle: Optional[ResilienceTriangle]

    def __post_init__(self) -> None:
        if self.triangle is None:
            return
        for s in (self.throughput, self.latency):
            first, last = s.span_ms()
            if self.triangle.t0_ms < first or self.triangle.tr_ms > last:
                raise ValueError("triangle lies outside a series span")


@dataclass(frozen=True)
class ScoreCard:
    """Per-run scores, clamped for display with raw values retained."""

    s_tho: float
    s_lat: float
    s_sta: float
    s_res: float
    s_rec: float
    raw: dict[str, float]
    pattern: Optional[PatternKind]

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.s_tho, self.s_lat, self.s_sta, self.s_res, self.s_rec)

    def scores_dict(self) -> dict[str, float]:
        return dict(zip(SCORE_TYPES, self.as_tuple()))

    def to_dict(self) -> dict:
        return {
            "scores": self.scores_dict(),
            "raw_scores": dict(self.raw),
            "pattern": self.pattern.value if self.pattern else None,
        }

    @staticmethod
    def from_dict(d: dict) -> "ScoreCard":
        scores = d["scores"]
        return ScoreCard(
            s_tho=float(scores["tho"]),
            s_lat=float(scores["lat"]),
            s_sta=float(scores["sta"]),
            s_res=float(scores["res"]),
            s_rec=float(scores["rec"]),
            raw={k: float(v) for k, v in d["raw_scores"].items()},
            pattern=PatternKind(d["pattern"]) if d.get("pattern") else None,
        )


@dataclass(frozen=True)
class ScoreMatrix:
    """Per-run score cards in execution order; row 0 is the first run."""

    rows: tuple[ScoreCard, ...]

    def __post_init__(self) -> None:
        if not self.rows:
            raise ValueError("score matrix needs at least one run")

    @property
    def n(self) -> int:
        return len(self.rows)

    def column(self, j: int) -> np.ndarray:
        return np.array([row.as_tuple()[j] for row in self.rows])


@dataclass(frozen=True)
class MultiRunScores:
    s_per: float
    s_dev: float
    s_ada: float
    n: int

    def to_dict(self) -> dict:
        return {"per": self.s_per, "dev": self.s_dev, "ada": self.s_ada, "n": self.n}


def _clamp(value: float, cfg: ScoreConfig) -> float:
    return min(100.0, max(0.0, value)) if cfg.clamp else value


def throughput_score(inputs: ScoreInputs, cfg: ScoreConfig) -> float:
    """Percentage of throughput retained across the disturbance window."""
    tri = inputs.triangle
    if tri is None or tri.tr_ms == tri.t0_ms:
        return 100.0
    area = integrate(inputs.throughput, tri.t0_ms, tri.tr_ms)
    raw = 100.0 * area / (tri.p0 * (tri.tr_ms - tri.t0_ms) / 1000.0)
    return _clamp(raw, cfg)


def latency_score(inputs: ScoreInputs, cfg: ScoreConfig) -> float:
    """Inverse percentage of latency amplification over the same window."""
    tri = inputs.triangle
    if tri is None or tri.tr_ms == tri.t0_ms:
        return 100.0
    lat_area = integrate(inputs.latency, tri.t0_ms, tri.tr_ms)
    if lat_area <= 0:
        raise DegenerateLatency("latency integral is zero over the window")
    window_s = (tri.tr_ms - tri.t0_ms) / 1000.0
    raw = 100.0 * (inputs.baseline_latency * window_s) / lat_area
    return _clamp(raw, cfg)


def stability_score(inputs: ScoreInputs, cfg: ScoreConfig) -> float:
    """Mapped mean of segment variances of the normalized window."""
    tri = inputs.triangle
    if tri is None:
        return 100.0
    t = inputs.throughput.times_ms()
    lo = int(np.searchsorted(t, tri.t0_ms))
    hi = int(np.searchsorted(t, tri.tr_ms, side="right"))
    window = MetricSeries(
        inputs.throughput.metric,
        inputs.throughput.unit,
        inputs.throughput.cadence_ms,
        inputs.throughput.samples[lo:hi],
    )
    if len(window) < cfg.segments:
        raise InvalidSegmentation(
            f"window has {len(window)} samples, fewer than K={cfg.segments}"
        )
    variances = segment_variances(normalize(window), cfg.segments)
    v = float(np.mean(variances))
    raw = 100.0 * (1.0 - (v / 0.25) ** cfg.alpha)
    return _clamp(raw, cfg)


def _phase_score(
    inputs: ScoreInputs,
    cfg: ScoreConfig,
    start_ms: int,
    end_ms: int,
    end_level: float,
) -> float:
    tri = inputs.triangle
    assert tri is not None
    if tri.p0 <= 0:
        raise DegenerateBaseline("P0 must be positive")
    w1, w2, w3 = cfg.omega_phase
    dt_s = (end_ms - start_ms) / 1000.0
    decay = math.exp(-cfg.beta * dt_s)
    level = end_level / tri.p0
    if end_ms == start_ms:
        volume = level  # analytic limit of the integral mean
    else:
        volume = integrate(inputs.throughput, start_ms, end_ms) / (tri.p0 * dt_s)
    raw = 100.0 * (w1 * decay + w2 * level + w3 * volume)
    return _clamp(raw, cfg)


def resistance_score(inputs: ScoreInputs, cfg: ScoreConfig) -> float:
    """Grades the fall phase: resistance time, depth, and volume lost."""
    tri = inputs.triangle
    if tri is None:
        return 100.0
    return _phase_score(inputs, cfg, tri.t0_ms, tri.td_ms, tri.pd)


def recovery_score(inputs: ScoreInputs, cfg: ScoreConfig) -> float:
    """Grades the rise phase: recovery time, recovered level, and volume."""
    tri = inputs.triangle
    if tri is None:
        return 100.0
    return _phase_score(inputs, cfg, tri.td_ms, tri.tr_ms, tri.pr)


def period_score(durations_s: Sequence[float], cfg: ScoreConfig) -> float:
    """Exponentially mapped mean disturbance duration across runs."""
    if len(durations_s) == 0:
        raise EmptyCampaign("period score needs at least one run")
    return 100.0 * float(
        np.mean([math.exp(-cfg.beta * d) for d in durations_s])
    )


def deviation_score(matrix: ScoreMatrix, cfg: ScoreConfig) -> float:
    """Weighted mean drift of each run's scores from the first run's.

    Evaluated literally, including both the type weights and the 1/5 factor;
    the raw value may be negative when later runs regress.
    """
    n = matrix.n
    total = 0.0
    for j, w in enumerate(cfg.omega_type):
        col = matrix.column(j)
        total += w * float(np.sum(col - col[0]))
    return 100.0 * total / (5.0 * n)


def adaptability_score(matrix: ScoreMatrix, cfg: ScoreConfig) -> float:
    """Weighted mean absolute dispersion of scores around their mean."""
    n = matrix.n
    total = 0.0
    for j, w in enumerate(cfg.omega_type):
        col = matrix.column(j)
        mean = float(np.mean(col))
        if mean == 0.0:
            raise DegenerateMean(f"score type {SCORE_TYPES[j]!r} has zero mean")
        total += w * float(np.sum(np.abs(col - mean))) / (n * mean)
    return 100.0 * total


def score_run(
    inputs: ScoreInputs,
    cfg: ScoreConfig,
    detection: Optional[DetectionConfig] = None,
) -> ScoreCard:
    """All five per-run scores plus the classified pattern.

    A run with no triangle had no disturbance: every dimension scores 100.
    """
    if inputs.triangle is None:
        raw = {k: 100.0 for k in SCORE_TYPES}
        return ScoreCard(100.0, 100.0, 100.0, 100.0, 100.0, raw, None)
    unclamped = ScoreConfig(
        alpha=cfg.alpha,
        beta=cfg.beta,
        segments=cfg.segments,
        omega_phase=cfg.omega_phase,
        omega_type=cfg.omega_type,
        clamp=False,
    )
    raw = {
        "tho": throughput_score(inputs, unclamped),
        "lat": latency_score(inputs, unclamped),
        "sta": stability_score(inputs, unclamped),
        "res": resistance_score(inputs, unclamped),
        "rec": recovery_score(inputs, unclamped),
    }
    clamped = {k: _clamp(v, cfg) for k, v in raw.items()}
    pattern = classify_pattern(
        inputs.throughput, inputs.triangle, detection or DetectionConfig()
    )
    return ScoreCard(
        clamped["tho"], clamped["lat"], clamped["sta"], clamped["res"], clamped["rec"],
        raw, pattern,
    )


def score_campaign(
    matrix: ScoreMatrix, durations_s: Sequence[float], cfg: ScoreConfig
) -> MultiRunScores:
    """Bundle the three multi-run scores for a campaign."""
    if len(durations_s) != matrix.n:
        raise InconsistentCampaign(
            f"{matrix.n} score rows but {len(durations_s)} durations"
        )
    return MultiRunScores(
        s_per=period_score(durations_s, cfg),
        s_dev=deviation_score(matrix, cfg),
        s_ada=adaptability_score(matrix, cfg),
        n=matrix.n,
    )


def build_run_report(
    run_id: str,
    card: ScoreCard,
    triangle: Optional[ResilienceTriangle],
    detection: DetectionConfig,
    scoring: ScoreConfig,
    multi: Optional[MultiRunScores] = None,
) -> dict:
    """Score report JSON body shared by the CLI and the service."""
    report = {
        "run_id": run_id,
        "scores": card.scores_dict(),
        "raw_scores": dict(card.raw),
        "pattern": card.pattern.value if card.pattern else None,
        "triangle": triangle.to_dict(card.pattern) if triangle else None,
        "config": {"detection": detection.to_dict(), "scoring": scoring.to_dict()},
    }
    if multi is not None:
        report["campaign"] = multi.to_dict()
    return report
