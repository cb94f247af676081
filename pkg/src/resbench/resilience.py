"""Consensus change-point detection, triangle extraction, pattern classification.

Three cheap detectors vote on candidate change points; only points backed by
a quorum survive. From the consensus points the degradation/trough/recovery
anchors of the resilience triangle are located, and the recovery shape is
classified into one of five patterns.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from .errors import InconsistentInput, InsufficientData
from .series import MetricSeries

# Decision interval for the CUSUM detector, in units of z_threshold.
CUSUM_H_FACTOR = 2.0
# Samples of pre-degradation history used to estimate the baseline level.
BASELINE_WINDOW = 30


class Direction(Enum):
    DOWN = "down"
    UP = "up"


class PatternKind(Enum):
    V_SHAPED = "v_shaped"
    U_SHAPED = "u_shaped"
    PARTIAL_RECOVERY = "partial_recovery"
    RECOVERY_FAILURE = "recovery_failure"
    RECOVERY_OVERSHOOT = "recovery_overshoot"


@dataclass(frozen=True)
class ChangePoint:
    t_ms: int
    direction: Direction
    votes: int

    def __post_init__(self) -> None:
        if self.votes < 1:
            raise ValueError("votes must be >= 1")


@dataclass(frozen=True)
class ResilienceTriangle:
    """Anchor points of one degradation/recovery episode."""

    t0_ms: int
    td_ms: int
    tr_ms: int
    p0: float
    pd: float
    pr: float
    recovered: bool

    def __post_init__(self) -> None:
        if not (self.t0_ms <= self.td_ms <= self.tr_ms):
            raise ValueError("triangle requires t0 <= td <= tr")
        if self.pd > self.p0 + 1e-9 or self.pd > self.pr + 1e-9:
            raise ValueError("triangle requires pd <= p0 and pd <= pr")
        if min(self.p0, self.pd, self.pr) < 0:
            raise ValueError("triangle levels must be non-negative")

    def to_dict(self, pattern: Optional[PatternKind] = None) -> dict:
        return {
            "t0_ms": self.t0_ms,
            "td_ms": self.td_ms,
            "tr_ms": self.tr_ms,
            "p0": self.p0,
            "pd": self.pd,
            "pr": self.pr,
            "recovered": self.recovered,
            "pattern": pattern.value if pattern else None,
        }

    @staticmethod
    def from_dict(d: dict) -> "ResilienceTriangle":
        return ResilienceTriangle(
            t0_ms=int(d["t0_ms"]),
            td_ms=int(d["td_ms"]),
            tr_ms=int(d["tr_ms"]),
            p0=float(d["p0"]),
            pd=float(d["pd"]),
            pr=float(d["pr"]),
            recovered=bool(d["recovered"]),
        )


@dataclass(frozen=True)
class DetectionConfig:
    """Tuning for detection, triangle anchoring, and classification."""

    detector_window: int = 10
    z_threshold: float = 3.0
    cusum_slack: float = 0.5
    derivative_threshold: float = 0.02
    consensus_quorum: int = 2
    consensus_tolerance: int = 3
    recovery_threshold: float = 0.95
    sustain_samples: int = 5
    dwell_band: float = 0.10
    dwell_ratio_u: float = 0.30
    fail_threshold: float = 0.20
    overshoot_margin: float = 0.05

    def __post_init__(self) -> None:
        if not (0 < self.fail_threshold < self.recovery_threshold <= 1):
            raise ValueError("need 0 < fail_threshold < recovery_threshold <= 1")
        if not (0 < self.dwell_band < 1):
            raise ValueError("dwell_band must be in (0, 1)")
        if self.consensus_quorum < 2:
            raise ValueError("consensus_quorum must be >= 2")
        if self.detector_window < 2 or self.sustain_samples < 1:
            raise ValueError("detector_window >= 2 and sustain_samples >= 1 required")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "DetectionConfig":
        return DetectionConfig(**d)


class _Flag(NamedTuple):
    idx: int
    direction: Direction
    detector: str


def _sigma_floor(scale: float) -> float:
    # purely relative so detection stays exactly scale-equivariant
    return 1e-12 + 1e-9 * scale


def _mean_shift_flags(x: np.ndarray, w: int, z_thr: float) -> list[_Flag]:
    """Adjacent-window mean comparison; one flag per excursion at max |z|."""
    n = len(x)
    if n < 2 * w:
        return []
    scale = float(np.mean(np.abs(x))) or 1.0
    c1 = np.concatenate(([0.0], np.cumsum(x)))
    c2 = np.concatenate(([0.0], np.cumsum(x * x)))
    idx = np.arange(w, n - w + 1)
    mean_l = (c1[idx] - c1[idx - w]) / w
    mean_r = (c1[idx + w] - c1[idx]) / w
    var_l = np.maximum((c2[idx] - c2[idx - w]) / w - mean_l**2, 0.0)
    var_r = np.maximum((c2[idx + w] - c2[idx]) / w - mean_r**2, 0.0)
    se = np.sqrt((var_l + var_r) / w)
    se = np.maximum(se, _sigma_floor(scale))
    z = (mean_r - mean_l) / se
    flags: list[_Flag] = []
    over = np.abs(z) > z_thr
    i = 0
    while i < len(z):
        if not over[i]:
            i += 1
            continue
        j = i
        while j < len(z) and over[j] and (z[j] > 0) == (z[i] > 0):
            j += 1
        k = i + int(np.argmax(np.abs(z[i:j])))
        direction = Direction.UP if z[k] > 0 else Direction.DOWN
        flags.append(_Flag(int(idx[k]), direction, "mean_shift"))
        i = j
    return flags


def _cusum_flags(x: np.ndarray, w: int, slack: float, h: float) -> list[_Flag]:
    """One-sided CUSUM pair against a rolling baseline window.

    The change point is placed at the last zero of the tripped accumulator
    (the excursion onset); after a trip the baseline is re-estimated from the
    window following the trip and scanning resumes beyond it.
    """
    n = len(x)
    if n < 2 * w:
        return []
    scale = float(np.mean(np.abs(x))) or 1.0
    flags: list[_Flag] = []

    def baseline(start: int) -> tuple[float, float]:
        seg = x[start : start + w]
        return float(np.mean(seg)), max(float(np.std(seg)), _sigma_floor(scale))

    mu, sigma = baseline(0)
    s_pos = s_neg = 0.0
    last_zero_pos = last_zero_neg = w - 1
    t = w
    while t < n:
        u = (x[t] - mu) / sigma
        s_pos = max(0.0, s_pos + u - slack)
        s_neg = max(0.0, s_neg - u - slack)
        if s_pos == 0.0:
            last_zero_pos = t
        if s_neg == 0.0:
            last_zero_neg = t
        tripped: Optional[Direction] = None
        if s_pos > h:
            tripped = Direction.UP
            onset = last_zero_pos + 1
        elif s_neg > h:
            tripped = Direction.DOWN
            onset = last_zero_neg + 1
        if tripped is not None:
            flags.append(_Flag(min(onset, n - 1), tripped, "cusum"))
            if t + w >= n:
                break
            mu, sigma = baseline(t)
            s_pos = s_neg = 0.0
            t = t + w
            last_zero_pos = last_zero_neg = t - 1
            continue
        t += 1
    return flags


def _derivative_flags(x: np.ndarray, w: int, thr_frac: float) -> list[_Flag]:
    """Threshold on the smoothed first difference; flag each excursion onset."""
    n = len(x)
    if n < 3:
        return []
    win = min(5, n if n % 2 == 1 else n - 1)
    kernel = np.ones(win)
    sm = np.convolve(x, kernel, mode="same") / np.convolve(
        np.ones_like(x), kernel, mode="same"
    )
    d = np.diff(sm)
    ref = float(np.mean(x[:w])) if n >= w else float(np.mean(x))
    thr = thr_frac * max(ref, _sigma_floor(float(np.mean(np.abs(x))) or 1.0))
    flags: list[_Flag] = []
    for sign, direction in ((1.0, Direction.UP), (-1.0, Direction.DOWN)):
        over = sign * d > thr
        i = 0
        while i < len(d):
            if over[i]:
                flags.append(_Flag(i + 1, direction, "derivative"))
                while i < len(d) and over[i]:
                    i += 1
            else:
                i += 1
    return flags


def _cluster_flags(flags: list[_Flag], tolerance: int) -> list[tuple[int, Direction, int]]:
    """Greedy same-direction clustering; returns (median idx, direction, votes)."""
    out: list[tuple[int, Direction, int]] = []
    for direction in (Direction.DOWN, Direction.UP):
        members = sorted(f for f in flags if f.direction == direction)
        cluster: list[_Flag] = []
        for f in members:
            if cluster and f.idx - cluster[-1].idx > tolerance:
                out.append(_finish_cluster(cluster, direction))
                cluster = []
            cluster.append(f)
        if cluster:
            out.append(_finish_cluster(cluster, direction))
    return sorted(out)


def _finish_cluster(cluster: list[_Flag], direction: Direction) -> tuple[int, Direction, int]:
    idxs = sorted(f.idx for f in cluster)
    rep = idxs[len(idxs) // 2] if len(idxs) % 2 == 1 else (idxs[len(idxs) // 2 - 1] + idxs[len(idxs) // 2]) // 2
    votes = len({f.detector for f in cluster})
    return rep, direction, votes


def detect_change_points(series: MetricSeries, cfg: DetectionConfig) -> list[ChangePoint]:
    """Run the detector ensemble and return quorum-backed change points."""
    n = len(series)
    w = cfg.detector_window
    if n < 2 * w:
        raise InsufficientData(
            f"need at least {2 * w} samples for detection, got {n}"
        )
    x = series.values()
    t = series.times_ms()
    flags = (
        _mean_shift_flags(x, w, cfg.z_threshold)
        + _cusum_flags(x, w, cfg.cusum_slack, CUSUM_H_FACTOR * cfg.z_threshold)
        + _derivative_flags(x, w, cfg.derivative_threshold)
    )
    points = []
    for idx, direction, votes in _cluster_flags(flags, cfg.consensus_tolerance):
        if votes >= cfg.consensus_quorum:
            points.append(ChangePoint(int(t[idx]), direction, votes))
    points.sort(key=lambda p: p.t_ms)
    return points


def extract_triangle(
    series: MetricSeries, cps: list[ChangePoint], cfg: DetectionConfig
) -> Optional[ResilienceTriangle]:
    """Locate (t0, P0), (td, Pd), (tr, Pr) from the consensus points.

    Returns None when no consensus degradation exists. P0 is the mean of the
    baseline window immediately before t0, which is robust to residual noise.
    """
    downs = [cp for cp in cps if cp.direction is Direction.DOWN]
    if not downs:
        return None
    x = series.values()
    t = series.times_ms()
    i0 = int(np.searchsorted(t, downs[0].t_ms))
    base_lo = max(0, i0 - BASELINE_WINDOW)
    p0 = float(np.mean(x[base_lo:i0])) if i0 > 0 else float(x[0])
    j = i0 + int(np.argmin(x[i0:]))
    pd = float(x[j])
    if pd > p0:
        return None  # no genuine degradation below the baseline level
    thr = cfg.recovery_threshold * p0
    m = cfg.sustain_samples
    tr_idx: Optional[int] = None
    for i in range(j, len(x) - m + 1):
        if np.all(x[i : i + m] >= thr):
            tr_idx = i
            break
    if tr_idx is not None:
        return ResilienceTriangle(
            int(t[i0]), int(t[j]), int(t[tr_idx]), p0, pd, float(x[tr_idx]), True
        )
    return ResilienceTriangle(
        int(t[i0]), int(t[j]), int(t[-1]), p0, pd, float(x[-1]), False
    )


def _terminal_plateau(x: np.ndarray, m: int) -> float:
    return float(np.mean(x[-max(m, 1):]))


def _has_upward_trend(tail: np.ndarray, p0: float, pd: float) -> bool:
    if len(tail) < 6:
        return False
    third = len(tail) // 3
    rise = float(np.mean(tail[-third:]) - np.mean(tail[:third]))
    return rise > max(0.05 * (p0 - pd), 0.02 * p0)


def classify_pattern(
    series: MetricSeries, tri: ResilienceTriangle, cfg: DetectionConfig
) -> PatternKind:
    """Assign exactly one of the five recovery patterns to an analyzed run.

    Precedence: overshoot, then failure, then partial recovery, then the
    dwell-ratio split between U and V.
    """
    t = series.times_ms()
    first, last = int(t[0]), int(t[-1])
    if tri.t0_ms < first or tri.tr_ms > last:
        raise InconsistentInput("triangle lies outside the series span")
    x = series.values()
    p0 = tri.p0
    if p0 <= 0:
        raise InconsistentInput("triangle has non-positive baseline")
    plateau = _terminal_plateau(x, cfg.sustain_samples)
    # tr lands where the recovery threshold is first sustained, which for an
    # overshooting curve is mid-rise; the terminal plateau carries the level.
    if max(tri.pr, plateau) >= (1.0 + cfg.overshoot_margin) * p0:
        return PatternKind.RECOVERY_OVERSHOOT
    if not tri.recovered:
        id_ = int(np.searchsorted(t, tri.td_ms))
        tail = x[id_:]
        if plateau <= cfg.fail_threshold * p0 or not _has_upward_trend(tail, p0, tri.pd):
            return PatternKind.RECOVERY_FAILURE
    if cfg.fail_threshold * p0 < plateau < cfg.recovery_threshold * p0:
        return PatternKind.PARTIAL_RECOVERY
    i0 = int(np.searchsorted(t, tri.t0_ms))
    ir = int(np.searchsorted(t, tri.tr_ms))
    window = x[i0 : ir + 1]
    band = tri.pd + cfg.dwell_band * (p0 - tri.pd)
    dwell_ratio = float(np.mean(window <= band)) if len(window) else 0.0
    if dwell_ratio >= cfg.dwell_ratio_u:
        return PatternKind.U_SHAPED
    return PatternKind.V_SHAPED
