"""Synthetic curves for the five recovery patterns, plus ranked sets.

Skeletons are piecewise-linear; seeded Gaussian noise is added on top and
latency is derived by mirroring throughput. Ranked sets interpolate depth
and duration jointly from a worst variant down to a best one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .errors import InvalidSpec
from .resilience import PatternKind
from .series import MetricSeries, latency_series, throughput_series

BASE_LATENCY_MS = 10.0
LATENCY_CEILING_FACTOR = 100.0

# Best-rank trough depth per kind; chosen to keep every rank comfortably
# inside its classification thresholds.
_BEST_DEPTH = {
    PatternKind.V_SHAPED: 0.30,
    PatternKind.U_SHAPED: 0.30,
    PatternKind.PARTIAL_RECOVERY: 0.50,
    PatternKind.RECOVERY_FAILURE: 0.85,
    PatternKind.RECOVERY_OVERSHOOT: 0.30,
}
_BEST_DURATION_FACTOR = 0.4

_KIND_DEFAULTS = {
    PatternKind.V_SHAPED: dict(depth=0.6, dwell_s=0.0, terminal_level=1.0),
    PatternKind.U_SHAPED: dict(depth=0.6, dwell_s=40.0, terminal_level=1.0),
    PatternKind.PARTIAL_RECOVERY: dict(depth=0.6, dwell_s=10.0, terminal_level=0.7),
    PatternKind.RECOVERY_FAILURE: dict(depth=0.9, dwell_s=0.0, terminal_level=0.1),
    PatternKind.RECOVERY_OVERSHOOT: dict(depth=0.6, dwell_s=5.0, terminal_level=1.2),
}


@dataclass(frozen=True)
class PatternSpec:
    kind: PatternKind
    p0: float = 100.0
    depth: float = 0.6
    t0_s: float = 30.0
    dwell_s: float = 0.0
    fall_s: float = 10.0
    rise_s: float = 10.0
    terminal_level: float = 1.0
    noise_sigma: float = 0.0
    cadence_ms: int = 1000
    total_s: float = 120.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.depth <= 1.0):
            raise InvalidSpec(f"depth must be in [0, 1], got {self.depth}")
        if self.terminal_level < 0:
            raise InvalidSpec("terminal_level must be >= 0")
        if min(self.t0_s, self.dwell_s, self.fall_s, self.rise_s) < 0:
            raise InvalidSpec("timing fields must be non-negative")
        if self.total_s < self.t0_s + self.fall_s + self.dwell_s + self.rise_s:
            raise InvalidSpec("total_s must cover t0 + fall + dwell + rise")
        if self.p0 <= 0 or self.cadence_ms <= 0:
            raise InvalidSpec("p0 and cadence_ms must be positive")


def default_spec(kind: PatternKind, **overrides) -> PatternSpec:
    """A spec with sensible per-kind geometry defaults."""
    params = dict(_KIND_DEFAULTS[kind])
    params.update(overrides)
    return PatternSpec(kind=kind, **params)


def skeleton_knots(spec: PatternSpec) -> tuple[np.ndarray, np.ndarray]:
    """(times_s, values) of the noise-free piecewise-linear skeleton."""
    p0 = spec.p0
    low = (1.0 - spec.depth) * p0
    t0 = spec.t0_s
    kind = spec.kind
    if kind is PatternKind.RECOVERY_FAILURE:
        pts = [(0.0, p0), (t0, p0), (t0 + spec.fall_s, low), (spec.total_s, low)]
    else:
        dwell = 0.0 if kind is PatternKind.V_SHAPED else spec.dwell_s
        if kind in (PatternKind.V_SHAPED, PatternKind.U_SHAPED):
            final = p0
        else:
            final = spec.terminal_level * p0
        rise_end = t0 + spec.fall_s + dwell + spec.rise_s
        pts = [
            (0.0, p0),
            (t0, p0),
            (t0 + spec.fall_s, low),
            (t0 + spec.fall_s + dwell, low),
            (rise_end, final),
            (spec.total_s, final),
        ]
    # collapse zero-length segments so knot times stay strictly increasing
    times: list[float] = []
    values: list[float] = []
    for t, v in pts:
        if times and t <= times[-1]:
            continue
        times.append(t)
        values.append(v)
    return np.array(times), np.array(values)


@dataclass(frozen=True)
class PatternTruth:
    """Generator-side ground truth of the skeleton's anchor geometry."""

    t0_ms: int
    td_ms: int
    rise_end_ms: int
    p0: float
    trough: float
    terminal: float


def ground_truth(spec: PatternSpec) -> PatternTruth:
    t0 = spec.t0_s
    td = t0 + spec.fall_s
    if spec.kind is PatternKind.RECOVERY_FAILURE:
        rise_end = spec.total_s
        terminal = (1.0 - spec.depth) * spec.p0
    else:
        dwell = 0.0 if spec.kind is PatternKind.V_SHAPED else spec.dwell_s
        rise_end = td + dwell + spec.rise_s
        if spec.kind in (PatternKind.V_SHAPED, PatternKind.U_SHAPED):
            terminal = spec.p0
        else:
            terminal = spec.terminal_level * spec.p0
    return PatternTruth(
        t0_ms=int(round(t0 * 1000)),
        td_ms=int(round(td * 1000)),
        rise_end_ms=int(round(rise_end * 1000)),
        p0=spec.p0,
        trough=(1.0 - spec.depth) * spec.p0,
        terminal=terminal,
    )


def generate_pattern(spec: PatternSpec) -> tuple[MetricSeries, MetricSeries]:
    """Sampled (throughput, latency) pair for one pattern spec.

    Deterministic for a fixed seed; throughput noise is clipped at zero and
    latency mirrors throughput inversely, capped at 100x the base latency.
    """
    knots_t, knots_v = skeleton_knots(spec)
    n = int(spec.total_s * 1000) // spec.cadence_ms + 1
    t_ms = np.arange(n, dtype=np.int64) * spec.cadence_ms
    skel = np.interp(t_ms / 1000.0, knots_t, knots_v)
    rng = np.random.default_rng(spec.seed)
    noise = rng.normal(0.0, spec.noise_sigma * spec.p0, size=n) if spec.noise_sigma > 0 else 0.0
    thr = np.maximum(skel + noise, 0.0)
    lat = BASE_LATENCY_MS * spec.p0 / np.maximum(thr, 1e-3 * spec.p0)
    lat = np.minimum(lat, LATENCY_CEILING_FACTOR * BASE_LATENCY_MS)
    return (
        throughput_series(spec.cadence_ms, t_ms, thr),
        latency_series(spec.cadence_ms, t_ms, lat),
    )


def ranked_specs(kind: PatternKind, count: int, base: PatternSpec) -> list[PatternSpec]:
    """Interpolated specs from worst (deepest, longest) to best."""
    if count < 2:
        raise InvalidSpec("ranked sets need count >= 2")
    worst_depth = base.depth
    best_depth = _BEST_DEPTH[kind]
    if best_depth >= worst_depth:
        best_depth = 0.6 * worst_depth
    specs = []
    for i in range(count):
        f = i / (count - 1)
        scale = 1.0 + f * (_BEST_DURATION_FACTOR - 1.0)
        specs.append(
            replace(
                base,
                kind=kind,
                depth=worst_depth + f * (best_depth - worst_depth),
                fall_s=base.fall_s * scale,
                dwell_s=base.dwell_s * scale,
                rise_s=base.rise_s * scale,
                seed=base.seed + i,
            )
        )
    return specs


def generate_ranked_set(
    kind: PatternKind, count: int, base: PatternSpec
) -> list[tuple[MetricSeries, MetricSeries]]:
    """Curve pairs ordered worst to best; deterministic per base seed."""
    return [generate_pattern(s) for s in ranked_specs(kind, count, base)]
