"""Independent oracles: brute-force integration and straight-from-the-formula
score evaluation, kept deliberately separate from the package's code paths.
"""

from __future__ import annotations

import math

import numpy as np

from resbench.resilience import DetectionConfig, PatternKind
from resbench.series import MetricSeries
from resbench.synthgen import PatternSpec, ground_truth, skeleton_knots


def oracle_integrate(series: MetricSeries, a_ms: float, b_ms: float) -> float:
    """Brute-force numerical integral in value*seconds.

    Densely resamples the piecewise-linear curve (keeping every original
    knot so no kink is straddled) and applies numpy's trapezoid rule.
    """
    t = series.times_ms().astype(np.float64)
    v = series.values()
    dense = np.linspace(a_ms, b_ms, 2001)
    knots = t[(t > a_ms) & (t < b_ms)]
    grid = np.unique(np.concatenate((dense, knots)))
    vals = np.interp(grid, t, v)
    return float(np.trapz(vals, grid / 1000.0))


def oracle_throughput_score(P: MetricSeries, t0, tr, p0) -> float:
    if tr == t0:
        return 100.0
    return 100.0 * oracle_integrate(P, t0, tr) / (p0 * (tr - t0) / 1000.0)


def oracle_latency_score(L: MetricSeries, t0, tr, tl) -> float:
    if tr == t0:
        return 100.0
    return 100.0 * (tl * (tr - t0) / 1000.0) / oracle_integrate(L, t0, tr)


def oracle_stability_score(P: MetricSeries, t0, tr, k, alpha) -> float:
    t = P.times_ms()
    v = P.values()
    window = v[(t >= t0) & (t <= tr)]
    lo, hi = window.min(), window.max()
    norm = np.full_like(window, 0.5) if hi == lo else (window - lo) / (hi - lo)
    n = len(norm)
    variances = []
    for j in range(k):
        seg = norm[j * n // k : (j + 1) * n // k]
        mean = seg.sum() / len(seg)
        variances.append(((seg - mean) ** 2).sum() / len(seg))
    v_bar = sum(variances) / k
    return 100.0 * (1.0 - (v_bar / 0.25) ** alpha)


def oracle_resistance_score(P, t0, td, p0, pd, beta, omega) -> float:
    w1, w2, w3 = omega
    term1 = math.exp(-beta * (td - t0) / 1000.0)
    term2 = pd / p0
    if td == t0:
        term3 = pd / p0
    else:
        term3 = oracle_integrate(P, t0, td) / (p0 * (td - t0) / 1000.0)
    return 100.0 * (w1 * term1 + w2 * term2 + w3 * term3)


def oracle_recovery_score(P, td, tr, p0, pr, beta, omega) -> float:
    w1, w2, w3 = omega
    term1 = math.exp(-beta * (tr - td) / 1000.0)
    term2 = pr / p0
    if tr == td:
        term3 = pr / p0
    else:
        term3 = oracle_integrate(P, td, tr) / (p0 * (tr - td) / 1000.0)
    return 100.0 * (w1 * term1 + w2 * term2 + w3 * term3)


def oracle_period_score(durations_s, beta) -> float:
    return 100.0 * sum(math.exp(-beta * d) for d in durations_s) / len(durations_s)


def oracle_deviation_score(columns: list[list[float]], omega_type) -> float:
    """columns[j][i] = score of type j in run i."""
    n = len(columns[0])
    acc = 0.0
    for w, col in zip(omega_type, columns):
        acc += w * sum(col[i] - col[0] for i in range(n))
    return 100.0 * acc / (5.0 * n)


def oracle_adaptability_score(columns: list[list[float]], omega_type) -> float:
    n = len(columns[0])
    acc = 0.0
    for w, col in zip(omega_type, columns):
        mean = sum(col) / n
        acc += w * sum(abs(c - mean) for c in col) / (n * mean)
    return 100.0 * acc


def brute_force_split_point(values: np.ndarray, lo: int = 1, hi: int | None = None) -> int:
    """Split index maximizing |mean(left) - mean(right)|, by exhaustive scan."""
    n = len(values)
    hi = hi if hi is not None else n - 1
    best_idx, best_gap = lo, -1.0
    for i in range(lo, hi):
        gap = abs(values[:i].mean() - values[i:].mean())
        if gap > best_gap:
            best_gap, best_idx = gap, i
    return best_idx


def expected_triangle_times(spec: PatternSpec, cfg: DetectionConfig) -> tuple[float, float, float, bool]:
    """Analytic (t0, td, tr) in ms for a noise-free skeleton, plus recovery.

    tr follows its definition: the first instant the skeleton reaches the
    sustained recovery threshold after the trough; when the skeleton never
    reaches it, tr is the end of the window.
    """
    truth = ground_truth(spec)
    knots_t, knots_v = skeleton_knots(spec)
    thr = cfg.recovery_threshold * truth.p0
    if truth.terminal < thr:
        return truth.t0_ms, truth.td_ms, spec.total_s * 1000.0, False
    # scan rising segments after the trough for the first upward crossing
    td_s = truth.td_ms / 1000.0
    for (ta, va), (tb, vb) in zip(zip(knots_t, knots_v), zip(knots_t[1:], knots_v[1:])):
        if tb <= td_s or vb <= va:
            continue
        if va <= thr <= vb:
            frac = 0.0 if vb == va else (thr - va) / (vb - va)
            return truth.t0_ms, truth.td_ms, (ta + frac * (tb - ta)) * 1000.0, True
        if va >= thr:
            return truth.t0_ms, truth.td_ms, ta * 1000.0, True
    return truth.t0_ms, truth.td_ms, spec.total_s * 1000.0, False
