"""Simulated database target: capacity dynamics under injected adversity.

The target holds a nominal capacity that an armed adversity profile pulls
down while active; afterwards capacity relaxes toward the profile's recovery
target through first-order dynamics (stepped with the exact exponential, so
large time steps stay stable). Throughput and latency samples derive from
offered load versus current capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import AlreadyActive, InvalidSpec
from .series import Sample

CAPACITY_EPSILON = 1e-3
LATENCY_CEILING_FACTOR = 100.0


class AdversityKind(Enum):
    CPU_SATURATION = "cpu_saturation"
    MEMORY_PRESSURE = "memory_pressure"
    NETWORK_LOSS = "network_loss"
    IO_CONGESTION = "io_congestion"

    @property
    def compact(self) -> str:
        """Lowercase concatenated form used in command templates."""
        return self.value.replace("_", "")


class RecoveryMode(Enum):
    FULL = "full"
    PARTIAL = "partial"
    FAIL = "fail"
    OVERSHOOT = "overshoot"


@dataclass(frozen=True)
class AdversityProfile:
    """One injected adverse event: what, how hard, when, and how it ends."""

    kind: AdversityKind
    severity: float
    start_s: float = 0.0
    duration_s: float = 10.0
    recovery_mode: RecoveryMode = RecoveryMode.FULL
    recovery_level: Optional[float] = None  # rho for partial, sigma for overshoot
    kappa: float = 0.5  # 1/seconds

    def __post_init__(self) -> None:
        if not (0.0 <= self.severity <= 1.0):
            raise InvalidSpec(f"severity must be in [0, 1], got {self.severity}")
        if self.kappa <= 0:
            raise InvalidSpec("kappa must be positive")
        if self.start_s < 0 or self.duration_s < 0:
            raise InvalidSpec("start_s and duration_s must be non-negative")
        if self.recovery_mode is RecoveryMode.PARTIAL:
            if self.recovery_level is None or not (0.0 < self.recovery_level < 1.0):
                raise InvalidSpec("partial recovery needs recovery_level in (0, 1)")
        if self.recovery_mode is RecoveryMode.OVERSHOOT:
            if self.recovery_level is None or self.recovery_level <= 0.0:
                raise InvalidSpec("overshoot recovery needs recovery_level > 0")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "severity": self.severity,
            "start_s": self.start_s,
            "duration_s": self.duration_s,
            "recovery_mode": self.recovery_mode.value,
            "recovery_level": self.recovery_level,
            "kappa": self.kappa,
        }

    @staticmethod
    def from_dict(d: dict) -> "AdversityProfile":
        return AdversityProfile(
            kind=AdversityKind(d["kind"]),
            severity=float(d["severity"]),
            start_s=float(d.get("start_s", 0.0)),
            duration_s=float(d["duration_s"]),
            recovery_mode=RecoveryMode(d.get("recovery_mode", "full")),
            recovery_level=(
                float(d["recovery_level"]) if d.get("recovery_level") is not None else None
            ),
            kappa=float(d.get("kappa", 0.5)),
        )


@dataclass
class TargetState:
    """Mutable state of one simulated target; owned by a single driver loop."""

    c0: float = 100.0
    l0: float = 10.0
    noise_sigma: float = 0.0
    seed: int = 0
    c: float = field(default=-1.0)
    clock_s: float = 0.0
    active: Optional[AdversityProfile] = None
    window: Optional[tuple[float, float]] = None  # absolute (start_s, end_s)
    rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.c0 <= 0:
            raise InvalidSpec("c0 must be positive")
        if self.c < 0:
            self.c = self.c0
        self.rng = np.random.default_rng(self.seed)

    def to_config_dict(self) -> dict:
        return {
            "c0": self.c0,
            "l0": self.l0,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }

    @staticmethod
    def from_config_dict(d: dict) -> "TargetState":
        return TargetState(
            c0=float(d.get("c0", 100.0)),
            l0=float(d.get("l0", 10.0)),
            noise_sigma=float(d.get("noise_sigma", 0.0)),
            seed=int(d.get("seed", 0)),
        )


def inject(state: TargetState, profile: AdversityProfile) -> TargetState:
    """Arm a profile; its active window starts profile.start_s from now."""
    if state.active is not None:
        raise AlreadyActive("an adversity profile is already armed")
    start = state.clock_s + profile.start_s
    state.active = profile
    state.window = (start, start + profile.duration_s)
    return state


def end_adversity(state: TargetState) -> None:
    """Cut the active window short so recovery dynamics begin immediately."""
    if state.active is not None and state.window is not None:
        start, end = state.window
        state.window = (start, min(end, state.clock_s))


def _capacity_target(state: TargetState, now_s: float) -> float:
    profile = state.active
    if profile is None or state.window is None:
        return state.c0
    start, end = state.window
    if now_s < start:
        return state.c0
    if now_s < end:
        return state.c0 * (1.0 - profile.severity)
    mode = profile.recovery_mode
    if mode is RecoveryMode.FULL:
        return state.c0
    if mode is RecoveryMode.PARTIAL:
        return profile.recovery_level * state.c0
    if mode is RecoveryMode.FAIL:
        return state.c0 * (1.0 - profile.severity)
    return (1.0 + profile.recovery_level) * state.c0  # overshoot


def _advance_capacity(state: TargetState, dt_s: float) -> None:
    """Exact first-order relaxation, split at window boundaries inside dt."""
    kappa = state.active.kappa if state.active else 1.0
    now = state.clock_s
    remaining = dt_s
    while remaining > 1e-12:
        step = remaining
        if state.window is not None:
            for boundary in state.window:
                if now < boundary < now + step:
                    step = boundary - now
        target = _capacity_target(state, now + step / 2)
        state.c = target + (state.c - target) * math.exp(-kappa * step)
        now += step
        remaining -= step
    state.clock_s = now


def _noise(state: TargetState) -> float:
    if state.noise_sigma <= 0:
        return 0.0
    sigma = state.noise_sigma
    return float(np.clip(state.rng.normal(0.0, sigma), -3.0 * sigma, 3.0 * sigma))


def tick(state: TargetState, offered_load: float, dt_s: float) -> tuple[Sample, Sample]:
    """Advance the target by dt and emit one (throughput, latency) pair."""
    if dt_s <= 0:
        raise ValueError("dt_s must be positive")
    _advance_capacity(state, dt_s)
    t_ms = int(round(state.clock_s * 1000))
    c = max(state.c, 0.0)
    throughput = max(0.0, min(offered_load, c) * (1.0 + _noise(state)))
    latency = state.l0 * max(1.0, offered_load / max(c, CAPACITY_EPSILON))
    latency = min(latency, LATENCY_CEILING_FACTOR * state.l0)
    latency = max(0.0, latency * (1.0 + _noise(state)))
    return Sample(t_ms, throughput), Sample(t_ms, latency)
