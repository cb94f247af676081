from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from resbench.adapters import AdapterBinding, Implementation, Role
from resbench.orchestrator import Phases, RunStore, TestPlan
from resbench.simtarget import AdversityKind, AdversityProfile, RecoveryMode


@pytest.fixture
def store(tmp_path) -> RunStore:
    return RunStore(tmp_path / "store")


def simulated_bindings(c0=100.0, l0=10.0, noise_sigma=0.0, seed=0) -> dict:
    params = {"c0": c0, "l0": l0, "noise_sigma": noise_sigma, "seed": seed}
    return {
        Role.SWITCH: AdapterBinding(Role.SWITCH, Implementation.SIMULATED, params),
        Role.WORKLOAD: AdapterBinding(Role.WORKLOAD, Implementation.SIMULATED),
        Role.ADVERSITY: AdapterBinding(Role.ADVERSITY, Implementation.SIMULATED),
        Role.METRICS: AdapterBinding(Role.METRICS, Implementation.SIMULATED),
    }


def make_plan(
    plan_id="plan-test",
    severity=0.6,
    duration_s=5.0,
    recovery_mode=RecoveryMode.FULL,
    recovery_level=None,
    kappa=1.0,
    offered_load=130.0,
    noise_sigma=0.0,
    seed=0,
    warmup_s=5.0,
    baseline_s=30.0,
    observe_tail_s=40.0,
    repeat=1,
    kind=AdversityKind.CPU_SATURATION,
    bindings=None,
) -> TestPlan:
    return TestPlan(
        id=plan_id,
        bindings=bindings or simulated_bindings(noise_sigma=noise_sigma, seed=seed),
        offered_load=offered_load,
        cadence_ms=1000,
        phases=Phases(
            warmup_s=warmup_s,
            baseline_s=baseline_s,
            inject_at_s=warmup_s + baseline_s,
            observe_tail_s=observe_tail_s,
        ),
        adversity=AdversityProfile(
            kind=kind,
            severity=severity,
            duration_s=duration_s,
            recovery_mode=recovery_mode,
            recovery_level=recovery_level,
            kappa=kappa,
        ),
        repeat=repeat,
    )
