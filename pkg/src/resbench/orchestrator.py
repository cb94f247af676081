"""Core layer: test lifecycle state machine, campaign repetition, run store.

A run walks Created -> Preparing -> Warmup -> Baseline -> Injecting ->
Observing -> Computing -> Done; Failed and Aborted are reachable from any
active state. The controller owns all adapter calls; the collector feeds
samples into the run's series buffer one grid step at a time, so simulated
runs execute in compressed time (no wall-clock pacing).
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

from .adapters import AdapterBinding, AdapterSet, Implementation, Role, make_adapters
from .analysis import analyze
from .errors import (
    CollectorLost,
    IllegalTransition,
    InvalidPlan,
    InvalidState,
    NotFound,
    ResbenchError,
    StoreCorrupt,
)
from .resilience import DetectionConfig, PatternKind, ResilienceTriangle
from .scoring import (
    MultiRunScores,
    ScoreCard,
    ScoreConfig,
    ScoreMatrix,
    build_run_report,
    score_campaign,
)
from .series import (
    Metric,
    MetricSeries,
    Sample,
    dump_series_csv,
    parse_series_csv,
)
from .simtarget import AdversityProfile


class RunState(Enum):
    CREATED = "created"
    PREPARING = "preparing"
    WARMUP = "warmup"
    BASELINE = "baseline"
    INJECTING = "injecting"
    OBSERVING = "observing"
    COMPUTING = "computing"
    DONE = "done"
    FAILED = "failed"
    ABORTED = "aborted"


_ORDER = [
    RunState.CREATED,
    RunState.PREPARING,
    RunState.WARMUP,
    RunState.BASELINE,
    RunState.INJECTING,
    RunState.OBSERVING,
    RunState.COMPUTING,
    RunState.DONE,
]

TERMINAL_STATES = {RunState.DONE, RunState.FAILED, RunState.ABORTED}

LEGAL_TRANSITIONS: set[tuple[RunState, RunState]] = set(
    zip(_ORDER, _ORDER[1:])
) | {
    (state, terminal)
    for state in RunState
    if state not in TERMINAL_STATES
    for terminal in (RunState.FAILED, RunState.ABORTED)
}


@dataclass(frozen=True)
class Phases:
    warmup_s: float = 5.0
    baseline_s: float = 30.0
    inject_at_s: float = 35.0
    observe_tail_s: float = 40.0

    def __post_init__(self) -> None:
        if min(self.warmup_s, self.baseline_s, self.inject_at_s, self.observe_tail_s) < 0:
            raise InvalidPlan("phase durations must be non-negative")
        if self.inject_at_s < self.warmup_s + self.baseline_s:
            raise InvalidPlan("inject_at_s must be >= warmup_s + baseline_s")


@dataclass(frozen=True)
class TestPlan:
    """Declarative scenario: bindings, load, phases, adversity, repetition."""

    id: str
    bindings: dict[Role, AdapterBinding]
    offered_load: float
    cadence_ms: int
    phases: Phases
    adversity: AdversityProfile
    repeat: int = 1
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    scoring: ScoreConfig = field(default_factory=ScoreConfig)

    def __post_init__(self) -> None:
        if self.repeat < 1:
            raise InvalidPlan("repeat must be >= 1")
        if self.cadence_ms <= 0:
            raise InvalidPlan("cadence_ms must be positive")
        if self.offered_load <= 0:
            raise InvalidPlan("offered_load must be positive")
        missing = [r.value for r in Role if r not in self.bindings]
        if missing:
            raise InvalidPlan(f"plan missing bindings: {', '.join(missing)}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "bindings": {r.value: b.to_dict() for r, b in self.bindings.items()},
            "offered_load": self.offered_load,
            "cadence_ms": self.cadence_ms,
            "phases": {
                "warmup_s": self.phases.warmup_s,
                "baseline_s": self.phases.baseline_s,
                "inject_at_s": self.phases.inject_at_s,
                "observe_tail_s": self.phases.observe_tail_s,
            },
            "adversity": self.adversity.to_dict(),
            "repeat": self.repeat,
            "detection": self.detection.to_dict(),
            "scoring": self.scoring.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "TestPlan":
        try:
            bindings_raw = d["bindings"]
            bindings = {
                role: AdapterBinding.from_dict(role, bindings_raw[role.value])
                for role in Role
                if role.value in bindings_raw
            }
            phases_raw = d.get("phases", {})
            plan = TestPlan(
                id=str(d.get("id") or f"plan-{uuid.uuid4().hex[:8]}"),
                bindings=bindings,
                offered_load=float(d["offered_load"]),
                cadence_ms=int(d["cadence_ms"]),
                phases=Phases(
                    warmup_s=float(phases_raw.get("warmup_s", 5.0)),
                    baseline_s=float(phases_raw.get("baseline_s", 30.0)),
                    inject_at_s=float(phases_raw.get("inject_at_s", 35.0)),
                    observe_tail_s=float(phases_raw.get("observe_tail_s", 40.0)),
                ),
                adversity=AdversityProfile.from_dict(d["adversity"]),
                repeat=int(d.get("repeat", 1)),
                detection=DetectionConfig.from_dict(d["detection"]) if d.get("detection") else DetectionConfig(),
                scoring=ScoreConfig.from_dict(d["scoring"]) if d.get("scoring") else ScoreConfig(),
            )
        except InvalidPlan:
            raise
        except ResbenchError as exc:
            raise InvalidPlan(str(exc)) from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidPlan(f"invalid plan: {exc}") from exc
        return plan

    def binding_key(self) -> str:
        """Identity of the target this plan drives; used to serialize runs."""
        return json.dumps(
            {r.value: b.to_dict() for r, b in sorted(self.bindings.items(), key=lambda kv: kv[0].value)},
            sort_keys=True,
        )


@dataclass
class RunRecord:
    run_id: str
    plan_id: str
    state: RunState
    throughput: Optional[MetricSeries] = None
    latency: Optional[MetricSeries] = None
    triangle: Optional[ResilienceTriangle] = None
    scorecard: Optional[ScoreCard] = None
    started_at: Optional[float] = None
    finished_at: Optional[float] = None
    log: list[dict] = field(default_factory=list)

    def meta_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "plan_id": self.plan_id,
            "state": self.state.value,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "no_triangle": self.state is RunState.DONE and self.triangle is None,
        }


@dataclass
class CampaignRecord:
    campaign_id: str
    plan_id: str
    run_ids: list[str]
    matrix: Optional[ScoreMatrix]
    multi: Optional[MultiRunScores]
    state: str = "done"


# -- run store -------------------------------------------------------------------


class RunStore:
    """Filesystem store: one directory per run with diff-able artifacts."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        (self.root / "runs").mkdir(parents=True, exist_ok=True)
        (self.root / "plans").mkdir(parents=True, exist_ok=True)
        (self.root / "campaigns").mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, run_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(run_id, threading.Lock())

    # plans

    def save_plan(self, plan: TestPlan) -> None:
        path = self.root / "plans" / f"{plan.id}.json"
        path.write_text(json.dumps(plan.to_dict(), indent=2, sort_keys=True) + "\n")

    def load_plan(self, plan_id: str) -> TestPlan:
        path = self.root / "plans" / f"{plan_id}.json"
        if not path.exists():
            raise NotFound(f"plan {plan_id!r} not found")
        return TestPlan.from_dict(_read_json(path))

    def list_plans(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "plans").glob("*.json"))

    # runs

    def run_dir(self, run_id: str) -> Path:
        return self.root / "runs" / run_id

    def save_run(self, record: RunRecord, plan: Optional[TestPlan] = None) -> None:
        with self._lock_for(record.run_id):
            d = self.run_dir(record.run_id)
            d.mkdir(parents=True, exist_ok=True)
            if plan is not None:
                (d / "plan.json").write_text(
                    json.dumps(plan.to_dict(), indent=2, sort_keys=True) + "\n"
                )
            (d / "series.csv").write_text(
                dump_series_csv(record.throughput, record.latency), newline="\n"
            )
            if record.triangle is not None:
                pattern = record.scorecard.pattern if record.scorecard else None
                (d / "triangle.json").write_text(
                    json.dumps(record.triangle.to_dict(pattern), indent=2, sort_keys=True) + "\n"
                )
            if record.scorecard is not None:
                (d / "scores.json").write_text(
                    json.dumps(record.scorecard.to_dict(), indent=2, sort_keys=True) + "\n"
                )
            with open(d / "log.jsonl", "w", encoding="utf-8", newline="\n") as fh:
                for entry in record.log:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")
            (d / "meta.json").write_text(
                json.dumps(record.meta_dict(), indent=2, sort_keys=True) + "\n"
            )

    def load_run(self, run_id: str) -> RunRecord:
        d = self.run_dir(run_id)
        meta_path = d / "meta.json"
        if not meta_path.exists():
            raise NotFound(f"run {run_id!r} not found")
        meta = _read_json(meta_path)
        throughput = latency = None
        series_path = d / "series.csv"
        if series_path.exists():
            try:
                throughput, latency = parse_series_csv(series_path.read_text())
            except ResbenchError as exc:
                raise StoreCorrupt(f"{series_path}: {exc}") from exc
        triangle = None
        tri_path = d / "triangle.json"
        if tri_path.exists():
            triangle = ResilienceTriangle.from_dict(_read_json(tri_path))
        scorecard = None
        scores_path = d / "scores.json"
        if scores_path.exists():
            scorecard = ScoreCard.from_dict(_read_json(scores_path))
        log: list[dict] = []
        log_path = d / "log.jsonl"
        if log_path.exists():
            for line_no, line in enumerate(log_path.read_text().splitlines(), start=1):
                if not line.strip():
                    continue
                try:
                    log.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise StoreCorrupt(f"{log_path}:{line_no}: {exc}") from exc
        return RunRecord(
            run_id=meta["run_id"],
            plan_id=meta["plan_id"],
            state=RunState(meta["state"]),
            throughput=throughput,
            latency=latency,
            triangle=triangle,
            scorecard=scorecard,
            started_at=meta.get("started_at"),
            finished_at=meta.get("finished_at"),
            log=log,
        )

    def list_runs(
        self,
        plan_id: Optional[str] = None,
        state: Optional[RunState] = None,
        started_after: Optional[float] = None,
        started_before: Optional[float] = None,
    ) -> list[dict]:
        out = []
        for meta_path in sorted((self.root / "runs").glob("*/meta.json")):
            meta = _read_json(meta_path)
            if plan_id is not None and meta.get("plan_id") != plan_id:
                continue
            if state is not None and meta.get("state") != state.value:
                continue
            started = meta.get("started_at")
            if started_after is not None and (started is None or started < started_after):
                continue
            if started_before is not None and (started is None or started > started_before):
                continue
            out.append(meta)
        out.sort(key=lambda m: (m.get("started_at") or 0.0, m["run_id"]))
        return out

    # campaigns

    def save_campaign(self, record: CampaignRecord) -> None:
        d = self.root / "campaigns" / record.campaign_id
        d.mkdir(parents=True, exist_ok=True)
        body = {
            "campaign_id": record.campaign_id,
            "plan_id": record.plan_id,
            "run_ids": record.run_ids,
            "state": record.state,
            "matrix": [row.to_dict() for row in record.matrix.rows] if record.matrix else None,
            "multi": record.multi.to_dict() if record.multi else None,
        }
        (d / "meta.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")

    def load_campaign(self, campaign_id: str) -> CampaignRecord:
        path = self.root / "campaigns" / campaign_id / "meta.json"
        if not path.exists():
            raise NotFound(f"campaign {campaign_id!r} not found")
        body = _read_json(path)
        matrix = None
        if body.get("matrix"):
            matrix = ScoreMatrix(tuple(ScoreCard.from_dict(r) for r in body["matrix"]))
        multi = None
        if body.get("multi"):
            m = body["multi"]
            multi = MultiRunScores(m["per"], m["dev"], m["ada"], m["n"])
        return CampaignRecord(
            campaign_id=body["campaign_id"],
            plan_id=body["plan_id"],
            run_ids=list(body["run_ids"]),
            matrix=matrix,
            multi=multi,
            state=body.get("state", "done"),
        )


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise StoreCorrupt(f"{path}: {exc}") from exc


# -- run controller -----------------------------------------------------------------

SampleHook = Callable[[int, Sample, Sample], None]
StateHook = Callable[["RunRecord"], None]


class RunController:
    """Owns one run end to end; all adapter calls happen on its thread."""

    def __init__(
        self,
        plan: TestPlan,
        store: Optional[RunStore] = None,
        run_id: Optional[str] = None,
        seed_offset: int = 0,
        on_sample: Optional[SampleHook] = None,
        on_state: Optional[StateHook] = None,
        adapters: Optional[AdapterSet] = None,
    ):
        self.plan = plan
        self.store = store
        self.run_id = run_id or f"run-{uuid.uuid4().hex[:12]}"
        self.record = RunRecord(self.run_id, plan.id, RunState.CREATED)
        self._seed_offset = seed_offset
        self._on_sample = on_sample
        self._on_state = on_state
        self._abort = threading.Event()
        self._adapters = adapters
        self._injected = False
        self._reverted = False
        self._workload_handle = None
        self._injection_handle = None
        self.inject_calls = 0
        self.revert_calls = 0

    # -- bookkeeping

    def log_event(self, level: str, event: str, detail: Optional[dict] = None) -> None:
        self.record.log.append(
            {"ts": time.time(), "level": level, "event": event, "detail": detail or {}}
        )

    def _adapter_log(self, event: str, detail: dict) -> None:
        self.log_event("info", event, detail)

    def _transition(self, new_state: RunState) -> None:
        old = self.record.state
        if (old, new_state) not in LEGAL_TRANSITIONS:
            raise IllegalTransition(f"{old.value} -> {new_state.value}")
        self.record.state = new_state
        self.log_event("info", "state", {"from": old.value, "to": new_state.value})
        if self._on_state:
            self._on_state(self.record)

    def request_abort(self) -> None:
        self._abort.set()

    @property
    def aborting(self) -> bool:
        return self._abort.is_set()

    # -- lifecycle

    def run(self) -> RunRecord:
        self.record.started_at = time.time()
        try:
            self._execute()
        except ResbenchError as exc:
            self._fail(exc)
        except Exception as exc:  # defensive: adapter bugs must not leak a run
            self._fail(exc)
        finally:
            self.record.finished_at = time.time()
            self._persist()
        return self.record

    def _execute(self) -> None:
        plan = self.plan
        if self._adapters is None:
            self._adapters = make_adapters(
                plan.bindings, plan.cadence_ms, self._adapter_log, self._seed_offset
            )
        adapters = self._adapters
        self._transition(RunState.PREPARING)
        self._check_abort()
        adapters.switch.connect()
        adapters.metrics.start()
        self._workload_handle = adapters.workload.start(plan.offered_load)
        self._transition(RunState.WARMUP)

        warmup_ms = int(plan.phases.warmup_s * 1000)
        inject_rel_ms = int((plan.phases.inject_at_s - plan.phases.warmup_s) * 1000)
        inject_end_ms = inject_rel_ms + int(plan.adversity.duration_s * 1000)
        end_ms = inject_end_ms + int(plan.phases.observe_tail_s * 1000)

        thr_samples: list[Sample] = []
        lat_samples: list[Sample] = []
        seq = 0
        while True:
            self._check_abort()
            pair = adapters.metrics.pull()
            if pair is None:
                raise CollectorLost("metrics source ended before the plan window")
            thr_raw, lat_raw = pair
            if thr_raw.t_ms < warmup_ms:
                continue
            t = thr_raw.t_ms - warmup_ms
            if self.record.state is RunState.WARMUP:
                self._transition(RunState.BASELINE)
            if self.record.state is RunState.BASELINE and t >= inject_rel_ms:
                self._transition(RunState.INJECTING)
                self._injection_handle = adapters.adversity.inject(plan.adversity)
                self._injected = True
                self.inject_calls += 1
            if (
                self.record.state is RunState.INJECTING
                and t >= inject_end_ms
                and not self._reverted
            ):
                adapters.adversity.revert(self._injection_handle)
                self._reverted = True
                self.revert_calls += 1
                self._transition(RunState.OBSERVING)
            thr_s = Sample(t, thr_raw.value)
            lat_s = Sample(t, lat_raw.value)
            thr_samples.append(thr_s)
            lat_samples.append(lat_s)
            if self._on_sample:
                self._on_sample(seq, thr_s, lat_s)
            seq += 1
            if t >= end_ms:
                break

        self._set_series(thr_samples, lat_samples)
        adapters.workload.stop(self._workload_handle)
        self._workload_handle = None
        adapters.metrics.stop()
        adapters.switch.disconnect()
        # a plan whose adversity never fired still reverts nothing
        if self.record.state is RunState.BASELINE:
            self._transition(RunState.INJECTING)
        if self.record.state is RunState.INJECTING:
            if self._injected and not self._reverted:
                adapters.adversity.revert(self._injection_handle)
                self._reverted = True
                self.revert_calls += 1
            self._transition(RunState.OBSERVING)
        self._transition(RunState.COMPUTING)
        self._compute()
        self._transition(RunState.DONE)

    def _set_series(self, thr: list[Sample], lat: list[Sample]) -> None:
        cadence = self.plan.cadence_ms
        if thr:
            self.record.throughput = MetricSeries(Metric.THROUGHPUT, "tps", cadence, tuple(thr))
            self.record.latency = MetricSeries(Metric.LATENCY, "ms", cadence, tuple(lat))

    def _compute(self) -> None:
        record = self.record
        if record.throughput is None or len(record.throughput) < 2:
            self.log_event("warning", "compute_skipped", {"reason": "no samples"})
            return
        result = analyze(
            record.throughput,
            record.latency,
            self.plan.detection,
            self.plan.scoring,
            self.plan.cadence_ms,
        )
        record.throughput = result.throughput
        record.latency = result.latency if result.latency is not None else record.latency
        record.triangle = result.triangle
        record.scorecard = result.card
        self.log_event(
            "info",
            "computed",
            {
                "triangle": result.triangle.to_dict(result.card.pattern) if result.triangle else None,
                "scores": result.card.scores_dict(),
            },
        )

    def _cleanup_adapters(self) -> None:
        adapters = self._adapters
        if adapters is None:
            return
        if self._injected and not self._reverted:
            try:
                adapters.adversity.revert(self._injection_handle)
            except Exception as exc:
                self.log_event("error", "revert_failed", {"error": str(exc)})
            finally:
                self._reverted = True
                self.revert_calls += 1
        if self._workload_handle is not None:
            try:
                adapters.workload.stop(self._workload_handle)
            except Exception as exc:
                self.log_event("error", "workload_stop_failed", {"error": str(exc)})
            self._workload_handle = None
        for closer in (adapters.metrics.stop, adapters.switch.disconnect):
            try:
                closer()
            except Exception:
                pass

    def _check_abort(self) -> None:
        if self._abort.is_set():
            raise _AbortRequested()

    def _fail(self, exc: Exception) -> None:
        self._cleanup_adapters()
        if isinstance(exc, _AbortRequested):
            self.log_event("info", "aborted", {})
            if self.record.state not in TERMINAL_STATES:
                self._transition(RunState.ABORTED)
            return
        name = type(exc).__name__
        self.log_event("error", name, {"message": str(exc)})
        if self.record.state not in TERMINAL_STATES:
            self._transition(RunState.FAILED)

    def _persist(self) -> None:
        if self.store is not None:
            self.store.save_run(self.record, self.plan)


class _AbortRequested(ResbenchError):
    code = "aborted"


# -- public entry points ----------------------------------------------------------

_ACTIVE: dict[str, RunController] = {}
_ACTIVE_GUARD = threading.Lock()


def _register(controller: RunController):
    with _ACTIVE_GUARD:
        _ACTIVE[controller.run_id] = controller


def _unregister(run_id: str) -> None:
    with _ACTIVE_GUARD:
        _ACTIVE.pop(run_id, None)


def run(
    plan: TestPlan,
    store: Optional[RunStore] = None,
    run_id: Optional[str] = None,
    seed_offset: int = 0,
    on_sample: Optional[SampleHook] = None,
    on_state: Optional[StateHook] = None,
) -> RunRecord:
    """Execute one run of the plan to a terminal state."""
    controller = RunController(
        plan, store, run_id, seed_offset, on_sample=on_sample, on_state=on_state
    )
    _register(controller)
    try:
        return controller.run()
    finally:
        _unregister(controller.run_id)


def abort(run_id: str, store: Optional[RunStore] = None, timeout_s: float = 30.0) -> RunRecord:
    """Abort an active run; terminal runs raise InvalidState."""
    with _ACTIVE_GUARD:
        controller = _ACTIVE.get(run_id)
    if controller is not None:
        controller.request_abort()
        deadline = time.monotonic() + timeout_s
        while controller.record.state not in TERMINAL_STATES:
            if time.monotonic() > deadline:
                break
            time.sleep(0.005)
        return controller.record
    if store is not None:
        record = store.load_run(run_id)  # NotFound if unknown
        raise InvalidState(f"run {run_id!r} is already {record.state.value}")
    raise NotFound(f"run {run_id!r} not found")


def run_campaign(
    plan: TestPlan,
    store: Optional[RunStore] = None,
    campaign_id: Optional[str] = None,
    on_run_done: Optional[Callable[[RunRecord], None]] = None,
) -> CampaignRecord:
    """Execute plan.repeat sequential runs with fresh target state per run."""
    campaign_id = campaign_id or f"camp-{uuid.uuid4().hex[:12]}"
    run_ids: list[str] = []
    cards: list[ScoreCard] = []
    durations: list[float] = []
    state = "done"
    for i in range(plan.repeat):
        record = run(plan, store, seed_offset=i)
        run_ids.append(record.run_id)
        if on_run_done:
            on_run_done(record)
        if record.state is not RunState.DONE:
            state = "failed"
            break
        assert record.scorecard is not None
        cards.append(record.scorecard)
        if record.triangle is not None:
            durations.append((record.triangle.tr_ms - record.triangle.t0_ms) / 1000.0)
        else:
            durations.append(0.0)
    matrix = ScoreMatrix(tuple(cards)) if cards else None
    multi = (
        score_campaign(matrix, durations, plan.scoring)
        if matrix is not None and state == "done"
        else None
    )
    record = CampaignRecord(campaign_id, plan.id, run_ids, matrix, multi, state)
    if store is not None:
        store.save_campaign(record)
    return record
