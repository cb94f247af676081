"""Adapter layer: uniform interfaces between the core and the outside world.

Two bindings ship for every role: a Simulated one wired to the in-process
target, and an ExternalCommand one that renders command templates and runs
them. The core never touches either implementation directly; it drives the
role interfaces only, so bindings swap without core changes.
"""

from __future__ import annotations

import shlex
import subprocess
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .errors import (
    AlreadyRunning,
    CollectorLost,
    ConnectionFailed,
    InjectionFailed,
    InvalidPlan,
    NoActiveInjection,
    TemplateError,
    WorkloadStartFailed,
)
from .series import Sample
from .simtarget import AdversityProfile, TargetState, end_adversity, inject, tick

LogFn = Callable[[str, dict], None]


def _null_log(event: str, detail: dict) -> None:
    return None


class Role(Enum):
    SWITCH = "switch"
    WORKLOAD = "workload"
    ADVERSITY = "adversity"
    METRICS = "metrics"


class Implementation(Enum):
    SIMULATED = "simulated"
    EXTERNAL_COMMAND = "external_command"


class ConnectionStatus(Enum):
    UP = "up"
    DOWN = "down"
    UNKNOWN = "unknown"


_REQUIRED_EXTERNAL_PARAMS = {
    Role.SWITCH: ("connect_cmd", "disconnect_cmd"),
    Role.WORKLOAD: ("start_cmd",),
    Role.ADVERSITY: ("inject_cmd", "revert_cmd"),
    Role.METRICS: ("stream_cmd",),
}

_TEMPLATE_PLACEHOLDERS = {
    Role.WORKLOAD: {"offered_load"},
    Role.ADVERSITY: {"kind", "severity", "duration_s"},
}


@dataclass(frozen=True)
class AdapterBinding:
    role: Role
    implementation: Implementation
    parameters: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.implementation is Implementation.EXTERNAL_COMMAND:
            missing = [
                key
                for key in _REQUIRED_EXTERNAL_PARAMS[self.role]
                if key not in self.parameters
            ]
            if missing:
                raise InvalidPlan(
                    f"{self.role.value} binding missing parameters: {', '.join(missing)}"
                )
            allowed = _TEMPLATE_PLACEHOLDERS.get(self.role, set())
            for key, value in self.parameters.items():
                if key.endswith("_cmd"):
                    _check_template(str(value), allowed)

    def to_dict(self) -> dict:
        return {
            "implementation": self.implementation.value,
            "parameters": dict(self.parameters),
        }

    @staticmethod
    def from_dict(role: Role, d: dict) -> "AdapterBinding":
        try:
            impl = Implementation(d.get("implementation", "simulated"))
        except ValueError as exc:
            raise InvalidPlan(f"unknown implementation for {role.value}: {exc}") from None
        return AdapterBinding(role, impl, dict(d.get("parameters", {})))


class _Guard(dict):
    def __missing__(self, key: str) -> str:
        raise TemplateError(f"unknown placeholder {{{key}}} in command template")


def _check_template(template: str, allowed: set[str]) -> None:
    try:
        template.format_map(_Guard({k: "" for k in allowed}))
    except TemplateError:
        raise
    except (ValueError, IndexError) as exc:
        raise TemplateError(f"malformed command template: {exc}") from None


def render_template(template: str, values: dict) -> str:
    """Substitute declared placeholders; unknown ones raise TemplateError."""
    try:
        return template.format_map(_Guard({k: str(v) for k, v in values.items()}))
    except (ValueError, IndexError) as exc:
        raise TemplateError(f"malformed command template: {exc}") from None


def run_command(command: str, log: LogFn, event: str, timeout_s: float = 30.0):
    """Run one external command, recording argv, exit code, and duration."""
    argv = shlex.split(command)
    started = time.monotonic()
    try:
        proc = subprocess.run(
            argv, capture_output=True, text=True, timeout=timeout_s
        )
    except FileNotFoundError as exc:
        log(event, {"argv": argv, "error": str(exc)})
        raise
    duration_ms = (time.monotonic() - started) * 1000.0
    log(
        event,
        {"argv": argv, "exit_code": proc.returncode, "duration_ms": round(duration_ms, 3)},
    )
    return proc


# -- simulated backend ---------------------------------------------------------

class SimulatedBackend:
    """In-process target shared by the four simulated adapters of one run."""

    def __init__(self, target: TargetState, cadence_ms: int):
        self.target = target
        self.cadence_ms = cadence_ms
        self.offered_load: Optional[float] = None
        self.connected = False


@dataclass(frozen=True)
class WorkloadHandle:
    token: object


@dataclass(frozen=True)
class InjectionHandle:
    profile: AdversityProfile
    token: object = None


# -- switch ---------------------------------------------------------------------

class SimulatedSwitch:
    def __init__(self, backend: SimulatedBackend, log: LogFn = _null_log):
        self._backend = backend
        self._status = ConnectionStatus.UNKNOWN

    def connect(self) -> ConnectionStatus:
        self._backend.connected = True
        self._status = ConnectionStatus.UP
        return self._status

    def disconnect(self) -> None:
        self._backend.connected = False
        self._status = ConnectionStatus.DOWN

    def status(self) -> ConnectionStatus:
        return self._status


class ExternalSwitch:
    def __init__(self, binding: AdapterBinding, log: LogFn = _null_log):
        self._params = binding.parameters
        self._log = log
        self._status = ConnectionStatus.UNKNOWN

    def connect(self) -> ConnectionStatus:
        try:
            proc = run_command(self._params["connect_cmd"], self._log, "switch_connect")
        except FileNotFoundError as exc:
            raise ConnectionFailed(str(exc)) from exc
        if proc.returncode != 0:
            raise ConnectionFailed(
                f"connect command exited {proc.returncode}: {proc.stderr.strip()}"
            )
        self._status = ConnectionStatus.UP
        return self._status

    def disconnect(self) -> None:
        run_command(self._params["disconnect_cmd"], self._log, "switch_disconnect")
        self._status = ConnectionStatus.DOWN

    def status(self) -> ConnectionStatus:
        cmd = self._params.get("status_cmd")
        if cmd is None:
            return self._status
        proc = run_command(cmd, self._log, "switch_status")
        return ConnectionStatus.UP if proc.returncode == 0 else ConnectionStatus.DOWN


# -- workload --------------------------------------------------------------------

class SimulatedWorkload:
    def __init__(self, backend: SimulatedBackend, log: LogFn = _null_log):
        self._backend = backend

    def start(self, offered_load: float) -> WorkloadHandle:
        if self._backend.offered_load is not None:
            raise AlreadyRunning("workload already running")
        self._backend.offered_load = float(offered_load)
        return WorkloadHandle(token=self._backend)

    def stop(self, handle: WorkloadHandle) -> None:
        self._backend.offered_load = None


class ExternalWorkload:
    def __init__(self, binding: AdapterBinding, log: LogFn = _null_log):
        self._params = binding.parameters
        self._log = log
        self._proc: Optional[subprocess.Popen] = None

    def start(self, offered_load: float) -> WorkloadHandle:
        if self._proc is not None and self._proc.poll() is None:
            raise AlreadyRunning("workload already running")
        command = render_template(
            self._params["start_cmd"], {"offered_load": offered_load}
        )
        argv = shlex.split(command)
        try:
            self._proc = subprocess.Popen(
                argv, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL
            )
        except (FileNotFoundError, OSError) as exc:
            self._log("workload_start", {"argv": argv, "error": str(exc)})
            raise WorkloadStartFailed(str(exc)) from exc
        time.sleep(0.02)
        if self._proc.poll() is not None and self._proc.returncode != 0:
            code = self._proc.returncode
            self._log("workload_start", {"argv": argv, "exit_code": code})
            raise WorkloadStartFailed(f"workload command exited immediately with {code}")
        self._log("workload_start", {"argv": argv, "pid": self._proc.pid})
        return WorkloadHandle(token=self._proc)

    def stop(self, handle: WorkloadHandle) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._log("workload_stop", {"pid": self._proc.pid if self._proc else None})
        self._proc = None


# -- adversity --------------------------------------------------------------------

class SimulatedAdversity:
    def __init__(self, backend: SimulatedBackend, log: LogFn = _null_log):
        self._backend = backend
        self._active: Optional[InjectionHandle] = None

    def inject(self, profile: AdversityProfile) -> InjectionHandle:
        inject(self._backend.target, profile)
        self._active = InjectionHandle(profile)
        return self._active

    def revert(self, handle: InjectionHandle) -> None:
        if self._active is None:
            raise NoActiveInjection("no injection to revert")
        end_adversity(self._backend.target)
        self._active = None


class ExternalAdversity:
    def __init__(self, binding: AdapterBinding, log: LogFn = _null_log):
        self._params = binding.parameters
        self._log = log
        self._active: Optional[InjectionHandle] = None

    def _render(self, template: str, profile: AdversityProfile) -> str:
        return render_template(
            template,
            {
                "kind": profile.kind.compact,
                "severity": profile.severity,
                "duration_s": profile.duration_s,
            },
        )

    def inject(self, profile: AdversityProfile) -> InjectionHandle:
        command = self._render(self._params["inject_cmd"], profile)
        try:
            proc = run_command(command, self._log, "adversity_inject")
        except FileNotFoundError as exc:
            raise InjectionFailed(str(exc)) from exc
        if proc.returncode != 0:
            raise InjectionFailed(
                f"inject command exited {proc.returncode}: {proc.stderr.strip()}"
            )
        self._active = InjectionHandle(profile)
        return self._active

    def revert(self, handle: InjectionHandle) -> None:
        if self._active is None:
            raise NoActiveInjection("no injection to revert")
        command = self._render(self._params["revert_cmd"], handle.profile)
        proc = run_command(command, self._log, "adversity_revert")
        self._active = None
        if proc.returncode != 0:
            raise InjectionFailed(
                f"revert command exited {proc.returncode}: {proc.stderr.strip()}"
            )


# -- metrics collector --------------------------------------------------------------

def parse_metric_line(line: str) -> Optional[tuple[int, float, float]]:
    """Lenient parse of one CSV data line; None when malformed."""
    parts = line.strip().split(",")
    if len(parts) != 3:
        return None
    try:
        t = int(parts[0])
        thr = float(parts[1])
        lat = float(parts[2])
    except ValueError:
        return None
    if thr < 0 or lat < 0:
        return None
    return t, thr, lat


class SimulatedMetrics:
    """Pull-based collector reading the in-process target once per cadence."""

    def __init__(self, backend: SimulatedBackend, log: LogFn = _null_log):
        self._backend = backend
        self.malformed_count = 0

    def start(self) -> None:
        return None

    def pull(self) -> Optional[tuple[Sample, Sample]]:
        backend = self._backend
        offered = backend.offered_load if backend.offered_load is not None else 0.0
        return tick(backend.target, offered, backend.cadence_ms / 1000.0)

    def stop(self) -> None:
        return None


class ExternalMetrics:
    """Collector parsing CSV series lines from an external command's stdout."""

    def __init__(self, binding: AdapterBinding, log: LogFn = _null_log):
        self._params = binding.parameters
        self._log = log
        self._proc: Optional[subprocess.Popen] = None
        self._last_t: Optional[int] = None
        self.malformed_count = 0

    def start(self) -> None:
        argv = shlex.split(self._params["stream_cmd"])
        try:
            self._proc = subprocess.Popen(
                argv, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True
            )
        except (FileNotFoundError, OSError) as exc:
            self._log("metrics_start", {"argv": argv, "error": str(exc)})
            raise CollectorLost(str(exc)) from exc
        self._log("metrics_start", {"argv": argv, "pid": self._proc.pid})

    def pull(self) -> Optional[tuple[Sample, Sample]]:
        if self._proc is None or self._proc.stdout is None:
            raise CollectorLost("collector not started")
        while True:
            line = self._proc.stdout.readline()
            if line == "":
                return None  # EOF: source gone
            stripped = line.strip()
            if not stripped or stripped.startswith("timestamp_ms"):
                continue
            parsed = parse_metric_line(stripped)
            if parsed is None:
                self.malformed_count += 1
                self._log("malformed_metric", {"line": stripped[:200]})
                continue
            t, thr, lat = parsed
            if self._last_t is not None and t <= self._last_t:
                self.malformed_count += 1
                self._log("malformed_metric", {"line": stripped[:200], "reason": "stale"})
                continue
            self._last_t = t
            return Sample(t, thr), Sample(t, lat)

    def stop(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None


# -- factory --------------------------------------------------------------------------

@dataclass
class AdapterSet:
    switch: object
    workload: object
    adversity: object
    metrics: object
    backend: Optional[SimulatedBackend]


def make_adapters(
    bindings: dict[Role, AdapterBinding],
    cadence_ms: int,
    log: LogFn = _null_log,
    seed_offset: int = 0,
) -> AdapterSet:
    """Instantiate the four adapters for a run; simulated roles share a backend."""
    backend: Optional[SimulatedBackend] = None
    if any(b.implementation is Implementation.SIMULATED for b in bindings.values()):
        switch_binding = bindings[Role.SWITCH]
        cfg = dict(switch_binding.parameters)
        cfg["seed"] = int(cfg.get("seed", 0)) + seed_offset
        backend = SimulatedBackend(TargetState.from_config_dict(cfg), cadence_ms)

    def build(role: Role, simulated_cls, external_cls):
        binding = bindings[role]
        if binding.implementation is Implementation.SIMULATED:
            if backend is None:
                raise InvalidPlan("simulated binding requires a simulated switch")
            return simulated_cls(backend, log)
        return external_cls(binding, log)

    return AdapterSet(
        switch=build(Role.SWITCH, SimulatedSwitch, ExternalSwitch),
        workload=build(Role.WORKLOAD, SimulatedWorkload, ExternalWorkload),
        adversity=build(Role.ADVERSITY, SimulatedAdversity, ExternalAdversity),
        metrics=build(Role.METRICS, SimulatedMetrics, ExternalMetrics),
        backend=backend,
    )
