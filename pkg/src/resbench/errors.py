"""Exception hierarchy for the workbench.

Every domain failure raises a subclass of :class:`ResbenchError` so callers
(CLI, service) can map them to exit code 1 / HTTP error bodies uniformly.
"""

from __future__ import annotations


class ResbenchError(Exception):
    """Base class for all domain errors."""

    code = "error"


# -- series ----------------------------------------------------------------

class EmptySeries(ResbenchError):
    code = "empty_series"


class InvalidWindow(ResbenchError):
    code = "invalid_window"


class OutOfRange(ResbenchError):
    code = "out_of_range"


class InvalidSegmentation(ResbenchError):
    code = "invalid_segmentation"


class MalformedSeriesCsv(ResbenchError):
    code = "malformed_csv"

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


# -- resilience -------------------------------------------------------------

class InsufficientData(ResbenchError):
    code = "insufficient_data"


class InconsistentInput(ResbenchError):
    code = "inconsistent_input"


# -- scoring ----------------------------------------------------------------

class DegenerateLatency(ResbenchError):
    code = "degenerate_latency"


class DegenerateBaseline(ResbenchError):
    code = "degenerate_baseline"


class DegenerateMean(ResbenchError):
    code = "degenerate_mean"


class EmptyCampaign(ResbenchError):
    code = "empty_campaign"


class InconsistentCampaign(ResbenchError):
    code = "inconsistent_campaign"


# -- synthgen / simtarget ----------------------------------------------------

class InvalidSpec(ResbenchError):
    code = "invalid_spec"


class AlreadyActive(ResbenchError):
    code = "already_active"


# -- adapters ----------------------------------------------------------------

class ConnectionFailed(ResbenchError):
    code = "connection_failed"


class WorkloadStartFailed(ResbenchError):
    code = "workload_start_failed"


class AlreadyRunning(ResbenchError):
    code = "already_running"


class InjectionFailed(ResbenchError):
    code = "injection_failed"


class NoActiveInjection(ResbenchError):
    code = "no_active_injection"


class TemplateError(ResbenchError):
    code = "template_error"


class MalformedMetric(ResbenchError):
    code = "malformed_metric"


class CollectorLost(ResbenchError):
    code = "collector_lost"


# -- orchestrator / store -----------------------------------------------------

class InvalidPlan(ResbenchError):
    code = "invalid_plan"


class NotFound(ResbenchError):
    code = "not_found"


class InvalidState(ResbenchError):
    code = "invalid_state"


class IllegalTransition(ResbenchError):
    code = "illegal_transition"


class StoreCorrupt(ResbenchError):
    code = "store_corrupt"
