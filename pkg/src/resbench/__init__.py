"""resbench: a database-resilience testing workbench.

Drives a target through configurable adverse-event scenarios, records
throughput/latency series, locates the resilience triangle, classifies the
recovery pattern, and computes eight resilience scores. Operated through a
CLI (`resbench`), a REST service, and a companion web UI.
"""

from .errors import ResbenchError
from .resilience import (
    ChangePoint,
    DetectionConfig,
    Direction,
    PatternKind,
    ResilienceTriangle,
    classify_pattern,
    detect_change_points,
    extract_triangle,
)
from .scoring import (
    MultiRunScores,
    ScoreCard,
    ScoreConfig,
    ScoreInputs,
    ScoreMatrix,
    score_campaign,
    score_run,
)
from .series import Metric, MetricSeries, Sample
from .simtarget import AdversityKind, AdversityProfile, RecoveryMode, TargetState
from .synthgen import PatternSpec, default_spec, generate_pattern, generate_ranked_set

__version__ = "0.1.0"

__all__ = [
    "AdversityKind",
    "AdversityProfile",
    "ChangePoint",
    "DetectionConfig",
    "Direction",
    "Metric",
    "MetricSeries",
    "MultiRunScores",
    "PatternKind",
    "PatternSpec",
    "RecoveryMode",
    "ResbenchError",
    "ResilienceTriangle",
    "Sample",
    "ScoreCard",
    "ScoreConfig",
    "ScoreInputs",
    "ScoreMatrix",
    "TargetState",
    "classify_pattern",
    "default_spec",
    "detect_change_points",
    "extract_triangle",
    "generate_pattern",
    "generate_ranked_set",
    "score_campaign",
    "score_run",
    "__version__",
]
