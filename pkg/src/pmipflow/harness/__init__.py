"""Scenario loading, trace/metric collection, experiment presets and the CLI."""

from .metrics import (
    FlowMetrics,
    MetricSet,
    NoHandoverObserved,
    emit_csv,
    measure_handover,
)
from .scenario import (
    Knobs,
    Scenario,
    ScenarioInvalid,
    apply_overrides,
    load_scenario,
    load_scenario_text,
    packaged_scenario,
    packaged_scenario_text,
    parse_doc,
)
from .trace import TraceLog, TraceRecord

__all__ = [
    "FlowMetrics",
    "Knobs",
    "MetricSet",
    "NoHandoverObserved",
    "Scenario",
    "ScenarioInvalid",
    "TraceLog",
    "TraceRecord",
    "apply_overrides",
    "emit_csv",
    "load_scenario",
    "load_scenario_text",
    "measure_handover",
    "packaged_scenario",
    "packaged_scenario_text",
    "parse_doc",
]
