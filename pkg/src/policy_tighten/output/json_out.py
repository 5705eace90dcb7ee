"""JSON structured output for reports and metrics."""

from __future__ import annotations

import json
from typing import Any

from policy_tighten.diff.engine import ChangeRecord
from policy_tighten.evaluation.metrics import PolicyMetrics
from policy_tighten.logs.access_log import ConsistencyReport
from policy_tighten.tighten.report import TighteningReport


def render_report(
    report: TighteningReport,
    changes: list[ChangeRecord] | None = None,
    timing: bool = True,
) -> str:
    """Tightening report as JSON; `timing=False` drops every wall-clock figure."""
    output = report.to_dict(timing=timing)
    if changes is not None:
        output["changes"] = [c.to_dict() for c in changes]
    return _dump(output)


def render_consistency(consistency: ConsistencyReport) -> str:
    return _dump(consistency.to_dict())


def render_metrics_json(metrics: PolicyMetrics) -> str:
    return _dump(metrics.to_dict())


def _dump(output: dict[str, Any]) -> str:
    return json.dumps(_serialize_value(output), indent=2, ensure_ascii=False) + "\n"


def _serialize_value(value: Any) -> Any:
    """Ensure value is JSON-serializable."""
    if isinstance(value, (str, int, float, bool, type(None))):
        return value
    if isinstance(value, (list, tuple)):
        return [_serialize_value(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _serialize_value(v) for k, v in value.items()}
    return str(value)
