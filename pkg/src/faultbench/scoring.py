"""Success criteria, per-task metrics, budgeted success and aggregate reports.

Budgeted success at a tool-call cap ``k`` is the share of tasks that both
succeeded and used at most ``k`` calls::

    S(k) = (1/N) * sum_i [success_i and calls_i <= k]

The reported AUC is the mean of ``S(k)`` over ``CAPS``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import asdict, dataclass
from typing import Any

from faultbench.canonical import strict_equal
from faultbench.model import (
    DOMAINS,
    MinSuccessfulToolCalls,
    MinToolCalls,
    StateContains,
    StateEquals,
    StateExists,
    StateKeyValue,
    TaskRecord,
)

CAPS = (4, 8, 16, 32)
FAMILIES = ("none", "schema_drift", "rate_limit", "timeout", "auth_failure", "adversarial_rewrite")
INVALID_CODES = ("unknown_tool", "invalid_arguments")

_MISSING = object()


class ScoringError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------


def resolve_path(state: Any, path: str) -> Any:
    """Walk ``a/b/c`` through nested maps. Returns ``_MISSING`` when unresolvable."""
    node = state
    for key in path.split("/"):
        if not isinstance(node, dict) or key not in node:
            return _MISSING
        node = node[key]
    return node


def _contains(container: Any, member: Any) -> bool:
    if isinstance(container, list):
        return any(strict_equal(x, member) for x in container)
    if isinstance(container, dict):
        return isinstance(member, str) and member in container
    if isinstance(container, str):
        return isinstance(member, str) and member in container
    return False


def check_criterion(state: Any, transcript: Sequence[dict], criterion: Any) -> bool:
    if isinstance(criterion, MinToolCalls):
        return len(transcript) >= criterion.n
    if isinstance(criterion, MinSuccessfulToolCalls):
        return sum(1 for t in transcript if t["ok"]) >= criterion.n
    value = resolve_path(state, criterion.path)
    if value is _MISSING:
        return False
    if isinstance(criterion, StateExists):
        return True
    if isinstance(criterion, StateEquals):
        return strict_equal(value, criterion.value)
    if isinstance(criterion, StateContains):
        return _contains(value, criterion.member)
    if isinstance(criterion, StateKeyValue):
        return isinstance(value, dict) and criterion.key in value \
            and strict_equal(value[criterion.key], criterion.value)
    raise ScoringError(f"unknown criterion {criterion!r}")


def check_criteria(state: Any, transcript: Sequence[dict], criteria: Sequence[Any]) -> bool:
    """True iff every criterion holds.

    ``transcript`` holds one ``{"tool", "ok"}`` entry per tool call, or may be
    a list of trace step records (finish steps are skipped).
    """
    calls = [_call_entry(s) for s in transcript]
    calls = [c for c in calls if c is not None]
    return all(check_criterion(state, calls, c) for c in criteria)


def _call_entry(step: dict) -> dict | None:
    if "ok" in step:
        return step
    action = step.get("action")
    if not isinstance(action, dict):
        return None
    return {"tool": action["call"]["tool"], "ok": bool(step["result"] and step["result"]["ok"])}


# ---------------------------------------------------------------------------
# Per-task metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaskMetrics:
    task_success: bool
    tool_calls_used: int
    invalid_calls: int = 0
    policy_violations: int = 0
    fault_affected: bool = False
    recovery_success: bool | None = None
    time_to_recovery: int | None = None
    budget_exceeded: bool = False
    catastrophic: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def score_task(trace: Any, task: TaskRecord) -> TaskMetrics:
    """Metrics for one episode, computed from its trace alone."""
    if trace.task_id != task.task_id:
        raise ScoringError(f"trace for {trace.task_id} scored against {task.task_id}")
    call_steps = [s for s in trace.steps if isinstance(s.get("action"), dict)]
    invalid = violations = 0
    first_fault: tuple[int, str] | None = None
    recovered_at: int | None = None
    for s in call_steps:
        result = s["result"]
        tool = s["action"]["call"]["tool"]
        if result["ok"]:
            if first_fault is not None and recovered_at is None and tool == first_fault[1]:
                recovered_at = s["step"]
            continue
        err = result["error"]
        if err["code"] in INVALID_CODES:
            invalid += 1
        if err["code"] == "policy_violation":
            violations += 1
        if first_fault is None and err.get("fault_context"):
            first_fault = (s["step"], tool)
    affected = first_fault is not None
    return TaskMetrics(
        task_success=trace.termination == "success",
        tool_calls_used=len(call_steps),
        invalid_calls=invalid,
        policy_violations=violations,
        fault_affected=affected,
        recovery_success=(recovered_at is not None) if affected else None,
        time_to_recovery=(recovered_at - first_fault[0]) if recovered_at is not None else None,
        budget_exceeded=trace.termination in ("budget_steps", "budget_calls"),
        catastrophic=trace.termination in ("retry_overflow", "agent_protocol_error"),
    )


# ---------------------------------------------------------------------------
# Aggregates
# ---------------------------------------------------------------------------


def budgeted_success(metrics: Sequence[TaskMetrics], k: int) -> float:
    if not metrics:
        raise ScoringError("budgeted success is undefined for an empty task list")
    if k < 1:
        raise ScoringError("cap must be >= 1")
    hits = sum(1 for m in metrics if m.task_success and m.tool_calls_used <= k)
    return hits / len(metrics)


def budget_curve(metrics: Sequence[TaskMetrics], caps: Sequence[int] = CAPS) -> dict[int, float]:
    return {k: budgeted_success(metrics, k) for k in caps}


def _mean(values: Sequence[float]) -> float | None:
    return sum(values) / len(values) if values else None


def summarize(metrics: Sequence[TaskMetrics]) -> dict:
    """Means and rates over one slice of tasks."""
    n = len(metrics)
    if n == 0:
        return {"n": 0}
    total_calls = sum(m.tool_calls_used for m in metrics)
    affected = [m for m in metrics if m.fault_affected]
    recovered = [m for m in affected if m.recovery_success]
    ttr = [m.time_to_recovery for m in recovered if m.time_to_recovery is not None]
    curve = budget_curve(metrics)
    return {
        "n": n,
        "success": sum(m.task_success for m in metrics) / n,
        "policy_violations": sum(m.policy_violations for m in metrics) / n,
        "invalid_call_rate": (sum(m.invalid_calls for m in metrics) / total_calls) if total_calls else 0.0,
        "fault_affected": len(affected),
        "recovery": (len(recovered) / len(affected)) if affected else None,
        "time_to_recovery": _mean(ttr),
        "tool_calls": total_calls / n,
        "budget_exceeded": sum(m.budget_exceeded for m in metrics) / n,
        "catastrophic": sum(m.catastrophic for m in metrics) / n,
        "budgeted_success": {str(k): v for k, v in curve.items()},
        "auc": sum(curve.values()) / len(curve),
    }


def aggregate(metrics: Sequence[TaskMetrics], tasks: Sequence[TaskRecord],
              agent: str = "") -> dict:
    """Corpus report with per-fault-family and per-domain slices."""
    if len(metrics) != len(tasks):
        raise ScoringError(f"{len(metrics)} metrics for {len(tasks)} tasks")
    by_family: dict[str, list[TaskMetrics]] = {}
    by_domain: dict[str, list[TaskMetrics]] = {}
    for m, t in zip(metrics, tasks):
        by_family.setdefault(t.fault_family, []).append(m)
        by_domain.setdefault(t.domain, []).append(m)
    return {
        "agent": agent,
        "overall": summarize(metrics),
        "by_fault": {f: summarize(by_family[f]) for f in FAMILIES if f in by_family},
        "by_domain": {d: summarize(by_domain[d]) for d in DOMAINS if d in by_domain},
    }


# ---------------------------------------------------------------------------
# Emitters
# ---------------------------------------------------------------------------

_FAULT_ROWS = (
    ("Timeout success", "timeout", "success"),
    ("Timeout recovery", "timeout", "recovery"),
    ("Schema drift success", "schema_drift", "success"),
    ("Schema drift recovery", "schema_drift", "recovery"),
    ("Adversarial success", "adversarial_rewrite", "success"),
    ("Authz success", "auth_failure", "success"),
    ("Rate limit success", "rate_limit", "success"),
)


def _fmt(value: Any, digits: int = 3) -> str:
    if value is None:
        return "-"
    return f"{value:.{digits}f}"


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for n, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if n == 0:
            lines.append("-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def overall_table(reports: Sequence[dict]) -> str:
    rows = [["Agent", "Success", "Violations", "Recovery", "Calls", "AUC"]]
    for r in reports:
        o = r["overall"]
        rows.append([r["agent"], _fmt(o["success"]), _fmt(o["policy_violations"]),
                     _fmt(o["recovery"]), _fmt(o["tool_calls"], 2), _fmt(o["auc"])])
    return _align(rows)


def fault_table(reports: Sequence[dict]) -> str:
    rows = [["Setting"] + [r["agent"] for r in reports]]
    for label, family, metric in _FAULT_ROWS:
        if not any(family in r["by_fault"] for r in reports):
            continue
        rows.append([label] + [_fmt(r["by_fault"].get(family, {}).get(metric)) for r in reports])
    return _align(rows)


def table_rows(reports: Sequence[dict]) -> dict:
    """Machine-readable version of both tables."""
    return {
        "overall": [
            {"agent": r["agent"], **{k: r["overall"][k] for k in
                                     ("success", "policy_violations", "recovery", "tool_calls", "auc")}}
            for r in reports
        ],
        "by_fault": [
            {"setting": label, **{r["agent"]: r["by_fault"].get(family, {}).get(metric) for r in reports}}
            for label, family, metric in _FAULT_ROWS
            if any(family in r["by_fault"] for r in reports)
        ],
    }


def figure_data(report: dict) -> str:
    """``k,S(k)`` lines for the budgeted success curve."""
    curve = report["overall"]["budgeted_success"]
    return "".join(f"{k},{curve[str(k)]!r}\n" for k in CAPS)
