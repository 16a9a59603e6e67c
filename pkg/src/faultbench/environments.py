"""Deterministic tool simulators for the crud, retrieval, files and scheduling domains.

Calls are checked against the environment's *effective* schemas (which schema
drift may have mutated) before a tool runs. A failing call never touches
``live_state``.
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from typing import Any, Callable

from faultbench.canonical import digest
from faultbench.model import TaskRecord, ToolSchema

ERROR_CODES = (
    "unknown_tool",
    "invalid_arguments",
    "schema_drift",
    "rate_limited",
    "timeout",
    "unauthorized",
    "policy_violation",
    "not_found",
    "conflict",
)


@dataclass(frozen=True)
class ToolCall:
    tool: str
    arguments: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"tool": self.tool, "arguments": self.arguments}


@dataclass(frozen=True)
class FaultContext:
    fault_type: str
    fault_index: int
    trigger: str

    def to_dict(self) -> dict:
        return {"fault_type": self.fault_type, "fault_index": self.fault_index, "trigger": self.trigger}

    @classmethod
    def from_dict(cls, d: dict) -> FaultContext:
        return cls(d["fault_type"], d["fault_index"], d["trigger"])


@dataclass(frozen=True)
class ErrorPayload:
    code: str
    message: str
    unknown_params: tuple[str, ...] = ()
    missing_params: tuple[str, ...] = ()
    retry_after_steps: int | None = None
    fault_context: FaultContext | None = None

    def to_dict(self, *, visible: bool = False) -> dict:
        d: dict[str, Any] = {
            "code": self.code,
            "message": self.message,
            "unknown_params": list(self.unknown_params),
            "missing_params": list(self.missing_params),
        }
        if self.retry_after_steps is not None:
            d["retry_after_steps"] = self.retry_after_steps
        if self.fault_context is not None and not visible:
            d["fault_context"] = self.fault_context.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ErrorPayload:
        fc = d.get("fault_context")
        return cls(
            d["code"],
            d.get("message", ""),
            tuple(d.get("unknown_params", ())),
            tuple(d.get("missing_params", ())),
            d.get("retry_after_steps"),
            FaultContext.from_dict(fc) if fc else None,
        )


@dataclass(frozen=True)
class ToolResult:
    ok: bool
    value: Any = None
    error: ErrorPayload | None = None

    @classmethod
    def success(cls, value: Any) -> ToolResult:
        return cls(True, value, None)

    @classmethod
    def failure(cls, error: ErrorPayload) -> ToolResult:
        return cls(False, None, error)

    def to_dict(self, *, visible: bool = False) -> dict:
        if self.ok:
            return {"ok": True, "value": self.value}
        return {"ok": False, "error": self.error.to_dict(visible=visible)}

    @classmethod
    def from_dict(cls, d: dict) -> ToolResult:
        if d.get("ok"):
            return cls.success(d.get("value"))
        return cls.failure(ErrorPayload.from_dict(d["error"]))


class ToolError(Exception):
    """Raised inside tool implementations; converted to an error result."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code
        self.message = message


# ---------------------------------------------------------------------------
# Domain semantics
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"[a-z0-9]+")


def tokens(text: str) -> set[str]:
    return set(_TOKEN.findall(text.lower()))


def rank_documents(documents: dict, query: str) -> list[str]:
    """Ids with nonzero token overlap, best first, ties by ascending id."""
    q = tokens(query)
    scored = []
    for doc_id, doc in documents.items():
        score = len(q & tokens(doc["title"] + " " + doc["text"]))
        if score > 0:
            scored.append((-score, doc_id))
    return [doc_id for _, doc_id in sorted(scored)]


def minutes(hhmm: str) -> int:
    if not isinstance(hhmm, str) or not re.fullmatch(r"([01]\d|2[0-3]):[0-5]\d", hhmm):
        raise ToolError("invalid_arguments", f"time {hhmm!r} is not HH:MM")
    h, m = hhmm.split(":")
    return int(h) * 60 + int(m)


def compute_conflicts(events: dict) -> list[list[str]]:
    """Overlapping pairs under half-open ``[start, end)`` intervals."""
    spans = sorted((minutes(e["start"]), minutes(e["end"]), eid) for eid, e in events.items())
    pairs = []
    for i, (s1, e1, a) in enumerate(spans):
        for s2, e2, b in spans[i + 1:]:
            if s2 >= e1:
                break
            pairs.append(sorted([a, b]))
    return sorted(pairs)


def _split_path(path: str) -> list[str]:
    parts = [p for p in path.strip("/").split("/") if p]
    return parts


def _file_node(tree: dict, parts: list[str]) -> Any:
    node: Any = tree
    for part in parts:
        if not isinstance(node, dict) or part not in node:
            return None
        node = node[part]
    return node


def _crud(state: dict, tool: str, a: dict) -> Any:
    records = state["records"]
    if tool == "create_record":
        if a["id"] in records:
            raise ToolError("conflict", f"record {a['id']} already exists")
        records[a["id"]] = {"title": a["title"], "fields": copy.deepcopy(a["fields"])}
        return copy.deepcopy(records[a["id"]])
    if tool == "list_records":
        return sorted(records)
    if a["id"] not in records:
        raise ToolError("not_found", f"record {a['id']} not found")
    if tool == "read_record":
        return copy.deepcopy(records[a["id"]])
    if tool == "update_record":
        rec = records[a["id"]]
        rec["fields"].update(copy.deepcopy(a["fields"]))
        if "title" in a:
            rec["title"] = a["title"]
        return copy.deepcopy(rec)
    if tool == "delete_record":
        del records[a["id"]]
        return {"deleted": a["id"]}
    raise ToolError("unknown_tool", tool)


def _retrieval(state: dict, tool: str, a: dict) -> Any:
    docs = state["documents"]
    if tool == "search":
        return rank_documents(docs, a["query"])
    if tool == "fetch_document":
        if a["id"] not in docs:
            raise ToolError("not_found", f"document {a['id']} not found")
        return {"id": a["id"], **docs[a["id"]]}
    if tool == "submit_answer":
        state["answers"].append(a["text"])
        return {"accepted": True, "count": len(state["answers"])}
    raise ToolError("unknown_tool", tool)


def _files(state: dict, tool: str, a: dict) -> Any:
    tree = state["files"]

    def parent_of(parts: list[str], create: bool) -> dict:
        node = tree
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                if not create:
                    raise ToolError("not_found", f"directory {'/'.join(parts[:-1])} not found")
                child = node[part] = {}
            elif not isinstance(child, dict):
                raise ToolError("conflict", f"{part} is a file")
            node = child
        return node

    def prune(parts: list[str]) -> None:
        for depth in range(len(parts) - 1, 0, -1):
            node = _file_node(tree, parts[:depth])
            if node == {}:
                del _file_node(tree, parts[:depth - 1])[parts[depth - 1]]

    def existing_file(path: str) -> tuple[dict, list[str]]:
        parts = _split_path(path)
        node = _file_node(tree, parts) if parts else None
        if not isinstance(node, str):
            raise ToolError("not_found", f"file {path} not found")
        return _file_node(tree, parts[:-1]), parts

    if tool == "create_file":
        parts = _split_path(a["path"])
        if not parts:
            raise ToolError("not_found", "empty path")
        if _file_node(tree, parts) is not None:
            raise ToolError("conflict", f"{a['path']} already exists")
        parent_of(parts, create=True)[parts[-1]] = a["content"]
        return {"path": "/".join(parts), "size": len(a["content"])}
    if tool == "read_file":
        parent, parts = existing_file(a["path"])
        return parent[parts[-1]]
    if tool == "append_file":
        parent, parts = existing_file(a["path"])
        parent[parts[-1]] += a["content"]
        return {"path": "/".join(parts), "size": len(parent[parts[-1]])}
    if tool == "delete_file":
        parent, parts = existing_file(a["path"])
        del parent[parts[-1]]
        prune(parts)
        return {"deleted": "/".join(parts)}
    if tool == "list_dir":
        parts = _split_path(a["path"])
        node = _file_node(tree, parts)
        if not isinstance(node, dict):
            raise ToolError("not_found", f"directory {a['path']} not found")
        return sorted(k + "/" if isinstance(v, dict) else k for k, v in node.items())
    if tool == "move_file":
        src_parent, src = existing_file(a["src"])
        dst = _split_path(a["dst"])
        if not dst:
            raise ToolError("not_found", "empty destination")
        if _file_node(tree, dst) is not None:
            raise ToolError("conflict", f"{a['dst']} already exists")
        content = src_parent.pop(src[-1])
        prune(src)
        parent_of(dst, create=True)[dst[-1]] = content
        return {"moved": "/".join(src), "to": "/".join(dst)}
    raise ToolError("unknown_tool", tool)


def _scheduling(state: dict, tool: str, a: dict) -> Any:
    events = state["events"]

    def commit(new_events: dict) -> None:
        conflicts = compute_conflicts(new_events)
        if conflicts and not state["allow_overlap"]:
            raise ToolError("conflict", f"overlap: {conflicts[0][0]} and {conflicts[0][1]}")
        state["events"] = new_events
        state["conflicts"] = conflicts

    if tool == "list_events":
        return [{"id": eid, **events[eid]} for eid in sorted(events)]
    if tool == "check_conflicts":
        return compute_conflicts(events)
    if tool == "create_event":
        if a["id"] in events:
            raise ToolError("conflict", f"event {a['id']} already exists")
        if minutes(a["start"]) >= minutes(a["end"]):
            raise ToolError("invalid_arguments", "start must precede end")
        new = copy.deepcopy(events)
        new[a["id"]] = {"start": a["start"], "end": a["end"], "title": a["title"]}
        commit(new)
        return {"id": a["id"], **new[a["id"]]}
    if a["id"] not in events:
        raise ToolError("not_found", f"event {a['id']} not found")
    if tool == "update_event":
        new = copy.deepcopy(events)
        ev = new[a["id"]]
        for key in ("start", "end", "title"):
            if key in a:
                ev[key] = a[key]
        if minutes(ev["start"]) >= minutes(ev["end"]):
            raise ToolError("invalid_arguments", "start must precede end")
        commit(new)
        return {"id": a["id"], **ev}
    if tool == "cancel_event":
        new = copy.deepcopy(events)
        del new[a["id"]]
        commit(new)
        return {"cancelled": a["id"]}
    raise ToolError("unknown_tool", tool)


_DOMAIN_IMPL: dict[str, Callable[[dict, str, dict], Any]] = {
    "crud": _crud,
    "retrieval": _retrieval,
    "files": _files,
    "scheduling": _scheduling,
}


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------


class Environment:
    """Live state for one episode.

    ``tool_impl`` maps effective tool names back to the canonical tool whose
    semantics run, so a drift that renames a tool keeps its behaviour.
    """

    def __init__(self, task: TaskRecord) -> None:
        self.domain = task.domain
        self.live_state: dict = copy.deepcopy(task.initial_state)
        self.effective_schemas: list[ToolSchema] = list(task.tool_schemas)
        self.tool_impl: dict[str, str] = {s.name: s.name for s in task.tool_schemas}
        self.param_impl: dict[str, dict[str, str]] = {
            s.name: {p.name: p.name for p in s.params} for s in task.tool_schemas
        }
        self.call_log: list[tuple[ToolCall, ToolResult]] = []

    def schema(self, name: str) -> ToolSchema | None:
        for s in self.effective_schemas:
            if s.name == name:
                return s
        return None

    def state_digest(self) -> str:
        return digest(self.live_state)

    def validate_call(self, call: ToolCall) -> ErrorPayload | None:
        return validate_call(self, call)

    def execute(self, call: ToolCall) -> ToolResult:
        return execute(self, call)


def make_environment(task: TaskRecord) -> Environment:
    return Environment(task)


def validate_call(env: Environment, call: ToolCall) -> ErrorPayload | None:
    """None when the call matches the effective schema, else the error payload."""
    schema = env.schema(call.tool)
    if schema is None:
        return ErrorPayload("unknown_tool", f"no tool named {call.tool!r}")
    if not isinstance(call.arguments, dict):
        return ErrorPayload("invalid_arguments", "arguments must be a map")
    declared = schema.param_names
    unknown = tuple(sorted(k for k in call.arguments if k not in declared))
    missing = tuple(p.name for p in schema.params if p.required and p.name not in call.arguments)
    if unknown or missing:
        parts = []
        if missing:
            parts.append("missing " + ", ".join(missing))
        if unknown:
            parts.append("unexpected " + ", ".join(unknown))
        return ErrorPayload("invalid_arguments", f"{call.tool}: " + "; ".join(parts),
                            unknown_params=unknown, missing_params=missing)
    for p in schema.params:
        if p.name in call.arguments and not p.accepts(call.arguments[p.name]):
            return ErrorPayload("invalid_arguments",
                                f"{call.tool}: {p.name} must be a {p.value_kind}"
                                + (" from the allowed set" if p.allowed_values else ""))
    return None


def execute(env: Environment, call: ToolCall) -> ToolResult:
    """Run a validated call. State only changes when the tool succeeds."""
    canonical_tool = env.tool_impl[call.tool]
    renames = env.param_impl[canonical_tool]
    args = {renames.get(k, k): v for k, v in call.arguments.items()}
    scratch = copy.deepcopy(env.live_state)
    try:
        value = _DOMAIN_IMPL[env.domain](scratch, canonical_tool, args)
    except ToolError as exc:
        result = ToolResult.failure(ErrorPayload(exc.code, exc.message))
    else:
        env.live_state = scratch
        result = ToolResult.success(value)
    env.call_log.append((call, result))
    return result
