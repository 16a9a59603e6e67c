"""Benchmark data types, their dict/bytes round trip, and structural validation.

Every type here is a frozen dataclass with ``to_dict`` / ``from_dict``. The
dict form is what lands in ``.tasks.jsonl`` files via
:func:`faultbench.canonical.canonical_bytes`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Any, Union

from faultbench.canonical import canonical_lines, parse_lines

BENCHMARK_VERSION = "1.0"

DOMAINS = ("crud", "retrieval", "files", "scheduling")
VALUE_KINDS = ("string", "integer", "number", "boolean", "list", "map")
FAULT_TYPES = ("schema_drift", "rate_limit", "timeout", "auth_failure", "adversarial_rewrite")
REWRITE_STYLES = ("misleading_param", "wrong_tool_hint", "vague")

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _kind_matches(kind: str, value: Any) -> bool:
    if kind == "string":
        return isinstance(value, str)
    if kind == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "boolean":
        return isinstance(value, bool)
    if kind == "list":
        return isinstance(value, list)
    if kind == "map":
        return isinstance(value, dict)
    return False


# ---------------------------------------------------------------------------
# Tool schemas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamSpec:
    name: str
    value_kind: str
    required: bool = True
    allowed_values: tuple[Any, ...] | None = None

    def accepts(self, value: Any) -> bool:
        if not _kind_matches(self.value_kind, value):
            return False
        return self.allowed_values is None or value in self.allowed_values

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name, "kind": self.value_kind, "required": self.required}
        if self.allowed_values is not None:
            d["allowed_values"] = list(self.allowed_values)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ParamSpec:
        allowed = d.get("allowed_values")
        return cls(d["name"], d["kind"], d.get("required", True),
                   tuple(allowed) if allowed is not None else None)


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    params: tuple[ParamSpec, ...] = ()

    def param(self, name: str) -> ParamSpec | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    @property
    def param_names(self) -> list[str]:
        return [p.name for p in self.params]

    def to_dict(self) -> dict:
        return {"name": self.name, "description": self.description,
                "params": [p.to_dict() for p in self.params]}

    @classmethod
    def from_dict(cls, d: dict) -> ToolSchema:
        return cls(d["name"], d.get("description", ""),
                   tuple(ParamSpec.from_dict(p) for p in d.get("params", [])))


def _tool(name: str, description: str, *params: tuple[str, str, bool]) -> ToolSchema:
    return ToolSchema(name, description, tuple(ParamSpec(n, k, r) for n, k, r in params))


DOMAIN_TOOLS: dict[str, tuple[ToolSchema, ...]] = {
    "crud": (
        _tool("create_record", "Create a record with a title and a field map.",
              ("id", "string", True), ("title", "string", True), ("fields", "map", True)),
        _tool("read_record", "Return one record.", ("id", "string", True)),
        _tool("update_record", "Merge fields into an existing record.",
              ("id", "string", True), ("fields", "map", True), ("title", "string", False)),
        _tool("delete_record", "Delete a record.", ("id", "string", True)),
        _tool("list_records", "List record ids."),
    ),
    "retrieval": (
        _tool("search", "Rank documents by token overlap with the query.", ("query", "string", True)),
        _tool("fetch_document", "Return one document.", ("id", "string", True)),
        _tool("submit_answer", "Submit a final answer.", ("text", "string", True)),
    ),
    "files": (
        _tool("create_file", "Create a file.", ("path", "string", True), ("content", "string", True)),
        _tool("read_file", "Read a file.", ("path", "string", True)),
        _tool("append_file", "Append to a file.", ("path", "string", True), ("content", "string", True)),
        _tool("delete_file", "Delete a file.", ("path", "string", True)),
        _tool("list_dir", "List a directory.", ("path", "string", True)),
        _tool("move_file", "Move a file.", ("src", "string", True), ("dst", "string", True)),
    ),
    "scheduling": (
        _tool("create_event", "Create an event; times are HH:MM.",
              ("id", "string", True), ("start", "string", True), ("end", "string", True),
              ("title", "string", True)),
        _tool("update_event", "Change an event's time or title.",
              ("id", "string", True), ("start", "string", False), ("end", "string", False),
              ("title", "string", False)),
        _tool("cancel_event", "Cancel an event.", ("id", "string", True)),
        _tool("list_events", "List events in id order."),
        _tool("check_conflicts", "Report overlapping event pairs."),
    ),
}


# ---------------------------------------------------------------------------
# Budgets, criteria, policy rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Budget:
    max_steps: int
    max_tool_calls: int
    max_retries: int
    per_call_timeout_ms: int = 1000

    def to_dict(self) -> dict:
        return {"max_steps": self.max_steps, "max_tool_calls": self.max_tool_calls,
                "max_retries": self.max_retries, "per_call_timeout_ms": self.per_call_timeout_ms}

    @classmethod
    def from_dict(cls, d: dict) -> Budget:
        return cls(d["max_steps"], d["max_tool_calls"], d["max_retries"], d["per_call_timeout_ms"])


@dataclass(frozen=True)
class StateEquals:
    path: str
    value: Any
    kind = "state_equals"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "path": self.path, "value": self.value}


@dataclass(frozen=True)
class StateExists:
    path: str
    kind = "state_exists"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "path": self.path}


@dataclass(frozen=True)
class StateContains:
    path: str
    member: Any
    kind = "state_contains"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "path": self.path, "member": self.member}


@dataclass(frozen=True)
class StateKeyValue:
    path: str
    key: str
    value: Any
    kind = "state_key_value"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "path": self.path, "key": self.key, "value": self.value}


@dataclass(frozen=True)
class MinToolCalls:
    n: int
    kind = "min_tool_calls"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n}


@dataclass(frozen=True)
class MinSuccessfulToolCalls:
    n: int
    kind = "min_successful_tool_calls"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n}


Criterion = Union[StateEquals, StateExists, StateContains, StateKeyValue,
                  MinToolCalls, MinSuccessfulToolCalls]
STATE_CRITERIA = (StateEquals, StateExists, StateContains, StateKeyValue)
TRANSCRIPT_CRITERIA = (MinToolCalls, MinSuccessfulToolCalls)


class MalformedRecord(ValueError):
    """Structural parse failure (missing keys, unknown tags)."""


def criterion_from_dict(d: dict) -> Criterion:
    kind = d.get("kind")
    try:
        if kind == "state_equals":
            return StateEquals(d["path"], d["value"])
        if kind == "state_exists":
            return StateExists(d["path"])
        if kind == "state_contains":
            return StateContains(d["path"], d["member"])
        if kind == "state_key_value":
            return StateKeyValue(d["path"], d["key"], d["value"])
        if kind == "min_tool_calls":
            return MinToolCalls(d["n"])
        if kind == "min_successful_tool_calls":
            return MinSuccessfulToolCalls(d["n"])
    except KeyError as exc:
        raise MalformedRecord(f"criterion {kind!r} missing {exc}") from None
    raise MalformedRecord(f"unknown criterion kind {kind!r}")


@dataclass(frozen=True)
class ForbiddenTool:
    tool: str
    kind = "forbidden_tool"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "tool": self.tool}


@dataclass(frozen=True)
class MaxCallsPerTool:
    tool: str
    limit: int
    kind = "max_calls_per_tool"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "tool": self.tool, "limit": self.limit}


@dataclass(frozen=True)
class RequireSuccessBefore:
    prerequisite: str
    gated: str
    kind = "require_success_before"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "prerequisite": self.prerequisite, "gated": self.gated}


PolicyRule = Union[ForbiddenTool, MaxCallsPerTool, RequireSuccessBefore]


def policy_rule_from_dict(d: dict) -> PolicyRule:
    kind = d.get("kind")
    try:
        if kind == "forbidden_tool":
            return ForbiddenTool(d["tool"])
        if kind == "max_calls_per_tool":
            return MaxCallsPerTool(d["tool"], d["limit"])
        if kind == "require_success_before":
            return RequireSuccessBefore(d["prerequisite"], d["gated"])
    except KeyError as exc:
        raise MalformedRecord(f"policy rule {kind!r} missing {exc}") from None
    raise MalformedRecord(f"unknown policy rule kind {kind!r}")


def policy_rule_tools(rule: PolicyRule) -> list[str]:
    if isinstance(rule, RequireSuccessBefore):
        return [rule.prerequisite, rule.gated]
    return [rule.tool]


# ---------------------------------------------------------------------------
# Faults
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ToolName:
    tool: str
    kind = "tool_name"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "tool": self.tool}

    def describe(self) -> str:
        return f"tool_name({self.tool})"


@dataclass(frozen=True)
class NthCall:
    n: int
    kind = "nth_call"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n}

    def describe(self) -> str:
        return f"nth_call({self.n})"


@dataclass(frozen=True)
class ArgPattern:
    tool: str
    param: str
    substring: str
    kind = "arg_pattern"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "tool": self.tool, "param": self.param, "substring": self.substring}

    def describe(self) -> str:
        return f"arg_pattern({self.tool}.{self.param}~{self.substring!r})"


@dataclass(frozen=True)
class Probabilistic:
    p: float
    kind = "probabilistic"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p": self.p}

    def describe(self) -> str:
        return f"probabilistic({self.p!r})"


Trigger = Union[ToolName, NthCall, ArgPattern, Probabilistic]


def trigger_from_dict(d: dict) -> Trigger:
    kind = d.get("kind")
    try:
        if kind == "tool_name":
            return ToolName(d["tool"])
        if kind == "nth_call":
            return NthCall(d["n"])
        if kind == "arg_pattern":
            return ArgPattern(d["tool"], d["param"], d["substring"])
        if kind == "probabilistic":
            return Probabilistic(d["p"])
    except KeyError as exc:
        raise MalformedRecord(f"trigger {kind!r} missing {exc}") from None
    raise MalformedRecord(f"unknown trigger kind {kind!r}")


def trigger_tool(trigger: Trigger) -> str | None:
    if isinstance(trigger, (ToolName, ArgPattern)):
        return trigger.tool
    return None


_FAULT_FIELDS = {
    "schema_drift": ("param_rename_map", "tool_rename", "target_tool"),
    "rate_limit": ("retry_after_steps", "recover_after_failures"),
    "timeout": ("fail_count_before_recovery",),
    "auth_failure": ("persistent",),
    "adversarial_rewrite": ("style",),
}


@dataclass(frozen=True)
class FaultSpec:
    """One declarative fault. Only the fields of its own family are set.

    ``target_tool`` names the tool whose params a drift renames when the
    trigger itself does not name one (``NthCall`` / ``Probabilistic``).
    """

    fault_type: str
    trigger: Trigger
    param_rename_map: dict[str, str] | None = None
    tool_rename: dict[str, str] | None = None
    target_tool: str | None = None
    retry_after_steps: int | None = None
    recover_after_failures: int | None = None
    fail_count_before_recovery: int | None = None
    persistent: bool | None = None
    style: str | None = None

    @property
    def drift_tool(self) -> str | None:
        return self.target_tool or trigger_tool(self.trigger)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"fault_type": self.fault_type, "trigger": self.trigger.to_dict()}
        for name in _FAULT_FIELDS.get(self.fault_type, ()):
            value = getattr(self, name)
            if value is not None:
                d[name] = value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> FaultSpec:
        if "fault_type" not in d or "trigger" not in d:
            raise MalformedRecord("fault spec needs fault_type and trigger")
        extra = {k: d[k] for k in _FAULT_FIELDS.get(d["fault_type"], ()) if k in d}
        return cls(d["fault_type"], trigger_from_dict(d["trigger"]), **extra)


# ---------------------------------------------------------------------------
# Task record
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaskRecord:
    task_id: str
    domain: str
    instruction: str
    tool_schemas: tuple[ToolSchema, ...]
    initial_state: dict
    goal_annotation: dict
    success_criteria: tuple[Criterion, ...]
    fault_plan: tuple[FaultSpec, ...]
    policy_rules: tuple[PolicyRule, ...]
    budgets: Budget
    seed: int
    version: str = BENCHMARK_VERSION

    def schema(self, name: str) -> ToolSchema | None:
        for s in self.tool_schemas:
            if s.name == name:
                return s
        return None

    @property
    def fault_family(self) -> str:
        """The single family a task is sliced under in reports."""
        types = [f.fault_type for f in self.fault_plan]
        if "adversarial_rewrite" in types:
            return "adversarial_rewrite"
        return types[0] if types else "none"

    def with_id(self, task_id: str) -> TaskRecord:
        return replace(self, task_id=task_id)

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "domain": self.domain,
            "instruction": self.instruction,
            "tool_schemas": [s.to_dict() for s in self.tool_schemas],
            "initial_state": self.initial_state,
            "goal_annotation": self.goal_annotation,
            "success_criteria": [c.to_dict() for c in self.success_criteria],
            "fault_plan": [f.to_dict() for f in self.fault_plan],
            "policy_rules": [r.to_dict() for r in self.policy_rules],
            "budgets": self.budgets.to_dict(),
            "seed": self.seed,
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TaskRecord:
        try:
            return cls(
                task_id=d["task_id"],
                domain=d["domain"],
                instruction=d["instruction"],
                tool_schemas=tuple(ToolSchema.from_dict(s) for s in d["tool_schemas"]),
                initial_state=d["initial_state"],
                goal_annotation=d.get("goal_annotation", {}),
                success_criteria=tuple(criterion_from_dict(c) for c in d["success_criteria"]),
                fault_plan=tuple(FaultSpec.from_dict(f) for f in d.get("fault_plan", [])),
                policy_rules=tuple(policy_rule_from_dict(r) for r in d.get("policy_rules", [])),
                budgets=Budget.from_dict(d["budgets"]),
                seed=d["seed"],
                version=d.get("version", BENCHMARK_VERSION),
            )
        except KeyError as exc:
            raise MalformedRecord(f"task record missing {exc}") from None


def dump_tasks(tasks: list[TaskRecord]) -> bytes:
    return canonical_lines(tasks)


def load_tasks(data: bytes | str) -> list[TaskRecord]:
    return [TaskRecord.from_dict(d) for d in parse_lines(data)]


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationError:
    """One broken rule. Not an exception: ``validate_task`` returns a list."""

    rule: str
    field: str
    detail: str = field(default="", compare=False)

    def __str__(self) -> str:
        return f"{self.rule} at {self.field}: {self.detail}"


# rule names
INSTRUCTION_PRESENCE = "instruction_presence"
DOMAIN_STATE = "domain_state"
CRITERIA_STRUCTURE = "criteria_structure"
FAULT_REFERENCE = "fault_reference"
FAULT_PARAMS = "fault_params"
POLICY_REFERENCE = "policy_reference"
SCHEMA_STRUCTURE = "schema_structure"
BUDGET = "budget"
RECORD_FIELD = "record_field"


def _check_schemas(task: TaskRecord, errors: list[ValidationError]) -> None:
    seen: set[str] = set()
    allowed_tools = {s.name for s in DOMAIN_TOOLS.get(task.domain, ())}
    for i, schema in enumerate(task.tool_schemas):
        where = f"tool_schemas[{i}]"
        if not isinstance(schema.name, str) or not _IDENT.match(schema.name):
            errors.append(ValidationError(SCHEMA_STRUCTURE, where, f"bad tool name {schema.name!r}"))
        if schema.name in seen:
            errors.append(ValidationError(SCHEMA_STRUCTURE, where, f"duplicate tool {schema.name!r}"))
        seen.add(schema.name)
        if allowed_tools and schema.name not in allowed_tools:
            errors.append(ValidationError(DOMAIN_STATE, where,
                                          f"tool {schema.name!r} is not a {task.domain} tool"))
        names: set[str] = set()
        for j, p in enumerate(schema.params):
            pw = f"{where}.params[{j}]"
            if p.name in names:
                errors.append(ValidationError(SCHEMA_STRUCTURE, pw, f"duplicate param {p.name!r}"))
            names.add(p.name)
            if p.value_kind not in VALUE_KINDS:
                errors.append(ValidationError(SCHEMA_STRUCTURE, pw, f"bad value kind {p.value_kind!r}"))
            if p.allowed_values is not None:
                if not p.allowed_values:
                    errors.append(ValidationError(SCHEMA_STRUCTURE, pw, "empty allowed_values"))
                elif not all(_kind_matches(p.value_kind, v) for v in p.allowed_values):
                    errors.append(ValidationError(SCHEMA_STRUCTURE, pw, "allowed_values kind mismatch"))


def _is_hhmm(value: Any) -> bool:
    return isinstance(value, str) and re.fullmatch(r"([01]\d|2[0-3]):[0-5]\d", value) is not None


def _check_file_tree(node: Any) -> bool:
    if not isinstance(node, dict):
        return False
    for name, child in node.items():
        if not name or "/" in name:
            return False
        if isinstance(child, dict):
            if not _check_file_tree(child):
                return False
        elif not isinstance(child, str):
            return False
    return True


def state_shape_problem(domain: str, state: Any) -> str | None:
    """Describe why ``state`` is not a well-formed ``domain`` state, or None."""
    if not isinstance(state, dict):
        return "state must be a map"
    if domain == "crud":
        if set(state) != {"records"} or not isinstance(state["records"], dict):
            return "crud state is {records: {...}}"
        for rid, rec in state["records"].items():
            if not (isinstance(rec, dict) and set(rec) == {"title", "fields"}
                    and isinstance(rec["title"], str) and isinstance(rec["fields"], dict)):
                return f"record {rid!r} must be {{title, fields}}"
    elif domain == "retrieval":
        if set(state) != {"documents", "answers"}:
            return "retrieval state is {documents, answers}"
        if not isinstance(state["documents"], dict) or not isinstance(state["answers"], list):
            return "documents must be a map and answers a list"
        for did, doc in state["documents"].items():
            if not (isinstance(doc, dict) and set(doc) == {"title", "text"}
                    and all(isinstance(v, str) for v in doc.values())):
                return f"document {did!r} must be {{title, text}}"
    elif domain == "files":
        if set(state) != {"files"} or not _check_file_tree(state["files"]):
            return "files state is {files: tree of name -> content|dir}"
    elif domain == "scheduling":
        if set(state) != {"events", "conflicts", "allow_overlap"}:
            return "scheduling state is {events, conflicts, allow_overlap}"
        if not isinstance(state["allow_overlap"], bool) or not isinstance(state["events"], dict):
            return "bad allow_overlap or events"
        for eid, ev in state["events"].items():
            if not (isinstance(ev, dict) and set(ev) == {"start", "end", "title"}
                    and _is_hhmm(ev["start"]) and _is_hhmm(ev["end"]) and ev["start"] < ev["end"]
                    and isinstance(ev["title"], str)):
                return f"event {eid!r} malformed"
        # imported lazily: environments depends on this module
        from faultbench.environments import compute_conflicts

        if state["conflicts"] != compute_conflicts(state["events"]):
            return "conflict flags disagree with events"
    else:
        return f"unknown domain {domain!r}"
    return None


def _check_criteria(task: TaskRecord, errors: list[ValidationError]) -> None:
    if not task.success_criteria:
        errors.append(ValidationError(CRITERIA_STRUCTURE, "success_criteria", "empty"))
    for i, c in enumerate(task.success_criteria):
        where = f"success_criteria[{i}]"
        if isinstance(c, STATE_CRITERIA):
            if not isinstance(c.path, str) or not c.path or any(not p for p in c.path.split("/")):
                errors.append(ValidationError(CRITERIA_STRUCTURE, where, f"bad path {c.path!r}"))
            if isinstance(c, StateKeyValue) and not isinstance(c.key, str):
                errors.append(ValidationError(CRITERIA_STRUCTURE, where, "key must be text"))
        elif isinstance(c, TRANSCRIPT_CRITERIA):
            if not isinstance(c.n, int) or isinstance(c.n, bool) or c.n < 1:
                errors.append(ValidationError(CRITERIA_STRUCTURE, where, f"n must be >= 1, got {c.n!r}"))
        else:
            errors.append(ValidationError(CRITERIA_STRUCTURE, where, "unknown criterion"))


def _check_trigger(trigger: Trigger, tools: dict[str, ToolSchema], where: str,
                   errors: list[ValidationError]) -> None:
    if isinstance(trigger, ToolName):
        if trigger.tool not in tools:
            errors.append(ValidationError(FAULT_REFERENCE, where, f"unknown tool {trigger.tool!r}"))
    elif isinstance(trigger, NthCall):
        if not isinstance(trigger.n, int) or trigger.n < 1:
            errors.append(ValidationError(FAULT_PARAMS, where, "nth_call n must be >= 1"))
    elif isinstance(trigger, ArgPattern):
        schema = tools.get(trigger.tool)
        if schema is None:
            errors.append(ValidationError(FAULT_REFERENCE, where, f"unknown tool {trigger.tool!r}"))
        elif schema.param(trigger.param) is None:
            errors.append(ValidationError(FAULT_REFERENCE, where,
                                          f"{trigger.tool} has no param {trigger.param!r}"))
    elif isinstance(trigger, Probabilistic):
        if not isinstance(trigger.p, (int, float)) or not 0 < trigger.p <= 1:
            errors.append(ValidationError(FAULT_PARAMS, where, "probability must be in (0, 1]"))


def _nonneg(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value >= 0


def _check_fault(spec: FaultSpec, tools: dict[str, ToolSchema], where: str,
                 errors: list[ValidationError]) -> None:
    if spec.fault_type not in FAULT_TYPES:
        errors.append(ValidationError(FAULT_PARAMS, where, f"unknown fault type {spec.fault_type!r}"))
        return
    _check_trigger(spec.trigger, tools, f"{where}.trigger", errors)
    ft = spec.fault_type
    if ft == "schema_drift":
        renames = spec.param_rename_map or {}
        tool_renames = spec.tool_rename or {}
        if not renames and not tool_renames:
            errors.append(ValidationError(FAULT_PARAMS, where, "drift renames nothing"))
        if renames:
            target = spec.drift_tool
            schema = tools.get(target) if target else None
            if schema is None:
                errors.append(ValidationError(FAULT_REFERENCE, where,
                                              f"drift target tool {target!r} not available"))
            else:
                for old in renames:
                    if schema.param(old) is None:
                        errors.append(ValidationError(FAULT_REFERENCE, where,
                                                      f"{target} has no param {old!r}"))
                if len(set(renames.values())) != len(renames):
                    errors.append(ValidationError(FAULT_PARAMS, where, "param renames not injective"))
                kept = set(schema.param_names) - set(renames)
                if kept & set(renames.values()):
                    errors.append(ValidationError(FAULT_PARAMS, where, "rename collides with a kept param"))
        for old, new in tool_renames.items():
            if old not in tools:
                errors.append(ValidationError(FAULT_REFERENCE, where, f"renamed tool {old!r} absent"))
            if new in tools:
                errors.append(ValidationError(FAULT_PARAMS, where, f"tool rename target {new!r} exists"))
        if len(set(tool_renames.values())) != len(tool_renames):
            errors.append(ValidationError(FAULT_PARAMS, where, "tool renames not injective"))
    elif ft == "rate_limit":
        if not (_nonneg(spec.retry_after_steps) and spec.retry_after_steps >= 1):
            errors.append(ValidationError(FAULT_PARAMS, where, "retry_after_steps must be >= 1"))
        if not _nonneg(spec.recover_after_failures):
            errors.append(ValidationError(FAULT_PARAMS, where, "recover_after_failures must be >= 0"))
    elif ft == "timeout":
        if not _nonneg(spec.fail_count_before_recovery):
            errors.append(ValidationError(FAULT_PARAMS, where, "fail_count_before_recovery must be >= 0"))
    elif ft == "auth_failure":
        if spec.persistent is not True:
            errors.append(ValidationError(FAULT_PARAMS, where, "auth failures are persistent"))
    elif ft == "adversarial_rewrite":
        if spec.style not in REWRITE_STYLES:
            errors.append(ValidationError(FAULT_PARAMS, where, f"unknown rewrite style {spec.style!r}"))


def _check_policy(rule: PolicyRule, tools: dict[str, ToolSchema], where: str,
                  errors: list[ValidationError]) -> None:
    for name in policy_rule_tools(rule):
        if name not in tools:
            errors.append(ValidationError(POLICY_REFERENCE, where, f"unknown tool {name!r}"))
    if isinstance(rule, MaxCallsPerTool) and (not isinstance(rule.limit, int) or rule.limit < 1):
        errors.append(ValidationError(POLICY_REFERENCE, where, "limit must be >= 1"))
    if isinstance(rule, RequireSuccessBefore) and rule.prerequisite == rule.gated:
        errors.append(ValidationError(POLICY_REFERENCE, where, "prerequisite equals gated tool"))


def validate_task(task: TaskRecord) -> list[ValidationError]:
    """Return every broken rule; an empty list means the record is usable."""
    errors: list[ValidationError] = []
    if not isinstance(task.task_id, str) or not task.task_id:
        errors.append(ValidationError(RECORD_FIELD, "task_id", "empty"))
    if task.domain not in DOMAINS:
        errors.append(ValidationError(DOMAIN_STATE, "domain", f"unknown domain {task.domain!r}"))
    if not isinstance(task.instruction, str) or not task.instruction.strip():
        errors.append(ValidationError(INSTRUCTION_PRESENCE, "instruction", "blank instruction"))
    if not isinstance(task.seed, int) or not 0 <= task.seed < 2**64:
        errors.append(ValidationError(RECORD_FIELD, "seed", "not an unsigned 64-bit integer"))
    _check_schemas(task, errors)
    if task.domain in DOMAINS:
        problem = state_shape_problem(task.domain, task.initial_state)
        if problem:
            errors.append(ValidationError(DOMAIN_STATE, "initial_state", problem))
    _check_criteria(task, errors)
    b = task.budgets
    if not (b.max_steps >= 1 and b.max_tool_calls >= 1 and b.max_retries >= 0
            and b.per_call_timeout_ms >= 1):
        errors.append(ValidationError(BUDGET, "budgets", "budget values out of range"))
    if b.max_tool_calls > b.max_steps:
        errors.append(ValidationError(BUDGET, "budgets", "max_tool_calls exceeds max_steps"))
    tools = {s.name: s for s in task.tool_schemas}
    for i, spec in enumerate(task.fault_plan):
        _check_fault(spec, tools, f"fault_plan[{i}]", errors)
    for i, rule in enumerate(task.policy_rules):
        _check_policy(rule, tools, f"policy_rules[{i}]", errors)
    return errors
