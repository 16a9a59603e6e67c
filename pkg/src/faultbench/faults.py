"""Replays a task's fault plan against an episode's tool calls.

Families are evaluated in a fixed order for every call:

1. schema drift (mutates effective schemas; validation reports the error)
2. auth failure
3. rate limit
4. timeout
5. adversarial rewrite (post-error transformation of the agent-visible payload)

Within a family, specs are scanned in declaration order and only the first
spec whose trigger fires decides the outcome. At most one of families 2-4
injects an error per call.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from faultbench.environments import Environment, ErrorPayload, FaultContext, ToolCall
from faultbench.model import (
    ArgPattern,
    FaultSpec,
    NthCall,
    Probabilistic,
    TaskRecord,
    ToolName,
    ToolSchema,
)
from faultbench.rng import SeededStream

GATE_FAMILIES = ("auth_failure", "rate_limit", "timeout")


@dataclass
class _SpecState:
    evaluations: int = 0
    injected: int = 0
    cooldown_until: int | None = None
    applied: bool = False


def render_argument(value: object) -> str:
    if isinstance(value, str):
        return value
    from faultbench.canonical import canonical_bytes

    return canonical_bytes(value).decode("utf-8")


def describe_spec(spec: FaultSpec) -> str:
    return spec.trigger.describe()


class FaultRuntime:
    """Per-episode fault state: counters, cooldowns and probabilistic streams."""

    def __init__(self, task: TaskRecord) -> None:
        self.task = task
        self.plan = task.fault_plan
        self.states = [_SpecState() for _ in self.plan]
        self.streams = [
            SeededStream(task.seed, f"fault/{task.task_id}/{i}") for i in range(len(self.plan))
        ]
        # drift index per effective tool name; used to attribute validation errors
        self.drifted_tools: dict[str, int] = {}

    # -- triggers -----------------------------------------------------------

    def _fires(self, index: int, call: ToolCall, call_index: int) -> bool:
        trigger = self.plan[index].trigger
        self.states[index].evaluations += 1
        if isinstance(trigger, ToolName):
            return call.tool == trigger.tool
        if isinstance(trigger, NthCall):
            return call_index == trigger.n
        if isinstance(trigger, ArgPattern):
            if call.tool != trigger.tool or not isinstance(call.arguments, dict):
                return False
            if trigger.param not in call.arguments:
                return False
            return trigger.substring in render_argument(call.arguments[trigger.param])
        if isinstance(trigger, Probabilistic):
            return self.streams[index].next_unit() < trigger.p
        return False

    def _context(self, index: int) -> FaultContext:
        spec = self.plan[index]
        return FaultContext(spec.fault_type, index, describe_spec(spec))

    # -- family 1: drift ----------------------------------------------------

    def start(self, env: Environment) -> None:
        """Apply interface drift that is static for the whole episode."""
        for i, spec in enumerate(self.plan):
            if spec.fault_type == "schema_drift" and isinstance(spec.trigger, ToolName):
                self._apply_drift(i, env)

    def _apply_drift(self, index: int, env: Environment) -> None:
        state = self.states[index]
        if state.applied:
            return
        state.applied = True
        apply_drift(self.plan[index], env)
        spec = self.plan[index]
        target = spec.drift_tool
        if spec.param_rename_map and target:
            new_name = (spec.tool_rename or {}).get(target, target)
            self.drifted_tools.setdefault(new_name, index)
        for old in spec.tool_rename or {}:
            self.drifted_tools.setdefault(old, index)

    def drift_before_validation(self, env: Environment, call: ToolCall, call_index: int) -> None:
        for i, spec in enumerate(self.plan):
            if spec.fault_type != "schema_drift" or isinstance(spec.trigger, ToolName):
                continue
            if self.states[i].applied:
                continue
            if self._fires(i, call, call_index):
                self._apply_drift(i, env)

    def attribute_validation_error(self, call: ToolCall, error: ErrorPayload) -> ErrorPayload:
        """Attach drift context to validation errors caused by a drifted interface."""
        index = self.drifted_tools.get(call.tool)
        if index is None:
            return error
        spec = self.plan[index]
        if error.code == "unknown_tool":
            if call.tool not in (spec.tool_rename or {}):
                return error
        else:
            renames = spec.param_rename_map or {}
            if not (set(error.unknown_params) & set(renames)
                    or set(error.missing_params) & set(renames.values())):
                return error
        return replace(error, fault_context=self._context(index))

    # -- families 2-4 -------------------------------------------------------

    def intercept(self, env: Environment, call: ToolCall, call_index: int) -> ErrorPayload | None:
        """Return the injected error for this call, or None to let it through."""
        for family in GATE_FAMILIES:
            for i, spec in enumerate(self.plan):
                if spec.fault_type != family:
                    continue
                if not self._fires(i, call, call_index):
                    continue
                error = self._behave(i, call_index)
                if error is not None:
                    return error
                break
        return None

    def _behave(self, index: int, call_index: int) -> ErrorPayload | None:
        spec = self.plan[index]
        state = self.states[index]
        ctx = self._context(index)
        if spec.fault_type == "auth_failure":
            state.injected += 1
            return ErrorPayload("unauthorized", "caller is not authorized for this operation",
                                fault_context=ctx)
        if spec.fault_type == "rate_limit":
            limit = spec.recover_after_failures or 0
            if limit and state.injected >= limit:
                return None
            if state.cooldown_until is not None and call_index >= state.cooldown_until:
                state.cooldown_until = None
                return None
            if state.cooldown_until is None:
                state.cooldown_until = call_index + spec.retry_after_steps
            state.injected += 1
            return ErrorPayload("rate_limited", "rate limit exceeded",
                                retry_after_steps=state.cooldown_until - call_index,
                                fault_context=ctx)
        if spec.fault_type == "timeout":
            limit = spec.fail_count_before_recovery or 0
            if limit and state.injected >= limit:
                return None
            state.injected += 1
            return ErrorPayload("timeout", "the tool did not respond in time", fault_context=ctx)
        return None

    # -- family 5 -----------------------------------------------------------

    def rewrite_error(self, env: Environment, call: ToolCall, payload: ErrorPayload,
                      call_index: int) -> tuple[ErrorPayload, int | None]:
        """Agent-visible version of ``payload`` and the index of the rewriting spec."""
        for i, spec in enumerate(self.plan):
            if spec.fault_type != "adversarial_rewrite":
                continue
            if not self._fires(i, call, call_index):
                continue
            self.states[i].injected += 1
            return rewrite_payload(spec.style, payload, env, call, self.task.tool_schemas), i
        return payload, None


def apply_drift(spec: FaultSpec, env: Environment) -> list[ToolSchema]:
    """Rename params and/or tools in ``env.effective_schemas``.

    Applying the same spec twice is a no-op: renamed names are no longer
    present to be renamed again.
    """
    renames = spec.param_rename_map or {}
    tool_renames = spec.tool_rename or {}
    target = spec.drift_tool
    out = []
    for schema in env.effective_schemas:
        canonical = env.tool_impl.get(schema.name, schema.name)
        if renames and target is not None and (schema.name == target or canonical == target):
            params = tuple(replace(p, name=renames.get(p.name, p.name)) for p in schema.params)
            impl = env.param_impl[canonical]
            for old, new in renames.items():
                if old in impl:
                    impl[new] = impl.pop(old)
            schema = replace(schema, params=params)
        if schema.name in tool_renames:
            new_name = tool_renames[schema.name]
            env.tool_impl[new_name] = env.tool_impl.pop(schema.name)
            schema = replace(schema, name=new_name)
        out.append(schema)
    env.effective_schemas = out
    return out


def _cyclic_successor(name: str, *lists: list[str]) -> str:
    for names in lists:
        if name in names:
            return names[(names.index(name) + 1) % len(names)]
    for names in lists:
        if names:
            return names[0]
    return name


def rewrite_payload(style: str | None, payload: ErrorPayload, env: Environment, call: ToolCall,
                    original_schemas: tuple[ToolSchema, ...]) -> ErrorPayload:
    if style == "vague":
        return replace(payload, message="request failed", unknown_params=(), missing_params=(),
                       retry_after_steps=None)
    if style == "misleading_param":
        effective = env.schema(call.tool)
        original = next((s for s in original_schemas if s.name == call.tool), None)
        eff_names = effective.param_names if effective else []
        orig_names = original.param_names if original else []
        return replace(
            payload,
            unknown_params=tuple(_cyclic_successor(n, orig_names, eff_names)
                                 for n in payload.unknown_params),
            missing_params=tuple(_cyclic_successor(n, eff_names, orig_names)
                                 for n in payload.missing_params),
        )
    if style == "wrong_tool_hint":
        names = [s.name for s in original_schemas]
        hint = _cyclic_successor(call.tool, names)
        return replace(payload, message=f"{call.tool} cannot serve this request; use {hint} instead")
    return payload
