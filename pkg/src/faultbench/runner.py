"""Runs one agent through one task and records a replayable trace.

Per call the pipeline is: policy check, drift trigger evaluation, schema
validation, fault interception (auth, rate limit, timeout), execution, and
finally adversarial rewriting of any error the agent is about to see.
Criteria are checked after every step; the episode ends on the first step
where they hold.
"""

from __future__ import annotations

import copy
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Union

from faultbench.canonical import canonical_bytes, canonical_lines, parse, parse_lines, sha256_hex
from faultbench.environments import ErrorPayload, ToolCall, ToolResult, make_environment
from faultbench.faults import FaultRuntime
from faultbench.model import (
    Budget,
    ForbiddenTool,
    MaxCallsPerTool,
    RequireSuccessBefore,
    TaskRecord,
    ToolSchema,
)
from faultbench.scoring import check_criteria

TERMINATIONS = (
    "success",
    "finish_without_success",
    "budget_steps",
    "budget_calls",
    "retry_overflow",
    "agent_protocol_error",
)


# ---------------------------------------------------------------------------
# Agent contract
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Call:
    tool: str
    arguments: dict = field(default_factory=dict)


class _Finish:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "FINISH"


FINISH = _Finish()
Action = Union[Call, _Finish]


@dataclass(frozen=True)
class Briefing:
    """What an agent is told once, at reset."""

    task_id: str
    instruction: str
    tool_schemas: tuple[ToolSchema, ...]
    budgets: Budget
    goal_annotation: dict

    def to_message(self) -> dict:
        return {
            "type": "reset",
            "task_id": self.task_id,
            "instruction": self.instruction,
            "tool_schemas": [s.to_dict() for s in self.tool_schemas],
            "budgets": self.budgets.to_dict(),
            "goal_annotation": self.goal_annotation,
        }

    @classmethod
    def from_message(cls, msg: dict) -> Briefing:
        return cls(
            msg["task_id"],
            msg["instruction"],
            tuple(ToolSchema.from_dict(s) for s in msg["tool_schemas"]),
            Budget.from_dict(msg["budgets"]),
            msg.get("goal_annotation") or {},
        )


@dataclass(frozen=True)
class Observation:
    """Per-step view. Never carries drifted schemas, state, faults or criteria."""

    briefing: Briefing
    step: int
    remaining: dict
    last_result: dict | None

    @property
    def instruction(self) -> str:
        return self.briefing.instruction

    @property
    def tool_schemas(self) -> tuple[ToolSchema, ...]:
        return self.briefing.tool_schemas

    @property
    def goal_annotation(self) -> dict:
        return self.briefing.goal_annotation

    def to_message(self) -> dict:
        return {"type": "observe", "step": self.step, "remaining": self.remaining,
                "last_result": self.last_result}


class Agent(Protocol):
    def reset(self, briefing: Briefing) -> None: ...

    def act(self, observation: Observation) -> Action: ...


class AgentProtocolError(Exception):
    """An agent produced something that is not a valid action."""


def action_to_dict(action: Action) -> Any:
    if isinstance(action, Call):
        return {"call": {"tool": action.tool, "arguments": action.arguments}}
    return "finish"


def action_from_dict(data: Any) -> Action:
    """Inverse of :func:`action_to_dict`; raises AgentProtocolError on junk."""
    if data == "finish":
        return FINISH
    if isinstance(data, dict) and set(data) == {"call"} and isinstance(data["call"], dict):
        call = data["call"]
        tool = call.get("tool")
        args = call.get("arguments", {})
        if isinstance(tool, str) and tool and isinstance(args, dict):
            return Call(tool, args)
    raise AgentProtocolError(f"malformed action: {data!r}")


def _check_action(action: Any) -> Action:
    if action is FINISH:
        return action
    if isinstance(action, Call) and isinstance(action.tool, str) and action.tool \
            and isinstance(action.arguments, dict):
        try:
            # round-trip through the wire form: a snapshot the agent cannot mutate later
            return Call(action.tool, parse(canonical_bytes(action.arguments)))
        except ValueError as exc:
            raise AgentProtocolError(f"unencodable arguments: {exc}") from None
    raise AgentProtocolError(f"malformed action: {action!r}")


# ---------------------------------------------------------------------------
# Trace
# ---------------------------------------------------------------------------

GENESIS = "0" * 64


def chain_hash(prev: str, record: dict) -> str:
    body = {k: v for k, v in record.items() if k != "chain"}
    return sha256_hex(prev.encode("ascii") + canonical_bytes(body))


@dataclass
class EpisodeTrace:
    task_id: str
    steps: list[dict]
    termination: str

    @property
    def tool_calls_used(self) -> int:
        return sum(1 for s in self.steps if isinstance(s.get("action"), dict))

    def to_bytes(self) -> bytes:
        return canonical_lines(self.steps)

    @classmethod
    def from_bytes(cls, data: bytes) -> EpisodeTrace:
        steps = parse_lines(data)
        if not steps:
            raise ValueError("empty trace")
        return cls(steps[0]["task_id"], steps, steps[-1]["termination"])


# ---------------------------------------------------------------------------
# Policy bookkeeping
# ---------------------------------------------------------------------------


def policy_violations(task: TaskRecord, tool: str, calls_per_tool: dict[str, int],
                      succeeded: set[str]) -> list[str]:
    out = []
    for i, rule in enumerate(task.policy_rules):
        if isinstance(rule, ForbiddenTool) and rule.tool == tool:
            out.append(f"rule {i}: {tool} is forbidden")
        elif isinstance(rule, MaxCallsPerTool) and rule.tool == tool \
                and calls_per_tool.get(tool, 0) >= rule.limit:
            out.append(f"rule {i}: {tool} exceeds {rule.limit} calls")
        elif isinstance(rule, RequireSuccessBefore) and rule.gated == tool \
                and rule.prerequisite not in succeeded:
            out.append(f"rule {i}: {tool} requires a successful {rule.prerequisite} first")
    return out


# ---------------------------------------------------------------------------
# Episode loop
# ---------------------------------------------------------------------------


def run_episode(task: TaskRecord, agent: Agent) -> EpisodeTrace:
    budgets = task.budgets
    env = make_environment(task)
    faults = FaultRuntime(task)
    faults.start(env)
    briefing = Briefing(task.task_id, task.instruction, task.tool_schemas, budgets,
                        copy.deepcopy(task.goal_annotation))

    steps: list[dict] = []
    transcript: list[dict] = []
    calls_per_tool: dict[str, int] = {}
    succeeded: set[str] = set()
    calls = retries = violations = 0
    prev_tool: str | None = None
    prev_failed = False
    last_visible: dict | None = None
    chain = GENESIS

    def record(step: int, **fields: Any) -> dict:
        nonlocal chain
        rec = {
            "task_id": task.task_id,
            "step": step,
            "action": None,
            "validation": None,
            "retry": False,
            "policy": [],
            "result": None,
            "observed": None,
            "rewrite": None,
            "counters": {"tool_calls": calls, "retries": retries, "violations": violations},
            "state_digest": env.state_digest(),
            "termination": None,
        }
        rec.update(fields)
        rec["chain"] = chain = chain_hash(chain, rec)
        steps.append(rec)
        return rec

    def finalize(reason: str) -> EpisodeTrace:
        nonlocal chain
        last = steps[-1]
        last["termination"] = reason
        prev = steps[-2]["chain"] if len(steps) > 1 else GENESIS
        last["chain"] = chain = chain_hash(prev, last)
        return EpisodeTrace(task.task_id, steps, reason)

    try:
        agent.reset(briefing)
    except AgentProtocolError as exc:
        record(1, protocol_error=f"reset failed: {exc}")
        return finalize("agent_protocol_error")
    except Exception as exc:
        record(1, protocol_error=f"reset failed: agent raised {type(exc).__name__}")
        return finalize("agent_protocol_error")

    step = 0
    while True:
        step += 1
        obs = Observation(
            briefing,
            step,
            {"steps": budgets.max_steps - step + 1,
             "calls": budgets.max_tool_calls - calls,
             "retries": budgets.max_retries - retries},
            last_visible,
        )
        try:
            action = _check_action(agent.act(obs))
        except AgentProtocolError as exc:
            record(step, protocol_error=str(exc))
            return finalize("agent_protocol_error")
        except Exception as exc:
            record(step, protocol_error=f"agent raised {type(exc).__name__}")
            return finalize("agent_protocol_error")

        if action is FINISH:
            record(step, action="finish")
            ok = check_criteria(env.live_state, transcript, task.success_criteria)
            return finalize("success" if ok else "finish_without_success")

        call = ToolCall(action.tool, action.arguments)
        calls += 1
        is_retry = prev_tool == call.tool and prev_failed
        if is_retry:
            retries += 1

        before = env.state_digest()
        rewrite_index: int | None = None
        validation = "not_evaluated"
        broken = policy_violations(task, call.tool, calls_per_tool, succeeded)
        calls_per_tool[call.tool] = calls_per_tool.get(call.tool, 0) + 1
        if broken:
            violations += 1
            result = ToolResult.failure(ErrorPayload("policy_violation", "; ".join(broken)))
        else:
            faults.drift_before_validation(env, call, calls)
            error = env.validate_call(call)
            if error is not None:
                validation = error.code
                result = ToolResult.failure(faults.attribute_validation_error(call, error))
            else:
                validation = "ok"
                injected = faults.intercept(env, call, calls)
                result = ToolResult.failure(injected) if injected else env.execute(call)
        if not result.ok:
            assert env.state_digest() == before, "failed call mutated state"
            if validation != "ok" or broken or result.error.fault_context is not None:
                env.call_log.append((call, result))
            visible_error, rewrite_index = faults.rewrite_error(env, call, result.error, calls)
            visible = ToolResult.failure(visible_error).to_dict(visible=True)
        else:
            succeeded.add(call.tool)
            visible = result.to_dict(visible=True)

        transcript.append({"tool": call.tool, "ok": result.ok})
        prev_tool, prev_failed = call.tool, not result.ok
        last_visible = visible
        record(
            step,
            action=action_to_dict(action),
            validation=validation,
            retry=is_retry,
            policy=broken,
            result=result.to_dict(),
            observed=visible,
            rewrite=(None if rewrite_index is None
                     else {"fault_index": rewrite_index,
                           "style": task.fault_plan[rewrite_index].style}),
        )

        if check_criteria(env.live_state, transcript, task.success_criteria):
            return finalize("success")
        if retries > budgets.max_retries:
            return finalize("retry_overflow")
        if calls >= budgets.max_tool_calls:
            return finalize("budget_calls")
        if step >= budgets.max_steps:
            return finalize("budget_steps")


def run_many(tasks: list[TaskRecord], agent_factory: Callable[[], Agent],
             parallel: int = 1) -> list[EpisodeTrace]:
    """Run every task with a fresh agent; results come back in task order."""
    if parallel <= 1:
        return [run_episode(t, agent_factory()) for t in tasks]
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(lambda t: run_episode(t, agent_factory()), tasks))


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------


class ScriptedAgent:
    """Re-issues a recorded sequence of ``(action, protocol_error)`` pairs."""

    _RESET = "reset failed: "

    def __init__(self, script: list[tuple[Any, str | None]]) -> None:
        self.script = script
        self.cursor = 0

    def reset(self, briefing: Briefing) -> None:
        self.cursor = 0
        if self.script and (self.script[0][1] or "").startswith(self._RESET):
            raise AgentProtocolError(self.script[0][1][len(self._RESET):])

    def act(self, observation: Observation) -> Action:
        if self.cursor >= len(self.script):
            raise AgentProtocolError("recorded actions exhausted")
        data, error = self.script[self.cursor]
        self.cursor += 1
        if error is not None:
            raise AgentProtocolError(error)
        return action_from_dict(data)


@dataclass(frozen=True)
class ReplayVerdict:
    ok: bool
    diverged_at: int | None = None
    reason: str = ""

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return f"diverged at step {self.diverged_at}: {self.reason}"


def replay_trace(trace_bytes: bytes, task: TaskRecord) -> ReplayVerdict:
    """Re-execute a trace's actions and compare every line byte-for-byte."""
    lines = trace_bytes.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    else:
        return ReplayVerdict(False, max(len(lines), 1), "trace does not end with a newline")
    script: list[tuple[Any, str | None]] = []
    for line in lines:
        try:
            rec = parse_lines(line)[0]
            error = rec.get("protocol_error")
            script.append((rec["action"], error if isinstance(error, str) else None))
        except (ValueError, KeyError, IndexError, TypeError, AttributeError):
            script.append((None, None))
    replayed = run_episode(task, ScriptedAgent(script)).to_bytes().split(b"\n")[:-1]
    for n, (got, want) in enumerate(zip(lines, replayed), start=1):
        if got != want:
            return ReplayVerdict(False, n, "recorded step differs from re-execution")
    if len(lines) != len(replayed):
        return ReplayVerdict(False, min(len(lines), len(replayed)) + 1, "step count differs")
    return ReplayVerdict(True)
