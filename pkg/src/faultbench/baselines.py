"""Built-in deterministic agents: heuristic, schema repair, policy aware.

All three follow a fixed per-intent plan built from the task's goal
annotation. They differ only in how they react to error results.
"""

from __future__ import annotations

from dataclasses import dataclass

from faultbench.canonical import canonical_bytes
from faultbench.runner import FINISH, Action, Briefing, Call, Observation


@dataclass
class PlanStep:
    tool: str
    arguments: dict
    # a repair-capable agent may move past an optional step it gave up on
    optional: bool = False


def _parent(path: str) -> str:
    return path.rsplit("/", 1)[0] if "/" in path else ""


def build_plan(annotation: dict) -> list[PlanStep]:
    """Bind the per-intent plan template to the annotation's slots."""
    intent = annotation.get("intent")
    s = annotation.get("slots", {})
    if intent == "create_record":
        return [PlanStep("create_record", {"id": s["id"], "title": s["title"], "fields": s["fields"]}),
                PlanStep("read_record", {"id": s["id"]}, optional=True)]
    if intent == "update_record":
        return [PlanStep("read_record", {"id": s["id"]}, optional=True),
                PlanStep("update_record", {"id": s["id"], "fields": s["fields"]}),
                PlanStep("read_record", {"id": s["id"]}, optional=True)]
    if intent == "delete_record":
        return [PlanStep("read_record", {"id": s["id"]}, optional=True),
                PlanStep("delete_record", {"id": s["id"]}),
                PlanStep("list_records", {}, optional=True)]
    if intent == "lookup_record":
        return [PlanStep("list_records", {}),
                PlanStep("read_record", {"id": s["id"]}),
                PlanStep("list_records", {}, optional=True)]
    if intent == "answer_question":
        return [PlanStep("search", {"query": s["query"]}, optional=True),
                PlanStep("fetch_document", {"id": s["doc_id"]}, optional=True),
                PlanStep("submit_answer", {"text": s["answer"]}),
                PlanStep("fetch_document", {"id": s["doc_id"]}, optional=True)]
    if intent == "create_file":
        return [PlanStep("list_dir", {"path": _parent(s["path"])}, optional=True),
                PlanStep("create_file", {"path": s["path"], "content": s["content"]}),
                PlanStep("read_file", {"path": s["path"]}, optional=True)]
    if intent == "append_file":
        return [PlanStep("read_file", {"path": s["path"]}, optional=True),
                PlanStep("append_file", {"path": s["path"], "content": s["content"]}),
                PlanStep("read_file", {"path": s["path"]}, optional=True)]
    if intent == "move_file":
        return [PlanStep("list_dir", {"path": _parent(s["src"])}, optional=True),
                PlanStep("move_file", {"src": s["src"], "dst": s["dst"]}),
                PlanStep("list_dir", {"path": _parent(s["dst"])}, optional=True)]
    if intent == "delete_file":
        return [PlanStep("read_file", {"path": s["path"]}, optional=True),
                PlanStep("delete_file", {"path": s["path"]}),
                PlanStep("list_dir", {"path": _parent(s["path"])}, optional=True)]
    if intent == "create_event":
        return [PlanStep("list_events", {}, optional=True),
                PlanStep("create_event", {"id": s["id"], "start": s["start"], "end": s["end"],
                                          "title": s["title"]}),
                PlanStep("check_conflicts", {}, optional=True)]
    if intent == "reschedule_event":
        return [PlanStep("check_conflicts", {}, optional=True),
                PlanStep("update_event", {"id": s["id"], "start": s["start"], "end": s["end"]}),
                PlanStep("list_events", {}, optional=True)]
    if intent == "cancel_event":
        return [PlanStep("list_events", {}, optional=True),
                PlanStep("cancel_event", {"id": s["id"]}),
                PlanStep("check_conflicts", {}, optional=True)]
    return []


def edit_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def pair_renames(missing: list[str], unknown: list[str]) -> dict[str, str] | None:
    """Map each unknown argument name to the missing param it most likely is.

    Each missing name takes the closest remaining unknown name; ties go to the
    earlier unknown. None when some missing param has no candidate left.
    """
    pool = list(unknown)
    out: dict[str, str] = {}
    for m in missing:
        if not pool:
            return None
        best = min(pool, key=lambda u: (edit_distance(m, u), pool.index(u)))
        pool.remove(best)
        out[best] = m
    return out


class HeuristicAgent:
    """Runs the plan and stops at the first error."""

    name = "heuristic"

    def reset(self, briefing: Briefing) -> None:
        self.briefing = briefing
        self.plan = build_plan(briefing.goal_annotation)
        self.cursor = 0
        self.last_call: Call | None = None

    def act(self, obs: Observation) -> Action:
        if obs.last_result is not None:
            if not obs.last_result["ok"]:
                return FINISH
            self.cursor += 1
        return self._issue_next(obs)

    def _issue_next(self, obs: Observation) -> Action:
        if self.cursor >= len(self.plan):
            return FINISH
        step = self.plan[self.cursor]
        self.last_call = Call(step.tool, dict(step.arguments))
        return self.last_call


class SchemaRepairAgent(HeuristicAgent):
    """Adds rename repair for argument errors and re-issues on timeouts/rate limits."""

    name = "schema_repair"

    def reset(self, briefing: Briefing) -> None:
        super().reset(briefing)
        self.learned: dict[str, dict[str, str]] = {}
        self.tried: set[bytes] = set()
        self.calls_per_tool: dict[str, int] = {}

    def act(self, obs: Observation) -> Action:
        result = obs.last_result
        if result is None:
            return self._issue_next(obs)
        if result["ok"]:
            self.cursor += 1
            return self._issue_next(obs)
        return self._handle_error(result["error"], obs)

    # -- error handling -------------------------------------------------

    def _handle_error(self, error: dict, obs: Observation) -> Action:
        code = error.get("code")
        last = self.last_call
        if code == "unauthorized":
            return FINISH
        if code in ("invalid_arguments", "schema_drift"):
            repaired = self._repair(last, error)
            if repaired is None:
                return self._give_up(obs)
            return self._retry(repaired, obs)
        if code == "timeout":
            return self._retry(last, obs)
        if code == "rate_limited":
            wait = error.get("retry_after_steps")
            if wait is not None and wait > obs.remaining["retries"]:
                return self._give_up(obs)
            return self._retry(last, obs)
        return self._give_up(obs)

    def _repair(self, call: Call, error: dict) -> Call | None:
        missing = list(error.get("missing_params") or [])
        unknown = list(error.get("unknown_params") or [])
        if not missing and not unknown:
            return None
        renames = pair_renames(missing, unknown)
        if renames is None:
            return None
        args = {}
        for name, value in call.arguments.items():
            if name in renames:
                args[renames[name]] = value
            elif name not in unknown:
                args[name] = value
        if args == call.arguments:
            return None
        learned = self.learned.setdefault(call.tool, {})
        learned.update({old: new for old, new in renames.items() if old != new})
        return Call(call.tool, args)

    def _retry(self, call: Call, obs: Observation) -> Action:
        if obs.remaining["retries"] < 1:
            return self._give_up(obs)
        key = canonical_bytes([call.tool, call.arguments, obs.last_result["error"]["code"]])
        if obs.last_result["error"]["code"] in ("invalid_arguments", "schema_drift"):
            if key in self.tried:
                return self._give_up(obs)
            self.tried.add(key)
        return self._send(call, obs)

    def _give_up(self, obs: Observation) -> Action:
        if self.cursor < len(self.plan) and self.plan[self.cursor].optional:
            self.cursor += 1
            return self._issue_next(obs)
        return FINISH

    # -- issuing --------------------------------------------------------

    def _apply_learned(self, step: PlanStep) -> Call:
        renames = self.learned.get(step.tool, {})
        return Call(step.tool, {renames.get(k, k): v for k, v in step.arguments.items()})

    def _issue_next(self, obs: Observation) -> Action:
        if self.cursor >= len(self.plan):
            return FINISH
        return self._send(self._apply_learned(self.plan[self.cursor]), obs)

    def _would_be_retry(self, call: Call, obs: Observation) -> bool:
        return (obs.last_result is not None and not obs.last_result["ok"]
                and self.last_call is not None and self.last_call.tool == call.tool)

    def _send(self, call: Call, obs: Observation) -> Action:
        if self._would_be_retry(call, obs) and obs.remaining["retries"] < 1:
            return FINISH
        if obs.remaining["calls"] < 1:
            return FINISH
        self.last_call = call
        self.calls_per_tool[call.tool] = self.calls_per_tool.get(call.tool, 0) + 1
        return call


class PolicyAwareAgent(SchemaRepairAgent):
    """Schema repair plus a thin layer that honours visible policy rules."""

    name = "policy_aware"

    def reset(self, briefing: Briefing) -> None:
        super().reset(briefing)
        rules = briefing.goal_annotation.get("policy", [])
        self.forbidden = {r["tool"] for r in rules if r.get("kind") == "forbidden_tool"}
        self.limits = {r["tool"]: r["limit"] for r in rules if r.get("kind") == "max_calls_per_tool"}
        self.gates = [(r["prerequisite"], r["gated"]) for r in rules
                      if r.get("kind") == "require_success_before"]
        self.succeeded: set[str] = set()

    def act(self, obs: Observation) -> Action:
        if obs.last_result is not None and obs.last_result["ok"] and self.last_call is not None:
            self.succeeded.add(self.last_call.tool)
        return super().act(obs)

    def _issue_next(self, obs: Observation) -> Action:
        while self.cursor < len(self.plan):
            step = self.plan[self.cursor]
            if step.tool in self.forbidden:
                self.cursor += 1
                continue
            self._reorder_for_gates()
            break
        return super()._issue_next(obs)

    def _reorder_for_gates(self) -> None:
        tool = self.plan[self.cursor].tool
        for prereq, gated in self.gates:
            if gated != tool or prereq in self.succeeded:
                continue
            for j in range(self.cursor + 1, len(self.plan)):
                if self.plan[j].tool == prereq:
                    self.plan.insert(self.cursor, self.plan.pop(j))
                    return

    def _send(self, call: Call, obs: Observation) -> Action:
        limit = self.limits.get(call.tool)
        if limit is not None and self.calls_per_tool.get(call.tool, 0) >= limit:
            return self._give_up(obs)
        return super()._send(call, obs)


BASELINES = {
    "heuristic": HeuristicAgent,
    "schema_repair": SchemaRepairAgent,
    "policy_aware": PolicyAwareAgent,
}


def make_baseline(name: str) -> HeuristicAgent:
    try:
        return BASELINES[name]()
    except KeyError:
        raise ValueError(f"unknown baseline {name!r}; choose from {sorted(BASELINES)}") from None
