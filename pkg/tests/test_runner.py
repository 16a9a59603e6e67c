from __future__ import annotations

import pytest

from faultbench.baselines import HeuristicAgent, SchemaRepairAgent
from faultbench.model import (
    Budget,
    FaultSpec,
    ForbiddenTool,
    MaxCallsPerTool,
    MinSuccessfulToolCalls,
    RequireSuccessBefore,
    StateExists,
    ToolName,
)
from faultbench.runner import (
    FINISH,
    Call,
    EpisodeTrace,
    ScriptedAgent,
    action_to_dict,
    replay_trace,
    run_episode,
    run_many,
)
from taskfactory import create_task, make_task


class Script:
    """Plays a fixed list of actions, then finishes."""

    def __init__(self, actions):
        self.actions = list(actions)

    def reset(self, briefing):
        self.briefing = briefing
        self.seen = []
        self.i = 0

    def act(self, obs):
        self.seen.append(obs)
        if self.i >= len(self.actions):
            return FINISH
        self.i += 1
        return self.actions[self.i - 1]


READ = Call("read_record", {"id": "r1"})
CREATE = Call("create_record", {"id": "r9", "title": "Nu", "fields": {}})


def test_finish_at_first_step():
    trace = run_episode(make_task(), Script([]))
    assert trace.termination == "finish_without_success"
    assert len(trace.steps) == 1 and trace.steps[0]["action"] == "finish"
    held = make_task(criteria=[StateExists("records/r1")])
    assert run_episode(held, Script([])).termination == "success"


def test_success_ends_the_episode():
    trace = run_episode(make_task(), Script([READ, CREATE, READ, READ]))
    assert trace.termination == "success"
    assert [s["step"] for s in trace.steps] == [1, 2]
    assert trace.steps[-1]["termination"] == "success"


def test_one_call_per_step_and_counters():
    task = make_task(criteria=[MinSuccessfulToolCalls(3)])
    trace = run_episode(task, Script([READ, Call("read_record", {"id": "zz"}), READ, READ]))
    calls = [s for s in trace.steps if isinstance(s["action"], dict)]
    assert len(calls) == sum(1 for s in trace.steps if s["validation"] is not None)
    assert trace.termination == "success" and trace.tool_calls_used == 4
    assert trace.steps[-1]["counters"] == {"tool_calls": 4, "retries": 1, "violations": 0}


PERSISTENT = FaultSpec("timeout", ToolName("read_record"), fail_count_before_recovery=0)


@pytest.mark.parametrize("max_retries", [0, 1, 2])
def test_retry_overflow_boundary(max_retries):
    task = make_task(faults=[PERSISTENT], budget=Budget(20, 20, max_retries))
    # max_retries retries are allowed; the next one overflows
    ok = run_episode(task, Script([READ] * (max_retries + 1)))
    assert ok.termination == "finish_without_success"
    over = run_episode(task, Script([READ] * (max_retries + 2)))
    assert over.termination == "retry_overflow"
    assert over.steps[-1]["counters"]["retries"] == max_retries + 1
    assert over.tool_calls_used == max_retries + 2


def test_retry_needs_same_tool_right_after_failure():
    task = make_task(faults=[PERSISTENT], budget=Budget(20, 20, 0))
    trace = run_episode(task, Script([READ, Call("list_records"), READ, Call("list_records"), READ]))
    assert [s["retry"] for s in trace.steps[:-1]] == [False] * 5
    assert trace.termination == "finish_without_success"


def test_budget_limits():
    calls = run_episode(make_task(budget=Budget(10, 3, 5)), Script([Call("list_records")] * 9))
    assert calls.termination == "budget_calls" and calls.tool_calls_used == 3
    steps = run_episode(make_task(budget=Budget(2, 2, 5)), Script([Call("list_records")] * 9))
    assert steps.termination == "budget_calls"
    bad = Call("read_record", {})
    steps = run_episode(make_task(budget=Budget(4, 4, 5)), Script([bad, READ] * 5))
    assert steps.termination == "budget_calls" and len(steps.steps) == 4


def test_policy_violations_leave_state():
    task = make_task(rules=[ForbiddenTool("delete_record"), MaxCallsPerTool("list_records", 1),
                            RequireSuccessBefore("read_record", "update_record")],
                     criteria=[MinSuccessfulToolCalls(9)])
    upd = Call("update_record", {"id": "r1", "fields": {"a": 1}})
    trace = run_episode(task, Script([Call("delete_record", {"id": "r1"}), Call("list_records"),
                                      Call("list_records"), upd, READ, upd]))
    codes = [s["result"]["error"]["code"] if not s["result"]["ok"] else "ok"
             for s in trace.steps if isinstance(s["action"], dict)]
    assert codes == ["policy_violation", "ok", "policy_violation", "policy_violation", "ok", "ok"]
    assert trace.steps[0]["state_digest"] == trace.steps[2]["state_digest"] == trace.steps[3]["state_digest"]
    assert trace.steps[-1]["counters"]["violations"] == 3


def test_observations_hide_drift():
    task = create_task(faults=[FaultSpec("schema_drift", ToolName("create_record"),
                                         param_rename_map={"title": "record_title"})])
    agent = Script([CREATE])
    run_episode(task, agent)
    assert agent.briefing.tool_schemas == task.tool_schemas
    last = agent.seen[-1].last_result
    assert last["error"]["missing_params"] == ["record_title"]
    assert "fault_context" not in last["error"]


class Junk:
    def __init__(self, reply):
        self.reply = reply

    def reset(self, briefing):
        pass

    def act(self, obs):
        if isinstance(self.reply, Exception):
            raise self.reply
        return self.reply


@pytest.mark.parametrize("reply", ["finish", None, Call("", {}), Call("x", ["a"]),
                                   Call("x", {"v": float("nan")}), RuntimeError("boom")])
def test_malformed_actions_end_with_protocol_error(reply):
    trace = run_episode(make_task(), Junk(reply))
    assert trace.termination == "agent_protocol_error"
    assert "protocol_error" in trace.steps[-1]


def test_reset_failure_is_recorded():
    class Broken:
        def reset(self, briefing):
            raise ValueError("no")

        def act(self, obs):
            return FINISH

    trace = run_episode(make_task(), Broken())
    assert trace.termination == "agent_protocol_error"
    assert replay_trace(trace.to_bytes(), make_task()).ok


def test_identical_runs_are_byte_identical(small_tasks):
    for task in small_tasks[:30]:
        a = run_episode(task, SchemaRepairAgent()).to_bytes()
        assert a == run_episode(task, SchemaRepairAgent()).to_bytes()


def test_parallel_runs_keep_order(small_tasks):
    serial = run_many(small_tasks, HeuristicAgent)
    threaded = run_many(small_tasks, HeuristicAgent, parallel=4)
    assert [t.to_bytes() for t in serial] == [t.to_bytes() for t in threaded]


def test_trace_round_trip(small_tasks):
    trace = run_episode(small_tasks[0], SchemaRepairAgent())
    again = EpisodeTrace.from_bytes(trace.to_bytes())
    assert again.to_bytes() == trace.to_bytes() and again.termination == trace.termination


def test_replay_accepts_fresh_traces(small_tasks):
    for task in small_tasks:
        data = run_episode(task, SchemaRepairAgent()).to_bytes()
        assert replay_trace(data, task).ok
        # replaying a replay stays ok
        assert replay_trace(data, task).ok


def test_replay_rejects_tampering(small_tasks):
    task = next(t for t in small_tasks if t.fault_plan)
    data = run_episode(task, SchemaRepairAgent()).to_bytes()
    for pos in range(0, len(data), 7):
        flipped = bytearray(data)
        flipped[pos] ^= 0x01
        verdict = replay_trace(bytes(flipped), task)
        assert not verdict.ok, pos
        line = data[:pos].count(b"\n") + 1
        assert verdict.diverged_at <= line


def test_replay_points_at_changed_result():
    task = make_task(faults=[PERSISTENT], criteria=[MinSuccessfulToolCalls(5)])
    data = run_episode(task, Script([Call("list_records"), READ])).to_bytes()
    tampered = data.replace(b'"code":"timeout"', b'"code":"conflict"')
    verdict = replay_trace(tampered, task)
    assert not verdict.ok and verdict.diverged_at == 2


def test_scripted_agent_replays_actions():
    agent = ScriptedAgent([(action_to_dict(READ), None), ("finish", None)])
    trace = run_episode(make_task(), agent)
    assert [s["action"] for s in trace.steps] == [action_to_dict(READ), "finish"]


def test_agent_cannot_mutate_recorded_arguments():
    class Sneaky:
        def reset(self, briefing):
            self.args = {"id": "r1"}
            self.n = 0

        def act(self, obs):
            self.n += 1
            if self.n > 1:
                self.args["id"] = "changed"
                return FINISH
            return Call("read_record", self.args)

    task = make_task()
    trace = run_episode(task, Sneaky())
    assert trace.steps[0]["action"]["call"]["arguments"] == {"id": "r1"}
    assert replay_trace(trace.to_bytes(), task).ok
