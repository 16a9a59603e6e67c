from __future__ import annotations

import io
import json
import sys

import pytest

from faultbench.baselines import HeuristicAgent
from faultbench.external import AgentConfigError, ExternalAgent, serve, spawn_external_agent
from faultbench.runner import Briefing, run_episode
from taskfactory import create_task, make_task


def script_agent(body: str) -> list[str]:
    return [sys.executable, "-c", "import json, sys\n" + body]


ECHO_FINISH = """
for line in sys.stdin:
    msg = json.loads(line)
    reply = {"type": "ready"} if msg["type"] == "reset" else {"type": "act", "action": "finish"}
    print(json.dumps(reply), flush=True)
"""


def test_finishing_agent():
    with spawn_external_agent(script_agent(ECHO_FINISH)) as agent:
        trace = run_episode(make_task(), agent)
        assert trace.termination == "finish_without_success"
        # the same process serves a second episode
        assert run_episode(make_task(task_id="t-2"), agent).termination == "finish_without_success"


@pytest.mark.parametrize("reply", ['"not an object"', "{bad json", '{"type": "act"}',
                                   '{"type": "act", "action": {"call": 3}}'])
def test_malformed_reply(reply):
    body = f"""
for line in sys.stdin:
    msg = json.loads(line)
    print(json.dumps({{"type": "ready"}}) if msg["type"] == "reset" else {reply!r}, flush=True)
"""
    with ExternalAgent(script_agent(body)) as agent:
        trace = run_episode(make_task(), agent)
    assert trace.termination == "agent_protocol_error"


def test_reply_deadline():
    body = """
import time
for line in sys.stdin:
    msg = json.loads(line)
    if msg["type"] == "reset":
        print(json.dumps({"type": "ready"}), flush=True)
    else:
        time.sleep(1.5)
"""
    with ExternalAgent(script_agent(body), reply_timeout=0.3) as agent:
        trace = run_episode(make_task(), agent)
    assert trace.termination == "agent_protocol_error"
    assert "deadline" in trace.steps[-1]["protocol_error"]


def test_exiting_agent():
    with ExternalAgent(script_agent("sys.exit(0)")) as agent:
        assert run_episode(make_task(), agent).termination == "agent_protocol_error"


def test_spawn_failure():
    with pytest.raises(AgentConfigError):
        ExternalAgent(["/nonexistent/agent-binary"])


def test_serve_speaks_the_protocol():
    task = create_task()
    reset = Briefing(task.task_id, task.instruction, task.tool_schemas, task.budgets,
                     task.goal_annotation).to_message()
    observe = {"type": "observe", "step": 1,
               "remaining": {"steps": 12, "calls": 10, "retries": 2}, "last_result": None}
    stdin = io.StringIO(json.dumps(reset) + "\n\n" + json.dumps(observe) + "\n" + '{"type": "x"}\n')
    stdout = io.StringIO()
    serve(HeuristicAgent(), stdin, stdout)
    replies = [json.loads(line) for line in stdout.getvalue().splitlines()]
    assert replies[0] == {"type": "ready"}
    assert replies[1]["action"]["call"]["tool"] == "create_record"
    assert replies[2]["type"] == "error"
