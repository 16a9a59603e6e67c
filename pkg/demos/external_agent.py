"""A minimal agent speaking the line-delimited JSON protocol, plus a driver that runs it.

Run with no arguments to evaluate it on a few generated tasks. The harness
starts this same file with ``--serve`` as the agent process.
"""

from __future__ import annotations

import json
import sys


def serve() -> None:
    plan: list[dict] = []
    for line in sys.stdin:
        msg = json.loads(line)
        if msg["type"] == "reset":
            slots = msg["goal_annotation"].get("slots", {})
            # only knows how to read a record; finishes on anything else
            plan = [{"call": {"tool": "read_record", "arguments": {"id": slots["id"]}}}] \
                if "id" in slots and msg["goal_annotation"].get("intent") == "lookup_record" else []
            reply = {"type": "ready"}
        else:
            reply = {"type": "act", "action": plan.pop(0) if plan else "finish"}
        print(json.dumps(reply), flush=True)


def drive() -> None:
    from faultbench.generator import generate_split, make_profile
    from faultbench.evaluation import evaluate

    tasks = generate_split(make_profile("small", seed=0), "test", 20)
    ev = evaluate(tasks, command=[sys.executable, __file__, "--serve"], label="demo")
    for trace in ev.traces[:5]:
        print(trace.task_id, trace.termination, trace.tool_calls_used, "calls")
    print("success rate:", ev.report["overall"]["success"])


if __name__ == "__main__":
    serve() if "--serve" in sys.argv else drive()
