"""Show how a parameter rename hits the heuristic agent and how schema repair recovers."""

from __future__ import annotations

from faultbench.baselines import HeuristicAgent, SchemaRepairAgent
from faultbench.model import DOMAIN_TOOLS, Budget, FaultSpec, StateExists, TaskRecord, ToolName
from faultbench.runner import run_episode


def build_task() -> TaskRecord:
    return TaskRecord(
        task_id="walkthrough-1",
        domain="crud",
        instruction="Create record ord-7 titled Renewal.",
        tool_schemas=DOMAIN_TOOLS["crud"],
        initial_state={"records": {}},
        goal_annotation={"intent": "create_record",
                         "slots": {"id": "ord-7", "title": "Renewal", "fields": {"status": "open"}}},
        success_criteria=(StateExists("records/ord-7"),),
        fault_plan=(FaultSpec("schema_drift", ToolName("create_record"),
                              param_rename_map={"title": "record_title"}),),
        policy_rules=(),
        budgets=Budget(max_steps=10, max_tool_calls=8, max_retries=2),
        seed=1,
    )


def show(agent) -> None:
    trace = run_episode(build_task(), agent)
    print(f"--- {agent.name}: {trace.termination}")
    for step in trace.steps:
        action = step["action"]
        if action == "finish":
            print(f"  step {step['step']}: finish")
            continue
        call = action["call"]
        observed = step["observed"] or step["result"]
        verdict = "ok" if observed["ok"] else observed["error"]["code"]
        extra = ""
        if not observed["ok"]:
            err = observed["error"]
            extra = f" missing={err.get('missing_params')} unknown={err.get('unknown_params')}"
        print(f"  step {step['step']}: {call['tool']}({call['arguments']}) -> {verdict}{extra}")


def main() -> None:
    show(HeuristicAgent())
    show(SchemaRepairAgent())


if __name__ == "__main__":
    main()
