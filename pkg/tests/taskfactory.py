"""Small hand-built tasks for unit tests."""

from __future__ import annotations

from faultbench.model import DOMAIN_TOOLS, Budget, StateExists, TaskRecord

RECORDS = {
    "r1": {"title": "Alpha", "fields": {"status": "open"}},
    "r2": {"title": "Beta", "fields": {"status": "closed"}},
    "r3": {"title": "Gamma", "fields": {}},
}


def make_task(domain: str = "crud", *, state: dict | None = None, criteria=None, faults=(),
              rules=(), budget: Budget | None = None, annotation: dict | None = None,
              task_id: str = "t-1", seed: int = 7, instruction: str = "Do the task.") -> TaskRecord:
    if state is None:
        state = {"records": {k: {"title": v["title"], "fields": dict(v["fields"])}
                             for k, v in RECORDS.items()}}
    return TaskRecord(
        task_id=task_id,
        domain=domain,
        instruction=instruction,
        tool_schemas=DOMAIN_TOOLS[domain],
        initial_state=state,
        goal_annotation=annotation or {},
        success_criteria=tuple((StateExists("records/r9"),) if criteria is None else criteria),
        fault_plan=tuple(faults),
        policy_rules=tuple(rules),
        budgets=budget or Budget(max_steps=12, max_tool_calls=10, max_retries=2),
        seed=seed,
    )


def create_task(**kwargs) -> TaskRecord:
    """Create record r9; the heuristic plan is create_record then read_record."""
    annotation = {"intent": "create_record",
                  "slots": {"id": "r9", "title": "Nu", "fields": {"status": "open"}},
                  "policy": kwargs.pop("policy", [])}
    return make_task(annotation=annotation, **kwargs)


def files_task(**kwargs) -> TaskRecord:
    state = {"files": {"docs": {"a.txt": "hello", "b.txt": "bye"}}}
    return make_task("files", state=state, **kwargs)


def schedule_state(events: dict, allow_overlap: bool = False) -> dict:
    from faultbench.environments import compute_conflicts

    return {"events": events, "conflicts": compute_conflicts(events), "allow_overlap": allow_overlap}
