from __future__ import annotations

from dataclasses import replace

import pytest

from faultbench.canonical import canonical_bytes, parse
from faultbench.model import (
    DOMAIN_TOOLS,
    Budget,
    FaultSpec,
    ForbiddenTool,
    MalformedRecord,
    MaxCallsPerTool,
    MinToolCalls,
    ParamSpec,
    RequireSuccessBefore,
    StateEquals,
    TaskRecord,
    ToolName,
    ToolSchema,
    dump_tasks,
    load_tasks,
    validate_task,
)
from taskfactory import make_task


def _rules(task):
    return {e.rule for e in validate_task(task)}


def test_generated_corpus_round_trips(small_tasks):
    corpus = small_tasks[:100]
    for task in corpus:
        once = canonical_bytes(task)
        assert canonical_bytes(parse(once)) == once
        assert TaskRecord.from_dict(parse(once)) == task
    assert load_tasks(dump_tasks(corpus)) == corpus


def test_serializing_twice_is_identical(small_tasks):
    assert canonical_bytes(small_tasks[0]) == canonical_bytes(small_tasks[0])


def test_generated_records_validate(small_tasks):
    assert all(validate_task(t) == [] for t in small_tasks)


def test_empty_fault_plan_is_valid():
    assert validate_task(make_task()) == []


def test_dangling_fault_tool():
    task = make_task(faults=[FaultSpec("timeout", ToolName("frobnicate"), fail_count_before_recovery=1)])
    errors = validate_task(task)
    assert [e.rule for e in errors] == ["fault_reference"]
    assert errors[0].field == "fault_plan[0].trigger"


def test_blank_instruction():
    assert _rules(make_task(instruction="")) == {"instruction_presence"}
    assert _rules(make_task(instruction="   ")) == {"instruction_presence"}


def _dup_param_schemas():
    tools = list(DOMAIN_TOOLS["crud"])
    first = tools[0]
    tools[0] = ToolSchema(first.name, first.description, first.params + (first.params[0],))
    return tuple(tools)


CORRUPTIONS = {
    "instruction_presence": lambda t: replace(t, instruction=""),
    "fault_reference": lambda t: replace(
        t, fault_plan=(FaultSpec("auth_failure", ToolName("nope"), persistent=True),)),
    "policy_reference": lambda t: replace(t, policy_rules=(ForbiddenTool("nope"),)),
    "criteria_structure": lambda t: replace(t, success_criteria=(StateEquals("", 1),)),
    "schema_structure": lambda t: replace(t, tool_schemas=_dup_param_schemas()),
    "domain_state": lambda t: replace(t, initial_state={"rows": []}),
    "budget": lambda t: replace(t, budgets=Budget(5, 6, 1)),
}


@pytest.mark.parametrize("rule", sorted(CORRUPTIONS))
def test_single_corruption_is_caught(rule, small_tasks):
    for task in small_tasks[:40]:
        corrupted = CORRUPTIONS[rule](task)
        assert rule in _rules(corrupted), (rule, task.task_id)


def test_more_corruptions():
    assert "criteria_structure" in _rules(make_task(criteria=[]))
    assert "criteria_structure" in _rules(make_task(criteria=[MinToolCalls(0)]))
    assert "policy_reference" in _rules(make_task(rules=[MaxCallsPerTool("read_record", 0)]))
    assert "policy_reference" in _rules(make_task(rules=[RequireSuccessBefore("read_record", "read_record")]))
    assert "fault_params" in _rules(make_task(faults=[
        FaultSpec("schema_drift", ToolName("create_record"), param_rename_map={"id": "a", "title": "a"})]))
    assert "fault_reference" in _rules(make_task(faults=[
        FaultSpec("schema_drift", ToolName("create_record"), param_rename_map={"ghost": "g"})]))
    assert "fault_params" in _rules(make_task(faults=[
        FaultSpec("auth_failure", ToolName("read_record"), persistent=False)]))
    assert "record_field" in _rules(make_task(seed=-1))


def test_validation_is_pure(small_tasks):
    task = CORRUPTIONS["fault_reference"](small_tasks[0])
    assert validate_task(task) == validate_task(task)


def test_allowed_values_must_match_kind():
    assert ParamSpec("x", "integer", allowed_values=(1, 2)).accepts(2)
    assert not ParamSpec("x", "integer", allowed_values=(1, 2)).accepts(3)
    assert not ParamSpec("x", "integer").accepts(True)
    bad = ToolSchema("read_record", "", (ParamSpec("id", "string", allowed_values=(1,)),))
    assert "schema_structure" in _rules(replace(make_task(), tool_schemas=(bad,)))


def test_missing_field_is_malformed():
    d = make_task().to_dict()
    del d["budgets"]
    with pytest.raises(MalformedRecord):
        TaskRecord.from_dict(d)


def test_fault_family_slicing():
    drift = FaultSpec("schema_drift", ToolName("create_record"), param_rename_map={"id": "key"})
    rewrite = FaultSpec("adversarial_rewrite", ToolName("create_record"), style="vague")
    assert make_task().fault_family == "none"
    assert make_task(faults=[drift]).fault_family == "schema_drift"
    assert make_task(faults=[drift, rewrite]).fault_family == "adversarial_rewrite"
