from __future__ import annotations

from faultbench.canonical import canonical_bytes
from faultbench.environments import ErrorPayload, ToolCall, make_environment
from faultbench.faults import FaultRuntime, apply_drift, rewrite_payload
from faultbench.model import ArgPattern, FaultSpec, NthCall, Probabilistic, ToolName
from taskfactory import files_task, make_task

READ_A = ToolCall("read_file", {"path": "docs/a.txt"})


def _runtime(task):
    env = make_environment(task)
    rt = FaultRuntime(task)
    rt.start(env)
    return rt, env


def test_drift_renames_effective_schema_only():
    task = make_task(faults=[FaultSpec("schema_drift", ToolName("create_record"),
                                       param_rename_map={"title": "record_title"})])
    rt, env = _runtime(task)
    assert env.schema("create_record").param_names == ["id", "record_title", "fields"]
    assert task.schema("create_record").param_names == ["id", "title", "fields"]


def test_empty_rename_is_identity():
    env = make_environment(make_task())
    before = canonical_bytes(env.effective_schemas)
    apply_drift(FaultSpec("schema_drift", ToolName("create_record"), param_rename_map={}), env)
    assert canonical_bytes(env.effective_schemas) == before


def test_drift_is_idempotent():
    spec = FaultSpec("schema_drift", ToolName("update_record"),
                     param_rename_map={"id": "key", "fields": "values"},
                     tool_rename={"update_record": "update_record_v2"})
    env = make_environment(make_task())
    once = canonical_bytes(apply_drift(spec, env))
    twice = canonical_bytes(apply_drift(spec, env))
    assert once == twice
    assert env.schema("update_record") is None
    assert env.schema("update_record_v2").param_names == ["key", "values", "title"]


def test_transient_timeout_recovers():
    task = files_task(faults=[FaultSpec("timeout", ToolName("read_file"), fail_count_before_recovery=1)])
    rt, env = _runtime(task)
    first = rt.intercept(env, READ_A, 1)
    assert first.code == "timeout" and first.fault_context.fault_index == 0
    assert rt.intercept(env, READ_A, 2) is None
    assert rt.intercept(env, ToolCall("list_dir", {"path": "docs"}), 3) is None


def test_persistent_timeout_and_auth():
    task = make_task(faults=[FaultSpec("timeout", ToolName("read_record"), fail_count_before_recovery=0),
                             FaultSpec("auth_failure", ToolName("delete_record"), persistent=True)])
    rt, env = _runtime(task)
    for n in range(1, 8):
        assert rt.intercept(env, ToolCall("read_record", {"id": "r1"}), n).code == "timeout"
        err = rt.intercept(env, ToolCall("delete_record", {"id": "r1"}), n)
        assert err.code == "unauthorized" and err.fault_context.fault_type == "auth_failure"


def test_empty_plan_passes_everything():
    rt, env = _runtime(make_task())
    for n, tool in enumerate(["read_record", "list_records", "delete_record"], 1):
        assert rt.intercept(env, ToolCall(tool, {"id": "r1"}), n) is None


def test_family_order_auth_before_rate_limit_before_timeout():
    task = make_task(faults=[
        FaultSpec("timeout", ToolName("read_record"), fail_count_before_recovery=0),
        FaultSpec("rate_limit", NthCall(2), retry_after_steps=3, recover_after_failures=0),
        FaultSpec("auth_failure", NthCall(3), persistent=True),
    ])
    rt, env = _runtime(task)
    call = ToolCall("read_record", {"id": "r1"})
    assert [rt.intercept(env, call, n).code for n in (1, 2, 3)] == ["timeout", "rate_limited", "unauthorized"]


def test_first_firing_spec_in_family_decides():
    task = make_task(faults=[
        FaultSpec("timeout", ToolName("read_record"), fail_count_before_recovery=1),
        FaultSpec("timeout", ToolName("read_record"), fail_count_before_recovery=0),
    ])
    rt, env = _runtime(task)
    call = ToolCall("read_record", {"id": "r1"})
    assert rt.intercept(env, call, 1).fault_context.fault_index == 0
    # the first spec has recovered; the second is not consulted
    assert rt.intercept(env, call, 2) is None


def test_rate_limit_cooldown_and_recovery_count():
    cooled = make_task(faults=[FaultSpec("rate_limit", ToolName("list_records"),
                                         retry_after_steps=2, recover_after_failures=0)])
    rt, env = _runtime(cooled)
    call = ToolCall("list_records", {})
    first = rt.intercept(env, call, 1)
    assert first.retry_after_steps == 2
    assert rt.intercept(env, call, 2).retry_after_steps == 1
    assert rt.intercept(env, call, 3) is None
    assert rt.intercept(env, call, 4).code == "rate_limited"

    counted = make_task(faults=[FaultSpec("rate_limit", ToolName("list_records"),
                                          retry_after_steps=50, recover_after_failures=2)])
    rt, env = _runtime(counted)
    assert [rt.intercept(env, call, n) is None for n in (1, 2, 3, 4)] == [False, False, True, True]


def test_arg_pattern_matches_rendered_argument():
    task = make_task(faults=[FaultSpec("timeout", ArgPattern("update_record", "fields", "urg"),
                                       fail_count_before_recovery=0)])
    rt, env = _runtime(task)
    assert rt.intercept(env, ToolCall("update_record", {"id": "r1", "fields": {"p": "urgent"}}), 1)
    assert rt.intercept(env, ToolCall("update_record", {"id": "r1", "fields": {"p": "low"}}), 2) is None


def test_probabilistic_certain_and_replayable():
    sure = make_task(faults=[FaultSpec("timeout", Probabilistic(1.0), fail_count_before_recovery=0)])
    rt, env = _runtime(sure)
    assert all(rt.intercept(env, ToolCall("list_records", {}), n) for n in range(1, 200))

    def pattern():
        task = make_task(faults=[FaultSpec("auth_failure", Probabilistic(0.3), persistent=True)])
        rt, env = _runtime(task)
        return [rt.intercept(env, ToolCall("list_records", {}), n) is not None for n in range(1, 300)]

    first = pattern()
    assert first == pattern()
    assert 0.2 < sum(first) / len(first) < 0.4


def test_nth_call_drift_applies_on_firing():
    task = make_task(faults=[FaultSpec("schema_drift", NthCall(2), target_tool="read_record",
                                       param_rename_map={"id": "record_id"})])
    rt, env = _runtime(task)
    call = ToolCall("read_record", {"id": "r1"})
    rt.drift_before_validation(env, call, 1)
    assert env.validate_call(call) is None
    rt.drift_before_validation(env, call, 2)
    err = rt.attribute_validation_error(call, env.validate_call(call))
    assert err.code == "invalid_arguments" and err.fault_context.fault_type == "schema_drift"


def _invalid(unknown=(), missing=()):
    return ErrorPayload("invalid_arguments", "bad call", unknown_params=tuple(unknown),
                        missing_params=tuple(missing))


def test_vague_rewrite_strips_hints():
    env = make_environment(make_task())
    call = ToolCall("read_record", {})
    out = rewrite_payload("vague", _invalid(missing=["id"]), env, call, env.effective_schemas)
    assert out.message == "request failed"
    assert out.unknown_params == () and out.missing_params == () and out.retry_after_steps is None
    assert out.code == "invalid_arguments"


def test_misleading_param_uses_cyclic_successor():
    env = make_environment(make_task())
    call = ToolCall("create_record", {"id": "x", "title": "t"})
    out = rewrite_payload("misleading_param", _invalid(unknown=["title"]), env, call,
                          tuple(env.effective_schemas))
    assert list(out.unknown_params) == ["fields"]
    out = rewrite_payload("misleading_param", _invalid(unknown=["fields"]), env, call,
                          tuple(env.effective_schemas))
    assert list(out.unknown_params) == ["id"]


def test_wrong_tool_hint_names_another_tool():
    env = make_environment(make_task())
    call = ToolCall("read_record", {})
    out = rewrite_payload("wrong_tool_hint", _invalid(missing=["id"]), env, call,
                          tuple(env.effective_schemas))
    assert "update_record" in out.message and list(out.missing_params) == ["id"]


def test_no_rewrite_spec_leaves_payload():
    task = make_task(faults=[FaultSpec("timeout", ToolName("read_record"), fail_count_before_recovery=0)])
    rt, env = _runtime(task)
    payload = rt.intercept(env, ToolCall("read_record", {"id": "r1"}), 1)
    assert rt.rewrite_error(env, ToolCall("read_record", {"id": "r1"}), payload, 1) == (payload, None)


def test_rewrite_keeps_fault_context():
    task = make_task(faults=[FaultSpec("timeout", ToolName("read_record"), fail_count_before_recovery=0),
                             FaultSpec("adversarial_rewrite", ToolName("read_record"), style="vague")])
    rt, env = _runtime(task)
    call = ToolCall("read_record", {"id": "r1"})
    payload = rt.intercept(env, call, 1)
    visible, index = rt.rewrite_error(env, call, payload, 1)
    assert index == 1 and visible.fault_context == payload.fault_context
    assert "fault_context" not in visible.to_dict(visible=True)
