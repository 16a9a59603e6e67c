"""Deterministic dataset generation, manifests and quality reports.

Tasks come from per-intent templates filled from small variant pools, so the
corpus has plenty of repeated surface forms without any language model. Every
draw goes through :mod:`faultbench.rng` streams labelled
``gen/<split>/<index>/<field>``; the output is a pure function of the profile.

Domains and fault families are assigned by largest-remainder quotas and then
shuffled, so histograms never drift by more than one task per bucket.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from faultbench.baselines import HeuristicAgent, PlanStep, build_plan
from faultbench.canonical import canonical_bytes, parse, sha256_hex
from faultbench.environments import compute_conflicts
from faultbench.model import (
    BENCHMARK_VERSION,
    DOMAIN_TOOLS,
    DOMAINS,
    ArgPattern,
    Budget,
    FaultSpec,
    ForbiddenTool,
    MaxCallsPerTool,
    MinSuccessfulToolCalls,
    NthCall,
    PolicyRule,
    RequireSuccessBefore,
    StateContains,
    StateEquals,
    StateExists,
    StateKeyValue,
    TaskRecord,
    ToolName,
    dump_tasks,
    load_tasks,
    validate_task,
)
from faultbench.rng import SeededStream, stream
from faultbench.runner import run_episode
from faultbench.scoring import FAMILIES, check_criteria

logger = logging.getLogger(__name__)

GENERATOR_VERSION = "1.0.0"
SPLIT_ORDER = ("train", "dev", "test")

RELEASED_FAULT_MIX = {
    "none": 0.0,
    "schema_drift": 0.2,
    "rate_limit": 0.2,
    "timeout": 0.2,
    "auth_failure": 0.2,
    "adversarial_rewrite": 0.2,
}
UNIFORM_DOMAINS = {d: 0.25 for d in DOMAINS}

PROFILE_SIZES = {
    "small": {"train": 200, "dev": 40, "test": 100},
    "default": {"train": 1000, "dev": 200, "test": 400},
    "large": {"train": 5000, "dev": 800, "test": 1000},
}


class GenerationError(RuntimeError):
    """A generated record failed validation; generation stops."""


@dataclass
class GenerationProfile:
    name: str = "default"
    split_sizes: dict[str, int] = field(default_factory=lambda: dict(PROFILE_SIZES["default"]))
    seed: int = 0
    fault_mix: dict[str, float] = field(default_factory=lambda: dict(RELEASED_FAULT_MIX))
    domain_mix: dict[str, float] = field(default_factory=lambda: dict(UNIFORM_DOMAINS))
    # share of tasks given a policy rule the plan actually breaks
    policy_pressure: float = 0.0

    def check(self) -> None:
        for label, mix, allowed in (("fault_mix", self.fault_mix, FAMILIES),
                                    ("domain_mix", self.domain_mix, DOMAINS)):
            unknown = set(mix) - set(allowed)
            if unknown:
                raise ValueError(f"{label} has unknown buckets {sorted(unknown)}")
            if any(v < 0 for v in mix.values()) or abs(sum(mix.values()) - 1.0) > 1e-9:
                raise ValueError(f"{label} shares must be non-negative and sum to 1")
        if not self.split_sizes or any(n <= 0 for n in self.split_sizes.values()):
            raise ValueError("split sizes must be positive")
        if not 0.0 <= self.policy_pressure <= 1.0:
            raise ValueError("policy_pressure must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "split_sizes": dict(self.split_sizes),
            "seed": self.seed,
            "fault_mix": dict(self.fault_mix),
            "domain_mix": dict(self.domain_mix),
            "policy_pressure": self.policy_pressure,
        }


def make_profile(name: str = "default", seed: int = 0,
                 split_overrides: dict[str, int] | None = None, **kwargs: Any) -> GenerationProfile:
    """Named sizing plus explicit per-split overrides.

    A name outside the table gives a custom profile holding only the overrides.
    """
    sizes = dict(PROFILE_SIZES.get(name, {}))
    if split_overrides:
        if name not in PROFILE_SIZES:
            sizes = {}
        sizes.update(split_overrides)
    return GenerationProfile(name=name, split_sizes=sizes, seed=seed, **kwargs)


# ---------------------------------------------------------------------------
# Balanced assignment
# ---------------------------------------------------------------------------


def largest_remainder(n: int, shares: dict[str, float]) -> dict[str, int]:
    """Integer counts summing to ``n`` that track ``shares`` within one unit."""
    raw = {k: n * v for k, v in shares.items()}
    counts = {k: int(r) for k, r in raw.items()}
    left = n - sum(counts.values())
    order = sorted(shares, key=lambda k: (-(raw[k] - counts[k]), list(shares).index(k)))
    for k in order[:left]:
        counts[k] += 1
    return counts


def balanced_labels(n: int, shares: dict[str, float], rng: SeededStream) -> list[str]:
    counts = largest_remainder(n, shares)
    labels = [k for k in shares for _ in range(counts[k])]
    rng.shuffle(labels)
    return labels


# ---------------------------------------------------------------------------
# Variant pools
# ---------------------------------------------------------------------------

RECORD_PREFIXES = ("cust", "ord", "tkt")
RECORD_TITLES = (
    "Quarterly review", "Vendor onboarding", "Billing dispute", "Renewal notice",
)
FIELD_VALUES = {
    "status": ("open", "closed", "pending", "blocked"),
    "priority": ("low", "high"),
}
VERBS = {
    "create_record": ("Create", "Add", "Register"),
    "update_record": ("Update", "Change", "Modify"),
    "delete_record": ("Delete", "Remove", "Purge"),
    "lookup_record": ("Look up", "Inspect", "Read"),
    "answer_question": ("Find", "Report", "Look up", "Determine"),
    "create_file": ("Create", "Write"),
    "append_file": ("Append", "Add"),
    "move_file": ("Move", "Relocate"),
    "delete_file": ("Delete", "Remove"),
    "create_event": ("Schedule", "Book", "Create"),
    "reschedule_event": ("Reschedule", "Move"),
    "cancel_event": ("Cancel", "Drop"),
}
ENTITIES = ("Aster", "Borealis", "Cobalt", "Dune", "Ember", "Fjord", "Garnet", "Helix",
            "Iris", "Juniper", "Kestrel", "Lumen")
ATTRIBUTES = {
    "launch year": ("2019", "2020", "2021", "2022", "2023"),
    "home port": ("Lisbon", "Oslo", "Kobe", "Perth"),
    "lead engineer": ("Ines", "Tomas", "Mira", "Raj"),
    "codename": ("falcon", "otter", "lynx", "heron"),
}
FILLER = ("archived", "internal", "draft", "public")
DIRS = ("docs", "notes", "reports", "src")
FILE_STEMS = ("readme", "todo", "summary", "plan", "log")
FILE_EXTS = (".txt", ".md")
FILE_LINES = ("hello", "ship it", "needs review", "ok")
EVENT_TITLES = ("Standup", "Design review", "Planning", "Retro")
SLOTS = tuple(f"{h:02d}:{m:02d}" for h in range(8, 18) for m in (0, 30))

PARAM_RENAMES = {
    "id": ("record_id", "identifier", "item_id"),
    "title": ("record_title", "heading", "name"),
    "fields": ("attributes", "field_map", "values"),
    "text": ("answer_text", "answer", "response"),
    "path": ("file_path", "filepath", "location"),
    "content": ("body", "contents", "data"),
    "src": ("source", "src_path", "from_path"),
    "dst": ("destination", "dst_path", "to_path"),
    "start": ("start_time", "begins", "starts_at"),
    "end": ("end_time", "ends", "ends_at"),
}
STATE_POOL_SIZE = {"crud": 2000, "retrieval": 2000, "files": 2000, "scheduling": 1600}
TOOL_RENAME_SUFFIXES = ("_v2", "_new", "2")


# ---------------------------------------------------------------------------
# Domain templates
# ---------------------------------------------------------------------------


@dataclass
class Draft:
    intent: str
    slots: dict
    instruction: str
    state: dict
    criteria: list


def _record_id(r: SeededStream) -> str:
    return f"{r.choice(RECORD_PREFIXES)}-{1 + r.next_below(8)}"


def _crud(base: SeededStream, r: SeededStream) -> Draft:
    records: dict[str, dict] = {}
    for _ in range(1 + base.next_below(3)):
        rid = _record_id(base)
        key = base.choice(tuple(FIELD_VALUES))
        records[rid] = {"title": base.choice(RECORD_TITLES), "fields": {key: base.choice(FIELD_VALUES[key])}}
    intent = r.choice(("create_record", "update_record", "delete_record", "lookup_record"))
    verb = r.choice(VERBS[intent])
    if intent == "create_record":
        rid = _record_id(r)
        while rid in records:
            rid = _record_id(r)
        title = r.choice(RECORD_TITLES)
        return Draft(intent, {"id": rid, "title": title, "fields": {"status": "open"}},
                     f'{verb} an open record {rid} titled "{title}".',
                     {"records": records},
                     [StateExists(f"records/{rid}"), StateEquals(f"records/{rid}/title", title),
                      StateKeyValue(f"records/{rid}/fields", "status", "open")])
    rid = r.choice(sorted(records))
    if intent == "update_record":
        key = r.choice(tuple(FIELD_VALUES))
        current = records[rid]["fields"].get(key)
        value = r.choice(tuple(v for v in FIELD_VALUES[key] if v != current))
        return Draft(intent, {"id": rid, "fields": {key: value}},
                     f"{verb} record {rid} so that its {key} is {value}.",
                     {"records": records}, [StateKeyValue(f"records/{rid}/fields", key, value)])
    if intent == "delete_record":
        remaining = {k: v for k, v in records.items() if k != rid}
        return Draft(intent, {"id": rid}, f"{verb} record {rid} from the store.",
                     {"records": records}, [StateEquals("records", remaining)])
    return Draft(intent, {"id": rid}, f"{verb} record {rid} after listing the store.",
                 {"records": records}, [MinSuccessfulToolCalls(2)])


def _retrieval(base: SeededStream, r: SeededStream) -> Draft:
    docs: dict[str, dict] = {}
    facts = []
    for n in range(2 + base.next_below(3)):
        entity = base.choice(ENTITIES)
        attr = base.choice(tuple(ATTRIBUTES))
        value = base.choice(ATTRIBUTES[attr])
        doc_id = f"doc-{n + 1}"
        docs[doc_id] = {
            "title": f"{entity} {base.choice(FILLER)} brief",
            "text": f"The {attr} of {entity} is {value}.",
        }
        facts.append((doc_id, entity, attr, value))
    doc_id, entity, attr, value = r.choice(facts)
    verb = r.choice(VERBS["answer_question"])
    return Draft("answer_question",
                 {"query": f"{entity} {attr}", "doc_id": doc_id, "answer": value},
                 f"{verb} the {attr} of {entity} from the document collection and submit it.",
                 {"documents": docs, "answers": []},
                 [StateContains("answers", value)])


def _files(base: SeededStream, r: SeededStream) -> Draft:
    tree: dict[str, dict] = {}
    for d in sorted({base.choice(DIRS) for _ in range(1 + base.next_below(2))}):
        tree[d] = {}
        # at least two files, so a deletion or move never prunes the directory
        size = 2 + base.next_below(2)
        while len(tree[d]) < size:
            tree[d][base.choice(FILE_STEMS) + base.choice(FILE_EXTS)] = base.choice(FILE_LINES)
    dirs = sorted(tree)
    intent = r.choice(("create_file", "append_file", "move_file", "delete_file"))
    verb = r.choice(VERBS[intent])
    if intent == "create_file":
        d = r.choice(dirs)
        name = r.choice(FILE_STEMS) + r.choice(FILE_EXTS)
        while name in tree[d]:
            name = r.choice(FILE_STEMS) + r.choice(FILE_EXTS)
        content = r.choice(FILE_LINES)
        return Draft(intent, {"path": f"{d}/{name}", "content": content},
                     f'{verb} the file {d}/{name} containing "{content}".',
                     {"files": tree}, [StateEquals(f"files/{d}/{name}", content)])
    d = r.choice(dirs)
    name = r.choice(sorted(tree[d]))
    path = f"{d}/{name}"
    if intent == "append_file":
        content = " " + r.choice(FILE_LINES)
        return Draft(intent, {"path": path, "content": content},
                     f'{verb} "{content.strip()}" to {path}.',
                     {"files": tree}, [StateEquals(f"files/{d}/{name}", tree[d][name] + content)])
    remaining = {k: v for k, v in tree[d].items() if k != name}
    if intent == "delete_file":
        return Draft(intent, {"path": path}, f"{verb} the file {path}.",
                     {"files": tree}, [StateEquals(f"files/{d}", remaining)])
    # keep the file name; only free target directories qualify
    targets = [x for x in DIRS if x != d and name not in tree.get(x, {})]
    dst_dir, dst_name = r.choice(targets), name
    dst = f"{dst_dir}/{dst_name}"
    return Draft(intent, {"src": path, "dst": dst}, f"{verb} {path} to {dst}.",
                 {"files": tree},
                 [StateEquals(f"files/{dst_dir}/{dst_name}", tree[d][name]),
                  StateEquals(f"files/{d}", remaining if dst_dir != d
                              else {**remaining, dst_name: tree[d][name]})])


def _free_slot(r: SeededStream, events: dict, length: int, stride: int = 1) -> tuple[str, str]:
    starts = list(range(0, len(SLOTS) - length, stride))
    r.shuffle(starts)
    for s in starts:
        start, end = SLOTS[s], SLOTS[s + length]
        trial = {**events, "_probe": {"start": start, "end": end, "title": ""}}
        if not any("_probe" in pair for pair in compute_conflicts(trial)):
            return start, end
    raise GenerationError("no free calendar slot")


def _scheduling(base: SeededStream, r: SeededStream) -> Draft:
    events: dict[str, dict] = {}
    for n in range(1 + base.next_below(3)):
        length = 1 + base.next_below(2)
        start, end = _free_slot(base, events, length)
        events[f"ev-{n + 1}"] = {"start": start, "end": end, "title": base.choice(EVENT_TITLES)}
    intent = r.choice(("create_event", "reschedule_event", "cancel_event"))
    verb = r.choice(VERBS[intent])
    if intent == "create_event":
        eid = f"ev-{len(events) + 1}"
        # new bookings are one hour on the hour
        start, end = _free_slot(r, events, 2, stride=2)
        title = r.choice(EVENT_TITLES)
        state = {"events": events, "conflicts": [], "allow_overlap": False}
        return Draft(intent, {"id": eid, "start": start, "end": end, "title": title},
                     f'{verb} "{title}" as {eid} from {start} to {end} without overlaps.',
                     state,
                     [StateKeyValue(f"events/{eid}", "start", start),
                      StateKeyValue(f"events/{eid}", "end", end),
                      StateEquals("conflicts", [])])
    if intent == "reschedule_event":
        # add a clashing event, then ask to move it somewhere free
        target = r.choice(sorted(events))
        eid = f"ev-{len(events) + 1}"
        events[eid] = {"start": events[target]["start"], "end": events[target]["end"],
                       "title": r.choice(EVENT_TITLES)}
        others = {k: v for k, v in events.items() if k != eid}
        length = SLOTS.index(events[eid]["end"]) - SLOTS.index(events[eid]["start"])
        start, end = _free_slot(r, others, length)
        state = {"events": events, "conflicts": compute_conflicts(events), "allow_overlap": True}
        return Draft(intent, {"id": eid, "start": start, "end": end},
                     f"{verb} {eid} to {start}-{end} so nothing overlaps.",
                     state,
                     [StateKeyValue(f"events/{eid}", "start", start), StateEquals("conflicts", [])])
    eid = r.choice(sorted(events))
    remaining = {k: v for k, v in events.items() if k != eid}
    state = {"events": events, "conflicts": [], "allow_overlap": False}
    return Draft(intent, {"id": eid}, f"{verb} event {eid}.", state,
                 [StateEquals("events", remaining)])


_BUILDERS = {"crud": _crud, "retrieval": _retrieval, "files": _files, "scheduling": _scheduling}


# ---------------------------------------------------------------------------
# Faults and policies
# ---------------------------------------------------------------------------

FAMILY_VARIANTS = {
    "timeout": ("required/transient", "required/persistent", "optional/transient", "optional/persistent"),
    "schema_drift": ("param_rename", "tool_rename"),
    "adversarial_rewrite": ("misleading_param", "wrong_tool_hint", "vague"),
    "rate_limit": ("tool_name", "arg_pattern"),
    "auth_failure": ("tool_name", "arg_pattern"),
    "none": ("none",),
}


def _essential(plan: list[PlanStep]) -> tuple[int, PlanStep]:
    for i, step in enumerate(plan):
        if not step.optional:
            return i, step
    raise GenerationError("plan has no essential step")


def _gate_trigger(r: SeededStream, step: PlanStep, prefer_pattern: bool):
    strings = [(k, v) for k, v in step.arguments.items() if isinstance(v, str) and v]
    if prefer_pattern and strings:
        param, value = r.choice(strings)
        cut = r.next_below(len(value))
        return ArgPattern(step.tool, param, value[cut:cut + 1 + r.next_below(len(value) - cut)])
    return ToolName(step.tool)


def _drift(r: SeededStream, step: PlanStep, kind: str) -> FaultSpec:
    if kind == "tool_rename" or not step.arguments:
        return FaultSpec("schema_drift", ToolName(step.tool),
                         tool_rename={step.tool: step.tool + r.choice(TOOL_RENAME_SUFFIXES)})
    renamable = [k for k in step.arguments if k in PARAM_RENAMES]
    count = 1 if len(renamable) < 2 or r.next_below(4) else 2
    picked: list[str] = []
    while len(picked) < count:
        name = r.choice(renamable)
        if name not in picked:
            picked.append(name)
    renames = {name: r.choice(PARAM_RENAMES[name]) for name in picked}
    return FaultSpec("schema_drift", ToolName(step.tool), param_rename_map=renames)


def build_faults(r: SeededStream, family: str, variant: str, plan: list[PlanStep],
                 budget: Budget) -> list[FaultSpec]:
    index, step = _essential(plan)
    if family == "none":
        return []
    if family == "timeout":
        placement, persistence = variant.split("/")
        fails = 0 if persistence == "persistent" else 1 + r.next_below(min(2, budget.max_retries))
        if placement == "optional":
            last_essential = max(i for i, s in enumerate(plan) if not s.optional)
            trigger = NthCall(last_essential + 2)
        else:
            trigger = _gate_trigger(r, step, prefer_pattern=r.next_below(3) == 0)
        return [FaultSpec("timeout", trigger, fail_count_before_recovery=fails)]
    if family == "auth_failure":
        return [FaultSpec("auth_failure", _gate_trigger(r, step, variant == "arg_pattern"),
                          persistent=True)]
    if family == "rate_limit":
        return [FaultSpec("rate_limit", _gate_trigger(r, step, variant == "arg_pattern"),
                          retry_after_steps=budget.max_steps + 1 + r.next_below(5),
                          recover_after_failures=0)]
    if family == "schema_drift":
        return [_drift(r, step, variant)]
    if family == "adversarial_rewrite":
        drift = _drift(r, step, "param_rename")
        return [drift, FaultSpec("adversarial_rewrite", ToolName(drift.drift_tool or step.tool),
                                 style=variant)]
    raise GenerationError(f"unknown fault family {family!r}")


def _policy_sentence(rule: PolicyRule) -> str:
    if isinstance(rule, ForbiddenTool):
        return f"Do not call {rule.tool}."
    if isinstance(rule, MaxCallsPerTool):
        return f"Call {rule.tool} at most {rule.limit} times."
    return f"Only call {rule.gated} after {rule.prerequisite} has succeeded."


def build_policy(r: SeededStream, domain: str, plan: list[PlanStep], budget: Budget,
                 binding: bool) -> list[PolicyRule]:
    plan_tools = [s.tool for s in plan]
    _, essential = _essential(plan)
    if binding:
        essential_tools = {s.tool for s in plan if not s.optional}
        skippable = [s.tool for s in plan if s.optional and s.tool not in essential_tools]
        if skippable:
            return [ForbiddenTool(skippable[0])]
        return [MaxCallsPerTool(essential.tool, plan_tools.count(essential.tool))]
    # half the tasks carry no rule at all
    kind = r.next_below(6)
    if kind < 3:
        return []
    kind -= 2
    if kind == 1:
        off_plan = [s.name for s in DOMAIN_TOOLS[domain] if s.name not in plan_tools]
        if off_plan:
            return [ForbiddenTool(off_plan[0])]
        return []
    if kind == 2:
        limit = plan_tools.count(essential.tool) + budget.max_retries
        return [MaxCallsPerTool(essential.tool, limit)]
    before = [s.tool for s in plan[:plan.index(essential)] if s.tool != essential.tool]
    if before:
        return [RequireSuccessBefore(before[0], essential.tool)]
    return []


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def _budget(r: SeededStream) -> Budget:
    steps = r.choice((10, 12, 14))
    return Budget(max_steps=steps, max_tool_calls=steps - r.choice((0, 2)),
                  max_retries=r.choice((2, 3)), per_call_timeout_ms=r.choice((500, 1000, 2000)))


def _task_id(split: str, index: int, record: TaskRecord) -> str:
    body = canonical_bytes(record.with_id(""))
    return f"{split}-{index}-{sha256_hex(body)[:8]}"


def _gold_check(task: TaskRecord) -> str | None:
    """Fault-free replay of the reference plan must succeed, and must need a call."""
    if check_criteria(task.initial_state, [], task.success_criteria):
        return "criteria already hold in the initial state"
    clean = replace(task, fault_plan=(), policy_rules=())
    if run_episode(clean, HeuristicAgent()).termination != "success":
        return "reference plan does not solve the task without faults"
    return None


def generate_task(profile: GenerationProfile, split: str, index: int, domain: str,
                  family: str, variant: str, binding_policy: bool) -> TaskRecord:
    seed = profile.seed
    content = stream(seed, "gen", split, index, "content")
    # the base state comes from a finite per-split pool, so states repeat
    slot = content.next_below(STATE_POOL_SIZE[domain])
    draft = _BUILDERS[domain](stream(seed, "gen", split, "pool", domain, slot), content)
    budget = _budget(stream(seed, "gen", split, index, "budget"))
    annotation = {"intent": draft.intent, "slots": draft.slots}
    plan = build_plan(annotation)
    rules = build_policy(stream(seed, "gen", split, index, "policy"), domain, plan, budget,
                         binding_policy)
    faults = build_faults(stream(seed, "gen", split, index, "faults"), family, variant, plan, budget)
    annotation["policy"] = [rule.to_dict() for rule in rules]
    instruction = " ".join([draft.instruction] + [_policy_sentence(rule) for rule in rules])
    record = TaskRecord(
        task_id="",
        domain=domain,
        instruction=instruction,
        tool_schemas=DOMAIN_TOOLS[domain],
        initial_state=draft.state,
        goal_annotation=annotation,
        success_criteria=tuple(draft.criteria),
        fault_plan=tuple(faults),
        policy_rules=tuple(rules),
        budgets=budget,
        seed=stream(seed, "gen", split, index, "seed").next_u64(),
        version=BENCHMARK_VERSION,
    )
    # normalise through the wire form so in-memory and parsed records are identical
    record = TaskRecord.from_dict(parse(canonical_bytes(record)))
    record = record.with_id(_task_id(split, index, record))
    errors = validate_task(record)
    if errors:
        raise GenerationError(f"{split}[{index}] invalid: " + "; ".join(map(str, errors)))
    problem = _gold_check(record)
    if problem:
        raise GenerationError(f"{split}[{index}] invalid: {problem}")
    return record


def generate_split(profile: GenerationProfile, split: str, count: int) -> list[TaskRecord]:
    seed = profile.seed
    domains = balanced_labels(count, profile.domain_mix, stream(seed, "gen", split, "assign", "domain"))
    families = balanced_labels(count, profile.fault_mix, stream(seed, "gen", split, "assign", "fault"))
    binding_share = {"yes": profile.policy_pressure, "no": 1.0 - profile.policy_pressure}
    binding = balanced_labels(count, binding_share, stream(seed, "gen", split, "assign", "policy"))
    family_totals = Counter(families)
    variants = {
        fam: balanced_labels(total, {v: 1 / len(FAMILY_VARIANTS[fam]) for v in FAMILY_VARIANTS[fam]},
                             stream(seed, "gen", split, "assign", "variant", fam))
        for fam, total in family_totals.items()
    }
    cursor: Counter[str] = Counter()
    tasks = []
    for i in range(count):
        fam = families[i]
        variant = variants[fam][cursor[fam]]
        cursor[fam] += 1
        tasks.append(generate_task(profile, split, i, domains[i], fam, variant, binding[i] == "yes"))
    return tasks


def generate(profile: GenerationProfile) -> tuple[dict[str, list[TaskRecord]], dict]:
    """All splits plus their manifest. Raises GenerationError on any invalid record."""
    profile.check()
    splits = {}
    for name in _ordered(profile.split_sizes):
        splits[name] = generate_split(profile, name, profile.split_sizes[name])
        logger.info("generated %s: %d tasks", name, len(splits[name]))
    ids = Counter(t.task_id for tasks in splits.values() for t in tasks)
    dupes = [k for k, n in ids.items() if n > 1]
    if dupes:
        raise GenerationError(f"duplicate task ids: {dupes[:5]}")
    return splits, build_manifest(profile, splits)


def _ordered(names: Any) -> list[str]:
    known = [s for s in SPLIT_ORDER if s in names]
    return known + sorted(n for n in names if n not in SPLIT_ORDER)


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------


def split_filename(split: str) -> str:
    return f"{split}.tasks.jsonl"


def build_manifest(profile: GenerationProfile, splits: dict[str, list[TaskRecord]]) -> dict:
    return {
        "benchmark_version": BENCHMARK_VERSION,
        "generator_version": GENERATOR_VERSION,
        "seed": profile.seed,
        "profile": profile.to_dict(),
        "splits": {
            name: {"file": split_filename(name), "count": len(tasks),
                   "sha256": sha256_hex(dump_tasks(tasks))}
            for name, tasks in splits.items()
        },
        "frozen": True,
    }


def write_dataset(out: Path, splits: dict[str, list[TaskRecord]], manifest: dict) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    for name, tasks in splits.items():
        (out / split_filename(name)).write_bytes(dump_tasks(tasks))
    (out / "manifest.json").write_bytes(canonical_bytes(manifest) + b"\n")
    report = quality_report(splits)
    (out / "quality_report.json").write_bytes(canonical_bytes(report) + b"\n")
    return report


def read_manifest(directory: Path) -> dict:
    return parse((directory / "manifest.json").read_bytes())


def load_split(directory: Path, split: str) -> list[TaskRecord]:
    return load_tasks((directory / split_filename(split)).read_bytes())


def verify_manifest(manifest: dict, directory: Path) -> list[str]:
    """Empty when every split file hashes to its manifest entry."""
    problems = []
    for name, entry in manifest.get("splits", {}).items():
        path = directory / entry["file"]
        if not path.exists():
            problems.append(f"{name}: missing file {entry['file']}")
            continue
        data = path.read_bytes()
        if sha256_hex(data) != entry["sha256"]:
            problems.append(f"{name}: checksum mismatch")
            continue
        lines = data.count(b"\n")
        if lines != entry["count"]:
            problems.append(f"{name}: {lines} records, manifest says {entry['count']}")
    return problems


def quality_report(splits: dict[str, list[TaskRecord]]) -> dict:
    all_ids = Counter(t.task_id for tasks in splits.values() for t in tasks)
    per_split = {}
    for name, tasks in splits.items():
        n = len(tasks)
        ids = Counter(t.task_id for t in tasks)
        per_split[name] = {
            "tasks": n,
            "instruction_uniqueness": len({t.instruction for t in tasks}) / n if n else None,
            "initial_state_uniqueness":
                len({canonical_bytes(t.initial_state) for t in tasks}) / n if n else None,
            "domains": dict(sorted(Counter(t.domain for t in tasks).items())),
            "fault_families": dict(sorted(Counter(t.fault_family for t in tasks).items())),
            "duplicate_task_ids": sum(c - 1 for c in ids.values()),
        }
    return {
        "splits": per_split,
        "duplicate_task_ids_across_splits": sum(c - 1 for c in all_ids.values()),
    }
