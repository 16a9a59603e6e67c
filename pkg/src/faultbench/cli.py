"""``faultbench`` command line: generate, evaluate, replay, report, quality-report, verify.

Exit codes: 0 ok, 1 validation or verification failure, 2 usage error.
The output directory defaults to ``$FAULTBENCH_OUT`` when set.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shlex
import sys
from pathlib import Path

from faultbench.baselines import BASELINES
from faultbench.canonical import canonical_bytes, parse
from faultbench.evaluation import evaluate, write_evaluation, write_tables
from faultbench.external import AgentConfigError
from faultbench.generator import (
    PROFILE_SIZES,
    GenerationError,
    generate,
    make_profile,
    quality_report,
    read_manifest,
    split_filename,
    verify_manifest,
    write_dataset,
)
from faultbench.model import MalformedRecord, TaskRecord, load_tasks
from faultbench.runner import replay_trace
from faultbench.scoring import fault_table, overall_table

OK, FAILED, USAGE = 0, 1, 2
OUT_ENV = "FAULTBENCH_OUT"


class UsageError(Exception):
    pass


def _default_out(fallback: str) -> Path:
    return Path(os.environ.get(OUT_ENV, fallback))


def _parse_mix(text: str) -> dict[str, float]:
    mix = {}
    for part in text.split(","):
        name, sep, value = part.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected name=share, got {part!r}")
        try:
            mix[name.strip()] = float(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad share in {part!r}") from None
    return mix


def _parse_split(text: str) -> tuple[str, int]:
    name, sep, value = text.partition("=")
    if not sep or not name or not value.isdigit():
        raise argparse.ArgumentTypeError(f"expected name=count, got {text!r}")
    return name, int(value)


def _parse_seed(text: str) -> int:
    try:
        seed = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed {text!r}") from None
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_generate(args: argparse.Namespace) -> int:
    overrides = dict(args.split or [])
    if args.profile is None:
        name = "custom" if overrides else "default"
    else:
        name = args.profile
    extra = {}
    if args.fault_mix:
        extra["fault_mix"] = args.fault_mix
    if args.domain_mix:
        extra["domain_mix"] = args.domain_mix
    profile = make_profile(name, seed=args.seed, split_overrides=overrides,
                           policy_pressure=args.policy_pressure, **extra)
    try:
        profile.check()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        splits, manifest = generate(profile)
    except GenerationError as exc:
        print(f"generation aborted: {exc}", file=sys.stderr)
        return FAILED
    out = args.out or _default_out("data")
    report = write_dataset(out, splits, manifest)
    for split, entry in manifest["splits"].items():
        q = report["splits"][split]
        print(f"{split}: {entry['count']} tasks  sha256={entry['sha256'][:16]}  "
              f"instr_uniq={q['instruction_uniqueness']:.4f}  "
              f"state_uniq={q['initial_state_uniqueness']:.4f}")
    print(f"wrote {out}")
    return OK


def _load_dataset(data: Path, split: str, verify: bool) -> list[TaskRecord] | None:
    if not data.is_dir():
        raise UsageError(f"dataset directory {data} does not exist")
    if verify:
        manifest_path = data / "manifest.json"
        if not manifest_path.exists():
            print(f"no manifest in {data}; pass --no-verify to run anyway", file=sys.stderr)
            return None
        manifest = read_manifest(data)
        problems = verify_manifest(manifest, data)
        if problems:
            for p in problems:
                print(f"manifest mismatch: {p}", file=sys.stderr)
            print("refusing to run; pass --no-verify to override", file=sys.stderr)
            return None
        if split not in manifest.get("splits", {}):
            print(f"split {split!r} not in manifest", file=sys.stderr)
            return None
    path = data / split_filename(split)
    if not path.exists():
        print(f"missing split file {path}", file=sys.stderr)
        return None
    try:
        return load_tasks(path.read_bytes())
    except (ValueError, MalformedRecord) as exc:
        print(f"cannot parse {path}: {exc}", file=sys.stderr)
        return None


def cmd_evaluate(args: argparse.Namespace) -> int:
    if args.parallel < 1:
        raise UsageError("--parallel must be >= 1")
    tasks = _load_dataset(args.data, args.split, not args.no_verify)
    if tasks is None:
        return FAILED
    if args.limit is not None:
        tasks = tasks[:args.limit]
    command = shlex.split(args.agent_cmd) if args.agent_cmd else None
    try:
        ev = evaluate(tasks, agent=None if command else args.agent, command=command,
                      parallel=args.parallel, label=args.label)
    except AgentConfigError as exc:
        print(str(exc), file=sys.stderr)
        return FAILED
    out = args.out or _default_out("runs") / ev.agent
    print(write_evaluation(out, ev), end="")
    print(f"wrote {len(ev.traces)} traces and report to {out}")
    return OK


def _trace_task_id(path: Path, data: bytes) -> str | None:
    first = data.split(b"\n", 1)[0]
    try:
        return parse(first)["task_id"]
    except (ValueError, KeyError, TypeError):
        pass
    suffix = ".trace.jsonl"
    return path.name[:-len(suffix)] if path.name.endswith(suffix) else None


def cmd_replay(args: argparse.Namespace) -> int:
    if not args.trace.exists():
        raise UsageError(f"trace {args.trace} does not exist")
    data = args.trace.read_bytes()
    task_id = args.task_id or _trace_task_id(args.trace, data)
    tasks = _load_dataset(args.data, args.split, not args.no_verify)
    if tasks is None:
        return FAILED
    task = next((t for t in tasks if t.task_id == task_id), None)
    if task is None:
        print(f"task {task_id!r} not found in split {args.split!r}", file=sys.stderr)
        return FAILED
    verdict = replay_trace(data, task)
    print(verdict)
    return OK if verdict.ok else FAILED


def cmd_report(args: argparse.Namespace) -> int:
    reports = []
    for path in args.reports:
        if not path.exists():
            raise UsageError(f"report {path} does not exist")
        reports.append(json.loads(path.read_text(encoding="utf-8")))
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        print(write_tables(args.out, reports), end="")
    else:
        print(overall_table(reports) + "\n" + fault_table(reports), end="")
    return OK


def cmd_quality_report(args: argparse.Namespace) -> int:
    if not args.data.is_dir():
        raise UsageError(f"dataset directory {args.data} does not exist")
    manifest_path = args.data / "manifest.json"
    if manifest_path.exists():
        names = list(read_manifest(args.data)["splits"])
    else:
        names = sorted(p.name[:-len(".tasks.jsonl")] for p in args.data.glob("*.tasks.jsonl"))
    splits = {n: load_tasks((args.data / split_filename(n)).read_bytes()) for n in names}
    report = quality_report(splits)
    body = canonical_bytes(report) + b"\n"
    if args.out:
        args.out.write_bytes(body)
    print(json.dumps(report, indent=2, sort_keys=True))
    return OK


def cmd_verify(args: argparse.Namespace) -> int:
    if not (args.data / "manifest.json").exists():
        raise UsageError(f"no manifest in {args.data}")
    problems = verify_manifest(read_manifest(args.data), args.data)
    for p in problems:
        print(f"mismatch: {p}")
    if not problems:
        print("ok")
    return FAILED if problems else OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="faultbench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a dataset with manifest and quality report")
    g.add_argument("--profile", choices=sorted(PROFILE_SIZES))
    g.add_argument("--seed", type=_parse_seed, default=0)
    g.add_argument("--split", type=_parse_split, action="append", metavar="NAME=COUNT",
                   help="override one split's size (repeatable)")
    g.add_argument("--fault-mix", type=_parse_mix, metavar="FAMILY=SHARE,...")
    g.add_argument("--domain-mix", type=_parse_mix, metavar="DOMAIN=SHARE,...")
    g.add_argument("--policy-pressure", type=float, default=0.0,
                   help="share of tasks whose policy rule the reference plan breaks")
    g.add_argument("--out", type=Path)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="run one agent over a split")
    e.add_argument("--data", type=Path, default=Path("data"))
    e.add_argument("--split", default="test")
    who = e.add_mutually_exclusive_group()
    who.add_argument("--agent", choices=sorted(BASELINES), default="heuristic")
    who.add_argument("--agent-cmd", help="external agent command speaking the wire protocol")
    e.add_argument("--label", help="agent name used in the report")
    e.add_argument("--parallel", type=int, default=1)
    e.add_argument("--limit", type=int, help="only the first N tasks of the split")
    e.add_argument("--no-verify", action="store_true", help="skip the manifest check")
    e.add_argument("--out", type=Path)
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("replay", help="re-execute a trace and compare it byte for byte")
    r.add_argument("--trace", type=Path, required=True)
    r.add_argument("--data", type=Path, default=Path("data"))
    r.add_argument("--split", default="test")
    r.add_argument("--task-id", help="defaults to the id recorded in the trace")
    r.add_argument("--no-verify", action="store_true")
    r.set_defaults(func=cmd_replay)

    p = sub.add_parser("report", help="combine report.json files into tables")
    p.add_argument("reports", type=Path, nargs="+")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_report)

    q = sub.add_parser("quality-report", help="uniqueness, balance and duplicate-id summary")
    q.add_argument("--data", type=Path, default=Path("data"))
    q.add_argument("--out", type=Path)
    q.set_defaults(func=cmd_quality_report)

    v = sub.add_parser("verify", help="check split files against the manifest")
    v.add_argument("--data", type=Path, default=Path("data"))
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"faultbench: error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
