"""Run a split with one agent and write traces, report and tables."""

from __future__ import annotations

import threading
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from faultbench.baselines import make_baseline
from faultbench.canonical import canonical_bytes
from faultbench.external import DEFAULT_REPLY_TIMEOUT, ExternalAgent
from faultbench.model import TaskRecord
from faultbench.runner import EpisodeTrace, run_episode
from faultbench.scoring import aggregate, fault_table, figure_data, overall_table, score_task, table_rows


class _ExternalAgents:
    """One long-lived subprocess per worker thread, restarted after a protocol error."""

    def __init__(self, command: list[str], reply_timeout: float) -> None:
        self.command = command
        self.reply_timeout = reply_timeout
        self.local = threading.local()
        self.lock = threading.Lock()
        self.started: list[ExternalAgent] = []

    def get(self) -> ExternalAgent:
        agent = getattr(self.local, "agent", None)
        if agent is None or agent.proc.poll() is not None:
            agent = ExternalAgent(self.command, self.reply_timeout)
            self.local.agent = agent
            with self.lock:
                self.started.append(agent)
        return agent

    def discard(self) -> None:
        agent = getattr(self.local, "agent", None)
        if agent is not None:
            agent.close()
            self.local.agent = None

    def close(self) -> None:
        for agent in self.started:
            agent.close()


def _map(fn: Callable[[TaskRecord], EpisodeTrace], tasks: Sequence[TaskRecord],
         parallel: int) -> list[EpisodeTrace]:
    if parallel <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(fn, tasks))


def run_builtin(tasks: Sequence[TaskRecord], name: str, parallel: int = 1) -> list[EpisodeTrace]:
    make_baseline(name)  # fail fast on a bad name
    return _map(lambda t: run_episode(t, make_baseline(name)), tasks, parallel)


def run_external(tasks: Sequence[TaskRecord], command: list[str], parallel: int = 1,
                 reply_timeout: float = DEFAULT_REPLY_TIMEOUT) -> list[EpisodeTrace]:
    agents = _ExternalAgents(command, reply_timeout)

    def one(task: TaskRecord) -> EpisodeTrace:
        trace = run_episode(task, agents.get())
        if trace.termination == "agent_protocol_error":
            agents.discard()
        return trace

    try:
        return _map(one, tasks, parallel)
    finally:
        agents.close()


@dataclass
class Evaluation:
    agent: str
    tasks: list[TaskRecord]
    traces: list[EpisodeTrace]
    report: dict


def evaluate(tasks: Sequence[TaskRecord], agent: str | None = None,
             command: list[str] | None = None, parallel: int = 1,
             label: str | None = None) -> Evaluation:
    """Exactly one of ``agent`` (builtin name) or ``command`` must be given."""
    if (agent is None) == (command is None):
        raise ValueError("give either a builtin agent name or an external command")
    tasks = list(tasks)
    if agent is not None:
        traces = run_builtin(tasks, agent, parallel)
    else:
        traces = run_external(tasks, command, parallel)
    name = label or agent or "external"
    metrics = [score_task(tr, t) for tr, t in zip(traces, tasks)]
    return Evaluation(name, tasks, traces, aggregate(metrics, tasks, name))


def trace_filename(task_id: str) -> str:
    return f"{task_id}.trace.jsonl"


def write_tables(out: Path, reports: Sequence[dict]) -> str:
    text = overall_table(reports) + "\n" + fault_table(reports)
    (out / "tables.txt").write_text(text, encoding="utf-8")
    (out / "tables.json").write_bytes(canonical_bytes(table_rows(reports)) + b"\n")
    return text


def write_evaluation(out: Path, ev: Evaluation) -> str:
    """Write traces, report, tables and curve data; return the printed tables."""
    traces_dir = out / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)
    for trace in ev.traces:
        (traces_dir / trace_filename(trace.task_id)).write_bytes(trace.to_bytes())
    (out / "report.json").write_bytes(canonical_bytes(ev.report) + b"\n")
    (out / "budget_curve.csv").write_text("k,S(k)\n" + figure_data(ev.report), encoding="utf-8")
    return write_tables(out, [ev.report])
