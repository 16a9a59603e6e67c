"""Line-delimited JSON wire protocol for agents that live in another process.

Harness to agent, one message per line::

    {"type": "reset", "task_id", "instruction", "tool_schemas", "budgets", "goal_annotation"}
    {"type": "observe", "step", "remaining", "last_result"}

Agent to harness::

    {"type": "ready"}
    {"type": "act", "action": {"call": {"tool": ..., "arguments": {...}}}}
    {"type": "act", "action": "finish"}

Unknown fields are ignored. A reply that is late, unparsable, or of the
wrong type ends the episode with ``agent_protocol_error``.
"""

from __future__ import annotations

import json
import queue
import subprocess
import sys
import threading
from typing import IO, Any

from faultbench.runner import (
    Action,
    AgentProtocolError,
    Briefing,
    Observation,
    action_from_dict,
    action_to_dict,
)

DEFAULT_REPLY_TIMEOUT = 10.0


class AgentConfigError(RuntimeError):
    """The external agent could not be started."""


class ExternalAgent:
    """Proxy that forwards reset/act to a subprocess over stdin/stdout."""

    def __init__(self, command: list[str], reply_timeout: float = DEFAULT_REPLY_TIMEOUT) -> None:
        self.command = list(command)
        self.reply_timeout = reply_timeout
        try:
            self.proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise AgentConfigError(f"cannot start agent {self.command!r}: {exc}") from exc
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self._briefing: Briefing | None = None

    def _pump(self) -> None:
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _exchange(self, message: dict) -> dict:
        if self.proc.poll() is not None:
            raise AgentProtocolError(f"agent exited with status {self.proc.returncode}")
        try:
            self.proc.stdin.write(json.dumps(message, sort_keys=True) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise AgentProtocolError("agent closed its input") from None
        while True:
            try:
                line = self._lines.get(timeout=self.reply_timeout)
            except queue.Empty:
                raise AgentProtocolError("agent reply deadline exceeded") from None
            if line is None:
                raise AgentProtocolError("agent closed its output")
            if line.strip():
                break
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            raise AgentProtocolError("agent reply is not valid JSON") from None
        if not isinstance(reply, dict):
            raise AgentProtocolError("agent reply is not an object")
        return reply

    def reset(self, briefing: Briefing) -> None:
        reply = self._exchange(briefing.to_message())
        if reply.get("type") != "ready":
            raise AgentProtocolError(f"expected ready, got {reply.get('type')!r}")

    def act(self, observation: Observation) -> Action:
        reply = self._exchange(observation.to_message())
        if reply.get("type") != "act" or "action" not in reply:
            raise AgentProtocolError(f"expected act, got {reply.get('type')!r}")
        return action_from_dict(reply["action"])

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()

    def __enter__(self) -> ExternalAgent:
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()


def spawn_external_agent(command: list[str],
                         reply_timeout: float = DEFAULT_REPLY_TIMEOUT) -> ExternalAgent:
    return ExternalAgent(command, reply_timeout)


def serve(agent: Any, stdin: IO[str] = sys.stdin, stdout: IO[str] = sys.stdout) -> None:
    """Expose an in-process agent over the wire protocol until stdin closes."""
    briefing: Briefing | None = None

    def emit(obj: dict) -> None:
        stdout.write(json.dumps(obj, sort_keys=True) + "\n")
        stdout.flush()

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        msg = json.loads(line)
        kind = msg.get("type")
        if kind == "reset":
            briefing = Briefing.from_message(msg)
            agent.reset(briefing)
            emit({"type": "ready"})
        elif kind == "observe" and briefing is not None:
            obs = Observation(briefing, msg["step"], msg["remaining"], msg.get("last_result"))
            emit({"type": "act", "action": action_to_dict(agent.act(obs))})
        else:
            emit({"type": "error", "message": f"unexpected message {kind!r}"})
