"""Record a trace, replay it, then flip one byte and replay again."""

from __future__ import annotations

from faultbench.baselines import SchemaRepairAgent
from faultbench.generator import generate_split, make_profile
from faultbench.runner import replay_trace, run_episode


def main() -> None:
    task = next(t for t in generate_split(make_profile("small", seed=0), "test", 40) if t.fault_plan)
    data = run_episode(task, SchemaRepairAgent()).to_bytes()
    print(f"{task.task_id}: {len(data.splitlines())} trace lines")
    print("fresh replay:", replay_trace(data, task))
    tampered = bytearray(data)
    tampered[len(data) // 3] ^= 0x01
    print("tampered replay:", replay_trace(bytes(tampered), task))


if __name__ == "__main__":
    main()
