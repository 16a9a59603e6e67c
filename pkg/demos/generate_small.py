"""Generate the small profile in memory and print its quality report."""

from __future__ import annotations

import json

from faultbench.generator import generate, make_profile, quality_report


def main() -> None:
    splits, manifest = generate(make_profile("small", seed=0))
    for name, entry in manifest["splits"].items():
        print(f"{name}: {entry['count']} tasks, sha256 {entry['sha256'][:16]}")
    print(json.dumps(quality_report(splits), indent=2, sort_keys=True))
    task = splits["test"][0]
    print("first test task:", task.task_id, "-", task.instruction)


if __name__ == "__main__":
    main()
