"""Run the three built-in agents on a generated test split and print both tables."""

from __future__ import annotations

from faultbench.baselines import BASELINES
from faultbench.generator import generate_split, make_profile
from faultbench.evaluation import evaluate
from faultbench.scoring import fault_table, overall_table


def main() -> None:
    tasks = generate_split(make_profile("default", seed=0), "test", 400)
    reports = [evaluate(tasks, agent=name).report for name in BASELINES]
    print(overall_table(reports))
    print(fault_table(reports))


if __name__ == "__main__":
    main()
