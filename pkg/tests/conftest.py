from __future__ import annotations

import pytest

from faultbench.generator import make_profile, generate_split

# acceptance tests append (criterion, passed, detail) here
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE, key=lambda r: int(r[0].split()[0][1:])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="session")
def small_tasks():
    """120 generated tasks covering every domain and fault family."""
    return generate_split(make_profile("small", seed=11), "test", 120)
