import re

import numpy as np
import pytest


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "skipped"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", getattr(rep, "nodeid", ""))
            if m and rep.when in ("call", "setup") and not (outcome == "passed" and rep.when == "setup"):
                lines.append((int(m.group(1)), m.group(2), outcome.upper()))
    if lines:
        terminalreporter.section("acceptance criteria")
        for num, name, outcome in sorted(lines):
            verdict = {"PASSED": "PASS", "FAILED": "FAIL"}.get(outcome, outcome)
            terminalreporter.write_line(f"criterion {num:2d} {name:<40} {verdict}")
