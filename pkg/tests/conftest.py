import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default",
    deadline=None,
    max_examples=100,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20260417)


_ACCEPTANCE = []


@pytest.fixture
def detail(request):
    """Attach a one-line measurement summary to an acceptance test."""

    def note(text: str):
        request.node.user_properties.append(("detail", text))

    return note


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    notes = "; ".join(v for k, v in report.user_properties if k == "detail")
    name = report.nodeid.split("::")[-1]
    _ACCEPTANCE.append(f"{'PASS' if report.passed else 'FAIL'}  {name}  {notes}")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
