from __future__ import annotations

from importlib import resources

import pytest
from hypothesis import settings

from csmiles.corpus import property_corpus

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

DATA = resources.files("csmiles.data")


@pytest.fixture(scope="session")
def corpus() -> list[str]:
    return property_corpus()


@pytest.fixture(scope="session")
def toy_path():
    return DATA.joinpath("toy_reactions.txt")


@pytest.fixture(scope="session")
def sample_path():
    return DATA.joinpath("sample_reactions.txt")


# One PASS/FAIL line per acceptance criterion, printed in the terminal summary.
_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    detail = dict(report.user_properties).get("detail", "")
    if report.when == "call" or (report.when == "setup" and report.failed):
        _ACCEPTANCE[name] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        outcome, detail = _ACCEPTANCE[name]
        number = int(name.split("_")[2])
        label = " ".join(name.split("_")[3:])
        terminalreporter.write_line(f"{outcome}  criterion {number:2d} {label}: {detail}")
