from collections import defaultdict
from fractions import Fraction

import pytest

from leveldelete.family_catalog import make_system

_criteria: dict[int, list] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[mark.args[0]].append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        runs = _criteria[number]
        failed = [name for name, outcome in runs if outcome != "passed"]
        status = "FAIL" if failed else "PASS"
        line = f"criterion {number:2d}: {status}  ({len(runs) - len(failed)}/{len(runs)} checks)"
        if failed:
            line += "  failing: " + ", ".join(failed)
        terminalreporter.write_line(line)


def seed_systems(exact: bool = False):
    """The reference parameter matrix used across the suite, keyed by label."""
    half = Fraction(1, 2) if exact else 0.5
    one = Fraction(1) if exact else 1.0
    return {
        "H": make_system("H"),
        "L g=1": make_system("L", g=one),
        "L g=5/2": make_system("L", g=5 * half),
        "J g=1,h=2": make_system("J", g=one, h=2 * one),
        "J g=3/2,h=3/2": make_system("J", g=3 * half, h=3 * half),
        "MP a=1": make_system("MP", a=one),
        "CH a1=1,a2=2": make_system("CH", a1=one, a2=2 * one),
        "W": make_system("W", a1=one, a2=3 * half, a3=2 * one, a4=5 * half),
        "AW": make_system("AW", a1=0.3, a2=-0.2, a3=0.1 + 0.2j, a4=0.1 - 0.2j, q=0.5),
    }


def one_per_family():
    s = seed_systems()
    return {k: s[k] for k in ("H", "L g=1", "J g=1,h=2", "MP a=1", "CH a1=1,a2=2", "W", "AW")}


@pytest.fixture(scope="session")
def seeds():
    return seed_systems()


@pytest.fixture(scope="session")
def families():
    return one_per_family()
