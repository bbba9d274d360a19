"""Collects acceptance outcomes and prints one line per criterion after the run."""

from collections import defaultdict

_OUTCOMES = defaultdict(list)
_DETAILS = defaultdict(list)


def pytest_runtest_logreport(report):
    marks = dict(report.user_properties).get("criterion")
    if marks is None:
        return
    if report.when == "call" or report.failed:
        _OUTCOMES[marks].append(report.passed)
        _DETAILS[marks].extend(v for k, v in report.user_properties if k == "detail")


def pytest_runtest_setup(item):
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        item.user_properties.append(("criterion", mark.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        ok = all(_OUTCOMES[n])
        detail = "; ".join(_DETAILS[n])
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else ""))
