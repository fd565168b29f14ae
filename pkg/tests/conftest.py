import re
from collections import defaultdict

_CRITERION = re.compile(r"test_criterion_(\d+)_")
_outcomes: dict = defaultdict(list)


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes[int(m.group(1))].append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        results = _outcomes[number]
        ok = all(outcome == "passed" for _, outcome in results)
        names = ", ".join(name for name, _ in results)
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  ({names})")
