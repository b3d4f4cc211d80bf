import os
from collections import OrderedDict

import pytest

DATA = os.path.join(os.path.dirname(__file__), "data")

# criterion id -> (title, ["ok" | "FAIL:<test>", ...])
_criteria: "OrderedDict[str, tuple[str, list[str]]]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(cid, title): acceptance criterion covered by this test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            cid, title = mark.args
            _criteria.setdefault(cid, (title, []))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if not mark:
        return
    results = _criteria[mark.args[0]][1]
    if report.failed or hasattr(report, "wasxfail"):
        results.append(f"FAIL:{item.name}")
    elif report.when == "call" and report.passed:
        results.append("ok")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid, (title, outcomes) in _criteria.items():
        fails = sorted({o[5:] for o in outcomes if o.startswith("FAIL:")})
        if not outcomes:
            status = "NOT RUN"
        elif fails:
            status = "FAIL"
        else:
            status = "PASS"
        line = f"{cid:>5} {status:<7} {title}"
        if fails:
            line += f"  [failing: {', '.join(fails)}]"
        tr.write_line(line)


@pytest.fixture
def data_path():
    return lambda name: os.path.join(DATA, name)
