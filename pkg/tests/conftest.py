"""Shared fixtures and the per-criterion acceptance summary."""

import numpy as np
import pytest

_RESULTS = {}  # criterion -> list of (test name, outcome, detail)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    n, title = mark.args
    if hasattr(rep, "wasxfail"):
        status = "FAIL"  # known, documented shortfall
    else:
        status = "PASS" if rep.passed else "FAIL"
    detail = dict(item.user_properties).get("detail", "")
    _RESULTS.setdefault(n, []).append((title, item.name, status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_RESULTS):
        parts = _RESULTS[n]
        status = "PASS" if all(p[2] == "PASS" for p in parts) else "FAIL"
        tr.write_line(f"criterion {n:2d}: {status}  {parts[0][0]}")
        for _, name, st, detail in parts:
            tr.write_line(f"    {st}  {name}" + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def detail(record_property):
    """Attach a measured-value note to the acceptance summary line."""
    def note(text):
        record_property("detail", text)
        print(text)
    return note
