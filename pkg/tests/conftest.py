import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from failsim.config import default_config_path, load_config  # noqa: E402

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion covered by the test")


@pytest.fixture(scope="session")
def servo():
    return load_config(default_config_path())


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    num, title = mark.args
    entry = _criteria.setdefault(num, {"title": title, "ok": True, "cells": []})
    if rep.failed:
        entry["ok"] = False
        entry["cells"].append(item.callspec.id if hasattr(item, "callspec") else item.name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        e = _criteria[num]
        line = f"[{'PASS' if e['ok'] else 'FAIL'}] criterion {num:2d}: {e['title']}"
        if e["cells"]:
            line += f"  (failed: {', '.join(e['cells'])})"
        terminalreporter.write_line(line)
