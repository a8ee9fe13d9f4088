import json
import sys
from pathlib import Path

import pytest
from hypothesis import settings

from persistlab.model import Rates

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture
def balanced():
    return Rates(2.0, 1.0, 1.0)


@pytest.fixture
def figure_rates():
    return Rates(2.0, 1e-6, 1e-3)


@pytest.fixture(scope="session")
def pilot():
    return json.loads((HERE / "pilot_thresholds.json").read_text())


# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_CRITERIA: dict[int, str] = {}
_ACCEPTANCE_OUTCOMES: dict[int, tuple[str, str]] = {}


def _criterion_number(nodeid: str):
    name = nodeid.rsplit("::", 1)[-1]
    if name.startswith("test_criterion_"):
        return int(name.split("_")[2])
    return None


@pytest.fixture
def criterion(request):
    num = _criterion_number(request.node.nodeid)

    def report(title: str, ok: bool, detail: str):
        line = f"criterion {num:>2} {'PASS' if ok else 'FAIL'}: {title} | {detail}"
        _CRITERIA[num] = line
        print(line)
        assert ok, line

    return report


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    num = _criterion_number(item.nodeid)
    if num is not None and rep.when == "call":
        _ACCEPTANCE_OUTCOMES[num] = (rep.outcome, str(rep.longrepr).splitlines()[-1] if rep.failed else "")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE_OUTCOMES):
        status, err = _ACCEPTANCE_OUTCOMES[num]
        line = _CRITERIA.get(num) or f"criterion {num:>2} FAIL: did not report | {err}"
        terminalreporter.write_line(line)
