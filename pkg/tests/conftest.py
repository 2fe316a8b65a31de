import re

import pytest

_VERDICTS: dict[int, str] = {}
_DETAILS: dict[str, str] = {}


@pytest.fixture
def detail(request):
    """Attach a one-line measurement summary to the current acceptance test."""

    def note(text: str) -> None:
        _DETAILS[request.node.nodeid] = text
        print(text)

    return note


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not m or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    verdict = "PASS" if report.passed else "FAIL"
    _VERDICTS[int(m.group(1))] = f"criterion {m.group(1)}: {verdict}  {_DETAILS.get(report.nodeid, '')}"


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[n].rstrip())
