import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line; printed live and again in the summary."""
    lines = request.config.stash.setdefault(_LINES, [])
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        lines.append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
