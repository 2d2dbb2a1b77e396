import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def gate(pytestconfig):
    """Records one PASS/FAIL line per acceptance criterion for the summary."""
    lines = pytestconfig.stash.setdefault(_LINES, [])

    def record(number, name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
