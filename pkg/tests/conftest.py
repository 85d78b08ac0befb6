import pytest

# one line per acceptance criterion, echoed in the terminal summary
CRITERIA = []


@pytest.fixture
def criterion():
    def report(n, ok, detail="", status=None):
        status = status or ("PASS" if ok else "FAIL")
        line = f"criterion {n:>2}: {status}  {detail}".rstrip()
        CRITERIA.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
