import pytest

# acceptance verdicts, one line per criterion, echoed at the end of the run
ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def verdict():
    def record(criterion: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE[criterion] = f"{criterion} {'PASS' if passed else 'FAIL'}: {detail}"
        print(ACCEPTANCE[criterion])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
            terminalreporter.write_line(ACCEPTANCE[key])
