"""Collects the acceptance verdict lines and prints them after the run."""

_LINES: list[str] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    for key, value in report.user_properties:
        if key == "acceptance":
            verdict = "PASS" if report.passed else "FAIL"
            _LINES.append(f"{verdict}  {value}")


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
