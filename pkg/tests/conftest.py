import sys


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance criterion pass/fail lines after the test run."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", []) if mod else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
