"""Session hooks: print the acceptance summary after the test run."""


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS, report_lines
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in report_lines(RESULTS):
        terminalreporter.write_line(line)
