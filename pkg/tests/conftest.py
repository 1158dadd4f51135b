def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if not REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for v in sorted(REPORT, key=lambda v: v.number):
        terminalreporter.write_line(v.line())
