import acceptance_report


def pytest_terminal_summary(terminalreporter):
    out = acceptance_report.lines()
    if out:
        terminalreporter.section("acceptance criteria")
        for line in out:
            terminalreporter.write_line(line)
