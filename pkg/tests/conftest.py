import acceptance_runs


def pytest_terminal_summary(terminalreporter):
    if not acceptance_runs.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acceptance_runs.RESULTS):
        terminalreporter.write_line(acceptance_runs.RESULTS[number])
