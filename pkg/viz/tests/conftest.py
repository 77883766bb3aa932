ACCEPTANCE_REPORT = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_REPORT:
        terminalreporter.section("viz acceptance")
        for line in ACCEPTANCE_REPORT:
            terminalreporter.write_line(line)
