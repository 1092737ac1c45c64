"""Collects the one-line acceptance verdicts and prints them after the run."""

VERDICTS: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(VERDICTS, key=lambda k: (int(k.split()[0].rstrip("ab")), k)):
        terminalreporter.write_line(VERDICTS[key])
