"""Shared pytest hooks.

The acceptance module records one line per criterion in ``ACCEPTANCE_LINES``;
they are printed together at the end of the session so they survive output
capture and land in the saved test log.
"""

ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
