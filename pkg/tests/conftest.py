import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# filled by test_acceptance: criterion number -> (passed, line)
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n][1])
