import hypothesis

hypothesis.settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=200,
    deadline=None,
)
hypothesis.settings.load_profile("ci")

# One status line per acceptance criterion, echoed after the test run so
# the gate's verdict is visible regardless of output capturing.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
