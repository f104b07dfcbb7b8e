import contextlib

ACCEPTANCE: dict[int, str] = {}


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record one PASS/FAIL line for an acceptance criterion; details are appended by the test."""
    notes: list[str] = []
    try:
        yield notes
    except BaseException as e:
        reason = str(e).splitlines()[0] if str(e) else type(e).__name__
        ACCEPTANCE[number] = f"FAIL  {number:2d}. {title}: {'; '.join(notes + [reason])}"
        raise
    ACCEPTANCE[number] = f"PASS  {number:2d}. {title}: {'; '.join(notes)}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
