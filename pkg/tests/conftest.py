import time

import pytest

ACCEPTANCE: dict[str, tuple[bool, str, float]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: call ``record(passed, detail)`` inside the test."""
    start = time.perf_counter()
    key = request.node.name

    def record(passed: bool, detail: str):
        ACCEPTANCE[key] = (bool(passed), detail, time.perf_counter() - start)

    yield record
    if key not in ACCEPTANCE:
        ACCEPTANCE[key] = (False, "did not complete", time.perf_counter() - start)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail, dt = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}  [{dt:.2f}s]  {detail}")
