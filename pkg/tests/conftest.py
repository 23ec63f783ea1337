import contextlib
import time

import pytest

# criterion number -> (label, passed, seconds)
ACCEPTANCE_RESULTS: dict[int, tuple[str, bool, float]] = {}


@pytest.fixture
def criterion():
    """Time a numbered acceptance check, enforce its budget and record the outcome."""

    @contextlib.contextmanager
    def check(number: int, label: str, budget: float):
        start = time.perf_counter()
        passed = False
        try:
            yield
            elapsed = time.perf_counter() - start
            assert elapsed < budget, f"took {elapsed:.2f}s, budget {budget}s"
            passed = True
        finally:
            ACCEPTANCE_RESULTS[number] = (label, passed, time.perf_counter() - start)

    return check


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        label, passed, seconds = ACCEPTANCE_RESULTS[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}  {label} ({seconds:.2f}s)")
