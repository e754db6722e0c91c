import time
from contextlib import contextmanager

import pytest

_RESULTS: dict[int, str] = {}


class CriterionReport:
    """Records one PASS/FAIL line per acceptance criterion."""

    @contextmanager
    def __call__(self, number: int, title: str, budget_s: float | None = None):
        start = time.perf_counter()
        status, note = "FAIL", ""
        try:
            yield
            elapsed = time.perf_counter() - start
            if budget_s is not None and elapsed >= budget_s:
                note = f" (over {budget_s:g}s budget)"
                raise AssertionError(f"criterion {number} took {elapsed:.1f}s, budget {budget_s:g}s")
            status = "PASS"
        except BaseException as exc:
            note = note or f" ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
            raise
        finally:
            elapsed = time.perf_counter() - start
            line = f"[{status}] C{number:02d} {title} [{elapsed:.2f}s]{note}"
            _RESULTS[number] = line
            print(line)


@pytest.fixture(scope="session")
def criterion():
    return CriterionReport()


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_RESULTS):
            terminalreporter.write_line(_RESULTS[n])
