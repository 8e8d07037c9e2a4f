"""Collects the acceptance-criterion outcomes and prints one line per criterion."""
import contextlib
import time

import pytest

_OUTCOMES = {}


class CriterionRecorder:
    @contextlib.contextmanager
    def __call__(self, number, title):
        t0 = time.perf_counter()
        details = []
        try:
            yield details
        except BaseException as exc:
            _OUTCOMES[number] = ("FAIL", title, time.perf_counter() - t0,
                                 f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
            raise
        _OUTCOMES[number] = ("PASS", title, time.perf_counter() - t0, "; ".join(details))


@pytest.fixture
def criterion():
    return CriterionRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        status, title, secs, info = _OUTCOMES[number]
        line = f"criterion {number:2d}: {status}  {title}  ({secs:.2f} s)"
        if info:
            line += f"  [{info}]"
        terminalreporter.write_line(line)
