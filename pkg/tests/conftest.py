import time

import numpy as np
import pytest

from percept_ctl import _backend


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=["python", "compiled"])
def any_backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    if request.param == "compiled":
        if _backend.compiled_kernels is None:
            pytest.skip("compiled kernels not built")
        mod, name = _backend.compiled_kernels, "cython"
    else:
        mod, name = _backend.python_kernels, "python"
    monkeypatch.setattr(_backend, "kernels", mod)
    monkeypatch.setattr(_backend, "BACKEND", name)
    return name


# acceptance criteria report one line each; the terminal summary gathers them
_CRITERIA: list[tuple[int, bool, str]] = []
SUITE_BUDGET_S = 60.0


@pytest.fixture
def criterion():
    def report(number: int, ok: bool, detail: str) -> bool:
        _CRITERIA.append((number, bool(ok), detail))
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok
    return report


def pytest_sessionstart(session):
    session.config._percept_started = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    elapsed = time.perf_counter() - config._percept_started
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number, ok, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        tr.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
    ok = elapsed < SUITE_BUDGET_S
    tr.write_line(f"criterion 11 (suite runtime): {'PASS' if ok else 'FAIL'} "
                  f"({elapsed:.1f} s for this session, budget {SUITE_BUDGET_S:g} s)")
