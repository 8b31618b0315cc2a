import pytest

from acqkd import _kernels_py, kernels


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    """Each available kernel module in turn."""
    return kernels.backends()[request.param]


@pytest.fixture
def python_kernels(monkeypatch):
    """Force the pure-Python kernels for the duration of a test."""
    for name in ("sample_pulses", "half_subset", "subset_parities"):
        monkeypatch.setattr(kernels, name, getattr(_kernels_py, name))
    monkeypatch.setattr(kernels, "BACKEND", "python")


_ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion, then assert it.

    ``criterion(cid, ok, detail)``; lines are printed immediately and
    repeated in the terminal summary.
    """

    def record(cid, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {cid}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
