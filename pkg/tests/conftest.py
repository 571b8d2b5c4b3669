import numpy as np
import pytest


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_VERDICTS = {}


@pytest.fixture(scope="session")
def verdict():
    """Record a PASS/FAIL line for one acceptance criterion (or one part of it)."""

    def record(criterion, part, ok, detail=""):
        _VERDICTS.setdefault(criterion, []).append((part, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} criterion {criterion} {part}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_VERDICTS):
        parts = _VERDICTS[criterion]
        bad = [p for p, ok, _ in parts if not ok]
        head = "PASS" if not bad else "FAIL"
        suffix = f" (failing: {', '.join(bad)})" if bad else ""
        terminalreporter.write_line(f"{head} criterion {criterion}{suffix}")
        for part, ok, detail in parts:
            terminalreporter.write_line(f"    {'ok  ' if ok else 'FAIL'} {part}: {detail}")
