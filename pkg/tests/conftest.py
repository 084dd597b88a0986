import warnings

import numpy as np
import pytest

warnings.filterwarnings("ignore", module="numba")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_unitary(rng, d):
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng, d, rank=None):
    rank = d if rank is None else rank
    a = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


_LINES = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` records one acceptance line and returns ``ok``."""
    def report(number, ok, detail):
        line = f"criterion {number:>3}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash.setdefault(_LINES, []).append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: float(s.split(":")[0].split()[1].rstrip("ab"))):
            terminalreporter.write_line(line)
