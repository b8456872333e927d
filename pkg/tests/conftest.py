import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from schauderlab.geometry import Grid

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def grid1d():
    return Grid((0.0,), (1.0,), (11,), 1.0, 0.1)


@pytest.fixture
def grid2d():
    return Grid((-1.0, -1.0), (1.0, 1.0), (21, 21), 0.2, 0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ----------------------------------------------------------------------------
# acceptance summary: one line per criterion in the terminal report

_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Recorder ``criterion(n, ok, detail)``; unrecorded criteria count as failures."""
    table = request.config.stash.setdefault(_ACCEPTANCE, {})
    seen = []

    def record(n, ok, detail):
        seen.append(n)
        table[n] = (bool(ok), detail)
        return bool(ok)

    yield record
    if not seen:
        table[request.node.name] = (False, "did not complete")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_ACCEPTANCE, None)
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(table, key=lambda k: (isinstance(k, str), k)):
        ok, detail = table[n]
        label = f"criterion {n:>2}" if isinstance(n, int) else n
        terminalreporter.write_line(f"{label}  {'PASS' if ok else 'FAIL'}  {detail}")
