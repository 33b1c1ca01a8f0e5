import numpy as np
import pytest
from hypothesis import settings

from ofdmpath.signal_model import OfdmConfig, ieee80211

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def small_cfg(K=4, L=2, null_set=(), T=6.4e-6, Tcp=1.6e-6):
    return OfdmConfig.from_durations(K=K, L=L, T=T, Tcp=Tcp, null_set=null_set)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def wifi128():
    return ieee80211(128)


@pytest.fixture
def wifi512():
    return ieee80211(512)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, passed, detail)``; echoed in the terminal summary."""

    def record(criterion, passed, detail):
        _ACCEPTANCE[criterion] = (bool(passed), detail)
        print(f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: (int(k.rstrip("abcdefgh")), k)):
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>3}: {'PASS' if ok else 'FAIL'}  {detail}")
