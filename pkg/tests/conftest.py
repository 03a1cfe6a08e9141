import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# jit compilation makes first calls slow
settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture(scope="session", autouse=True)
def _calibration_cache(tmp_path_factory):
    """Point the calibration cache at a per-session file."""
    old = os.environ.get("CPDETECT_CACHE")
    os.environ["CPDETECT_CACHE"] = str(tmp_path_factory.mktemp("cache") / "calibration.json")
    yield
    if old is None:
        os.environ.pop("CPDETECT_CACHE", None)
    else:
        os.environ["CPDETECT_CACHE"] = old


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record():
    """Store one acceptance outcome, printed in the terminal summary."""

    def _record(name: str, passed: bool, detail: str):
        _ACCEPTANCE[name] = (bool(passed), detail)
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0].rstrip("."))):
        ok, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
