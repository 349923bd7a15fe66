import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ruelle_kit.rational_map import RationalMap

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def g():
    """3w^2 - 2w: z^2 - 2 conjugated by h(z) = (z + 1)/3."""
    return RationalMap.from_coefficients([0, -2, 3])


@pytest.fixture(scope="session")
def square():
    return RationalMap.from_coefficients([0, 0, 1])


@pytest.fixture(scope="session")
def ratio_map():
    """z^2 / (2z - 1): critical points 0 and 1, omega = 2."""
    return RationalMap.from_coefficients([0, 0, 1], [-1, 2])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE: list = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion, then assert on it."""
    def record(num: int, checks: dict, detail: str = ""):
        failed = [name for name, ok in checks.items() if not ok]
        status = "PASS" if not failed else "FAIL"
        line = f"criterion {num}: {status}  {detail}"
        if failed:
            line += f"  (failed: {', '.join(failed)})"
        print(line)
        _ACCEPTANCE.append(line)
        assert not failed, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
