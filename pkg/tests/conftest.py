import math

import numpy as np
import pytest

from cdxlevy.calibration import swaption_tenor
from cdxlevy.params import calibrated_2020_01_02, reference_params

_ACCEPTANCE: list[tuple[str, bool, str]] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    """Log one acceptance line; printed in the terminal summary."""
    _ACCEPTANCE.append((criterion, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def within_sigma(estimate: float, se: float, target: float, k: float = 5.0) -> bool:
    return abs(estimate - target) <= k * se


def mean_se(x) -> tuple[float, float]:
    x = np.asarray(x)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


@pytest.fixture(scope="session")
def params():
    return reference_params()


@pytest.fixture(scope="session")
def params_with_intensity():
    # a positive starting intensity exercises the lambda state terms
    return reference_params().replace(lambda0=0.01)


@pytest.fixture(scope="session")
def term13():
    return calibrated_2020_01_02(0.13), swaption_tenor(0.13)


@pytest.fixture
def rng():
    return np.random.default_rng(20200102)
