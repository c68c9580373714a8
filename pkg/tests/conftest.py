import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fhigs.lti import TransferFunction

# simulations dominate the runtime; deadlines would only measure JIT warm-up
settings.register_profile("default", deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
OMEGA_F = 20 * math.pi

_criterion_lines: list[str] = []


@pytest.fixture
def lead_tf() -> TransferFunction:
    return TransferFunction((9.0, 6 * OMEGA_F), (4.0, 6 * OMEGA_F))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def criterion_log() -> list[str]:
    return _criterion_lines


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)
