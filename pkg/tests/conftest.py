import numpy as np
import pytest

from uwofdm.channel import load_snapshot
from uwofdm.core import SystemConfig, build_generator_set, default_config


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def gen(cfg):
    return build_generator_set(cfg)


@pytest.fixture(scope="session")
def small_cfg():
    # 8 carriers: DC unused, 5 data, 2 redundant, guard of 2 samples
    return SystemConfig(N=8, N_u=2, N_d=5, N_r=2, N_z=1, zero_indices=(0,), redundant_indices=(2, 5))


@pytest.fixture(scope="session")
def small_gen(small_cfg):
    return build_generator_set(small_cfg)


@pytest.fixture(scope="session")
def snap_a(cfg):
    return load_snapshot("builtin:A", cfg)


@pytest.fixture(scope="session")
def snap_b(cfg):
    return load_snapshot("builtin:B", cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_qpsk(rng, shape, sigma_d_sq=1.0):
    a = np.sqrt(sigma_d_sq / 2)
    return a * (rng.choice([-1, 1], shape) + 1j * rng.choice([-1, 1], shape))


# one summary line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
