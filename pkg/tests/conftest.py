import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mcps2.problem import GeneratorConfig, generate_instance  # noqa: E402


@pytest.fixture
def make_instance():
    def make(n=10, m=6, k=2, d=1.0, lo=0.5, hi=1.0, noise=0.0, seed=0):
        cfg = GeneratorConfig(n=n, m=m, k=k, d=d, magnitude_range=(lo, hi),
                              noise_inf_bound=noise, rng_seed=seed)
        return generate_instance(cfg)

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record(line):
    """Keep a criterion verdict line for the end-of-run summary."""
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
