import logging
import sys

import numpy as np
import pytest

from sparsetrig.index_sets import lower_completion


def random_lower_set(rng, d, max_size, max_coord=4):
    """Lower completion of a few random indices, trimmed to ``max_size``."""
    while True:
        picks = [tuple(int(c) for c in rng.integers(0, max_coord + 1, size=d))
                 for _ in range(int(rng.integers(1, 4)))]
        lam = lower_completion(picks, dim=d)
        if len(lam) <= max_size:
            return lam


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(autouse=True)
def _quiet_fit_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="sparsetrig.adaptive")


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
