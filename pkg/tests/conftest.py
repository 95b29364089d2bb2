import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

from harnesslab import levy_models as lm  # noqa: E402


@pytest.fixture(scope="session")
def specs():
    """The three process families used throughout."""
    return {
        "brownian": lm.brownian(),
        "gamma": lm.center(lm.ProcessSpec(jumps=lm.GammaSubordinator(1.0, 1.0))),
        "compound_poisson": lm.center(
            lm.ProcessSpec(jumps=lm.CompoundPoisson(2.0, lm.ExponentialLaw(1.0)))),
    }


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
