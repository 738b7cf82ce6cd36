import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# Property tests call numerical oracles (bisection, SVD enumeration) whose
# runtime varies with the draw; wall-clock deadlines only produce flaky
# failures there.
settings.register_profile(
    "numeric",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("numeric")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance battery's one-line-per-criterion checklist."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "SUMMARY_LINES", None) if mod is not None else None
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
