import os

import pytest
from hypothesis import HealthCheck, settings

from jetlab.polyjet.expression import VectorField, coords, plateau

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=15,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def bump(m=2, inner=0.3, outer=0.8):
    x = coords(m)
    e = plateau(x[0], inner, outer)
    for i in range(1, m):
        e = e * plateau(x[i], inner, outer)
    return e


@pytest.fixture
def bump_field():
    return VectorField([bump(2)])


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = [mod.RESULTS[k] for k in sorted(mod.RESULTS)] if mod else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
