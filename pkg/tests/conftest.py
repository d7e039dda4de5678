import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from terravor.geom_core import build_terrain

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

CORNERS = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


def plane_terrain(a: float, b: float, c: float = 0.0):
    """Two-triangle square lifted onto ``z = a x + b y + c``."""
    z = [a * x + b * y + c for x, y in CORNERS]
    return build_terrain(CORNERS, z, [(0, 1, 2), (0, 2, 3)])


def tent_terrain(h: float):
    """Ridge of height ``h`` along ``y = 1/2``."""
    v = CORNERS + [(0.0, 0.5), (1.0, 0.5)]
    z = [0, 0, 0, 0, h, h]
    return build_terrain(v, z, [(0, 1, 5), (0, 5, 4), (4, 5, 2), (4, 2, 3)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
