import math

import numpy as np
import pytest

from berryemf import PolyLoop, VortexConfig

# lines reported by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_config(rng, max_cores=20, lx=10.0, ly=10.0, min_cores=0):
    k = int(rng.integers(min_cores, max_cores + 1))
    pos = rng.uniform(0.05, 0.95, size=(k, 2)) * (lx, ly)
    w = rng.choice([-1, 1], size=k)
    return VortexConfig(pos, w, lx, ly)


def random_star_loop(rng, lx=10.0, ly=10.0):
    """Star-shaped polygon around a random centre: always simple."""
    n = int(rng.integers(3, 13))
    while True:
        ang = np.sort(rng.uniform(0, 2 * math.pi, n))
        gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * math.pi]]))
        if gaps.max() < 0.9 * math.pi and gaps.min() > 1e-3:
            break
    c = rng.uniform(0.3, 0.7, 2) * (lx, ly)
    rmax = 0.45 * min(lx, ly)
    r = rng.uniform(0.2, 1.0, n) * rmax
    verts = c + np.stack([r * np.cos(ang), r * np.sin(ang)], axis=-1)
    if rng.random() < 0.5:
        verts = verts[::-1]
    return PolyLoop(verts)
