import numpy as np
import pytest


@pytest.fixture
def ring_mask():
    """Square annulus: one component, one loop."""
    m = np.zeros((7, 7), dtype=bool)
    m[1:6, 1:6] = True
    m[2:5, 2:5] = False
    return m


@pytest.fixture
def tree_mask():
    """Y-shaped 1-px tree: one component, no loops."""
    m = np.zeros((9, 9), dtype=bool)
    m[4, 1:5] = True
    m[1:4, 4] = True
    m[5:8, 4] = True
    return m


def random_mask(rng, max_side=12):
    h = int(rng.integers(1, max_side + 1))
    w = int(rng.integers(1, max_side + 1))
    return rng.random((h, w)) < rng.uniform(0.15, 0.85)
