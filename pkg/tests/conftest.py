import numpy as np
import pytest

from mmimo_u.config import SimConfig


def crandn(rng, *shape):
    """i.i.d. CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def small_config(**overrides) -> SimConfig:
    """Seven-site layout with small arrays; runs a drop in well under a second."""
    sections = {
        "scenario": {"rings": 1},
        "spatial": {"covariance_samples": 20},
        "run": {"antennas": (8, 16), "drops": 2, "seed": 7},
    }
    for name, values in overrides.items():
        sections.setdefault(name, {}).update(values)
    return SimConfig().replace(**sections)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_cfg():
    return small_config()
