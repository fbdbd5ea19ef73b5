from __future__ import annotations

import numpy as np
import pytest

from thinlayer.core import LayerField, Scenario, ScenarioTag, TransmissionParams, build_reference_grid


@pytest.fixture
def params() -> TransmissionParams:
    return TransmissionParams(alpha=1.0, beta=1.0, kappa=1.0, gamma=1.0)


@pytest.fixture
def two_thin() -> Scenario:
    return Scenario(ScenarioTag.TWO_THIN, 0.1)


@pytest.fixture
def thin_over_thick() -> Scenario:
    return Scenario(ScenarioTag.THIN_OVER_THICK, 0.1)


@pytest.fixture
def thin_over_fast() -> Scenario:
    return Scenario(ScenarioTag.THIN_OVER_FAST, 16.0)


def small_grid(scenario: Scenario, n_rad: int = 33, n_ang: int = 16):
    return build_reference_grid(scenario, n_rad, n_rad, n_ang)


def angular_field(grid, c0: float = 1.0, seed: int = 0) -> LayerField:
    """Radially constant, equal in both layers; a few random angular modes of total size c0 / 2."""
    rng = np.random.default_rng(seed)
    amps = rng.random(3)
    amps *= 0.5 * c0 / amps.sum()
    shifts = rng.random(3) * 2.0 * np.pi
    ring = c0 + sum(a * np.cos((k + 1) * grid.phi + s) for k, (a, s) in enumerate(zip(amps, shifts)))
    return LayerField(np.tile(ring, (grid.n_rad_total, 1)), grid)
