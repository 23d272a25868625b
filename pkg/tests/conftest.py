import time

import numpy as np
import pytest

from dvg.energy import EnergyParams
from dvg.grid import regular_grid
from dvg.optimizer import ScheduleParams, fit_hierarchical
from dvg.synth import sphere_shape


def warped_grid(r, scale=0.03, seed=0):
    """Regular unit grid with a small random perturbation."""
    rng = np.random.default_rng(seed)
    g = regular_grid(r, 0.0, 1.0)
    return g.with_points(g.points + scale * rng.standard_normal(g.points.shape))


@pytest.fixture(scope="session")
def sphere_benchmark():
    """Sphere of radius 0.35 at the cube center, 2048 samples, default fit."""
    shape = sphere_shape(k=2048, radius=0.35, seed=42)
    start = time.perf_counter()
    model, trace = fit_hierarchical(
        shape, ScheduleParams(max_level=3), EnergyParams(), shape_ref="sphere"
    )
    elapsed = time.perf_counter() - start
    return shape, model, trace, elapsed


@pytest.fixture(scope="session")
def small_fit():
    """Cheap 2-level fit used by tests that only need some fitted model."""
    shape = sphere_shape(k=512, radius=0.35, seed=7)
    model, trace = fit_hierarchical(
        shape,
        ScheduleParams(max_level=2, steps_per_level=80),
        EnergyParams(),
        shape_ref="small-sphere",
    )
    return shape, model, trace
