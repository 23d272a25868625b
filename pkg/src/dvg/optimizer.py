"""Hierarchical coarse-to-fine energy minimization.

A fit starts from the regular single cell at level 0 and alternates gradient
descent with grid subdivision.  Each level k stores the residual beyond pure
subdivision of level k-1, scaled so that

    levels[k] == subdivide(levels[k-1]) + fading[k-1] * residuals[k-1]

holds bit-exactly (the stored levels are reconstructed from that exact
expression, like a wavelet series where each layer adds finer detail).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import EnergyParams, total_energy, energy_gradient
from .grid import ControlGrid, regular_grid, subdivide

MAX_HALVINGS = 30
CONVERGED_STEPS = 10  # consecutive small relative decreases before stopping
STEP_GROWTH = 1.25  # regrow the trial step after each accepted step


@dataclass(frozen=True)
class ScheduleParams:
    """Hierarchical optimization schedule; final resolution is 2**max_level."""

    max_level: int = 3
    steps_per_level: int = 300
    step_size: float = 5e-3
    fading: tuple[float, ...] | None = None  # per-level factors in [0, 1]
    convergence_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.max_level < 0:
            raise ValueError("max_level must be >= 0")
        if self.steps_per_level < 1:
            raise ValueError("steps_per_level must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.fading is not None:
            fading = tuple(float(a) for a in self.fading)
            if len(fading) != self.max_level:
                raise ValueError(
                    f"fading needs {self.max_level} factors, got {len(fading)}"
                )
            if any(not 0.0 <= a <= 1.0 for a in fading):
                raise ValueError("fading factors must lie in [0, 1]")
            object.__setattr__(self, "fading", fading)

    def fading_factors(self) -> tuple[float, ...]:
        if self.fading is not None:
            return self.fading
        return (1.0,) * self.max_level


@dataclass(frozen=True)
class DvgModel:
    """Multi-level fitted grid: levels v_0..v_p plus per-level residuals."""

    levels: tuple[ControlGrid, ...]
    residuals: tuple[np.ndarray, ...]  # residual k sized for level k+1
    fading: tuple[float, ...]
    params: EnergyParams
    shape_ref: str = ""

    def __post_init__(self):
        if not self.levels:
            raise ValueError("model needs at least level 0")
        if self.levels[0].resolution != 1:
            raise ValueError("level 0 must have resolution 1")
        if len(self.residuals) != len(self.levels) - 1:
            raise ValueError("need one residual per level above 0")
        if len(self.fading) != len(self.residuals):
            raise ValueError("need one fading factor per residual")

    @property
    def max_level(self) -> int:
        return len(self.levels) - 1

    @property
    def final_grid(self) -> ControlGrid:
        return self.levels[-1]


def fit_level(
    grid: ControlGrid,
    samples: np.ndarray,
    energy_params: EnergyParams,
    schedule: ScheduleParams,
) -> tuple[ControlGrid, list[dict]]:
    """Gradient descent with backtracking at a fixed resolution.

    A step is accepted only if the total energy does not increase; on an
    increase the trial step halves (up to MAX_HALVINGS, then the level
    stops).  Stops early once the relative decrease stays below
    convergence_tol for CONVERGED_STEPS consecutive accepted steps.  Returns
    the optimized grid and a trace with one row per accepted step (row 0 is
    the initial state).
    """
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, 3)
    points = grid.points.copy()
    energy, breakdown = total_energy(grid.with_points(points), samples, energy_params)
    trace = [{"step": 0, **breakdown, "total": energy}]
    step = schedule.step_size
    small_decreases = 0
    for it in range(1, schedule.steps_per_level + 1):
        g = energy_gradient(grid.with_points(points), samples, energy_params)
        if not np.any(g):
            break
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            candidate = points - step * g
            cand_energy, cand_breakdown = total_energy(
                grid.with_points(candidate), samples, energy_params
            )
            if cand_energy <= energy:
                accepted = True
                break
            step /= 2.0
        if not accepted:
            break
        rel_decrease = (energy - cand_energy) / max(abs(energy), 1e-300)
        points = candidate
        energy = cand_energy
        trace.append({"step": it, **cand_breakdown, "total": energy})
        step = min(step * STEP_GROWTH, schedule.step_size)
        small_decreases = small_decreases + 1 if rel_decrease < schedule.convergence_tol else 0
        if small_decreases >= CONVERGED_STEPS:
            break
    return grid.with_points(points), trace


def fit_hierarchical(
    shape,
    schedule: ScheduleParams | None = None,
    energy_params: EnergyParams | None = None,
    shape_ref: str = "",
) -> tuple[DvgModel, list[dict]]:
    """Fit a multi-level grid to a shape's sample points.

    ``shape`` is a SampledShape or a bare (k, 3) point array in the unit
    cube.  Level 0 starts from the regular unit cell; each further level is
    initialized by subdivision and re-optimized (skipped where the fading
    factor is 0, in which case the residual is zero).  Returns the model and
    the concatenated trace (rows carry a 'level' column).
    """
    schedule = schedule if schedule is not None else ScheduleParams()
    energy_params = energy_params if energy_params is not None else EnergyParams()
    samples = np.asarray(getattr(shape, "points", shape), dtype=np.float64)

    v0, trace0 = fit_level(regular_grid(1, 0.0, 1.0), samples, energy_params, schedule)
    for row in trace0:
        row["level"] = 0
    trace = trace0
    levels = [v0]
    residuals: list[np.ndarray] = []
    fading = schedule.fading_factors()
    for k in range(1, schedule.max_level + 1):
        base = subdivide(levels[k - 1])
        alpha = fading[k - 1]
        if alpha > 0.0:
            optimized, level_trace = fit_level(base, samples, energy_params, schedule)
            residual = (optimized.points - base.points) / alpha
        else:
            level_trace = []
            residual = np.zeros_like(base.points)
        for row in level_trace:
            row["level"] = k
        trace.extend(level_trace)
        # Reconstruct the stored level from the residual expression itself so
        # the decomposition identity holds bit-exactly.
        levels.append(base.with_points(base.points + alpha * residual))
        residuals.append(residual)
    model = DvgModel(
        levels=tuple(levels),
        residuals=tuple(residuals),
        fading=tuple(fading),
        params=energy_params,
        shape_ref=shape_ref,
    )
    return model, trace


def select_level(model: DvgModel, K: int) -> ControlGrid:
    """Full-resolution grid carrying detail only up to level K.

    Levels <= K keep their stored residual contribution; levels above K are
    pure subdivisions.  K = max_level reproduces the final grid bit-exactly.
    """
    if not 0 <= K <= model.max_level:
        raise ValueError(f"K must be in [0, {model.max_level}], got {K}")
    grid = model.levels[0]
    for k in range(1, model.max_level + 1):
        base = subdivide(grid)
        if k <= K:
            grid = base.with_points(base.points + model.fading[k - 1] * model.residuals[k - 1])
        else:
            grid = base
    return grid
