"""Grid energies and their analytic gradients.

Three terms: elastic (squared first derivatives, contracts the grid), bending
(squared second derivatives, keeps it smooth), and inclusion (sigmoid barrier
on sample points left outside a ball covering of the grid volume).  Every
integral is discretized as the mean over the (r+1)^3 nodes, making values
comparable across resolutions.  All evaluations are pure and deterministic;
sample reductions use numpy's fixed-order pairwise summation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .grid import (
    ControlGrid,
    ball_covering,
    cell_node_indices,
    diff_operators,
    subcell_weights,
)


class EnergyError(RuntimeError):
    """Non-finite energy or gradient; the message names the offending term."""


@dataclass(frozen=True)
class EnergyParams:
    """Weights and shape of the three energy terms.

    ``ball_radius`` / ``stiffness`` default to None, meaning "derive from the
    grid resolution": radius is the half-diagonal of an initial covering
    subcell, sqrt(3)/2 / (r * covering_s), the smallest constant radius whose
    union covers the initial regular grid without gaps; stiffness is
    20/radius so the sigmoid transitions over roughly +-0.15*radius.
    """

    lambda_e: float = 1.0
    lambda_b: float = 0.4
    lambda_i: float = 4.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    ball_radius: float | None = None
    stiffness: float | None = None
    covering_s: int = 2

    def __post_init__(self):
        for name in ("lambda_e", "lambda_b", "lambda_i", "alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.ball_radius is not None and not self.ball_radius > 0:
            raise ValueError("ball_radius must be positive")
        if self.stiffness is not None and not self.stiffness > 0:
            raise ValueError("stiffness must be positive")
        if self.covering_s < 1:
            raise ValueError("covering_s must be >= 1")

    def radius_for(self, resolution: int) -> float:
        if self.ball_radius is not None:
            return self.ball_radius
        return math.sqrt(3.0) / 2.0 / (resolution * self.covering_s)

    def stiffness_for(self, resolution: int) -> float:
        if self.stiffness is not None:
            return self.stiffness
        return 20.0 / self.radius_for(resolution)


def elastic_energy(grid: ControlGrid, params: EnergyParams) -> float:
    """alpha * mean over nodes of |V_u|^2 + |V_v|^2 + |V_w|^2."""
    ops = diff_operators(grid.resolution, second=False)
    n = grid.n_points
    acc = 0.0
    for key in ("u", "v", "w"):
        d = ops[key] @ grid.points
        acc += float(np.sum(d * d))
    return params.alpha * acc / n


def bending_energy(grid: ControlGrid, params: EnergyParams) -> float:
    """mean over nodes of beta*(pure second partials) + gamma*(mixed).

    Raises for resolution < 2 (no second-difference stencil exists).
    """
    if grid.resolution < 2:
        raise ValueError(
            f"bending energy needs resolution >= 2, got {grid.resolution}"
        )
    ops = diff_operators(grid.resolution)
    n = grid.n_points
    pure = 0.0
    for key in ("uu", "vv", "ww"):
        d = ops[key] @ grid.points
        pure += float(np.sum(d * d))
    mixed = 0.0
    for key in ("uv", "vw", "uw"):
        d = ops[key] @ grid.points
        mixed += float(np.sum(d * d))
    return (params.beta * pure + params.gamma * mixed) / n


def nearest_centers(samples: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact nearest covering center per sample: (indices, distances).

    Ties at the exact minimal distance resolve to the lowest center index.
    Small instances use a dense distance matrix; larger ones a k-d tree with
    explicit tie refinement, so both paths implement the same rule.
    """
    samples = np.asarray(samples, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    if samples.shape[0] * centers.shape[0] <= 2_000_000:
        d = cdist(samples, centers)
        idx = np.argmin(d, axis=1)  # argmin takes the first (lowest) index
        return idx, d[np.arange(len(samples)), idx]
    tree = cKDTree(centers)
    if centers.shape[0] >= 2:
        dist2, idx2 = tree.query(samples, k=2)
        dist, idx = dist2[:, 0], idx2[:, 0].copy()
        ties = np.nonzero(dist2[:, 0] == dist2[:, 1])[0]
    else:
        dist, idx = tree.query(samples)
        idx = idx.copy()
        ties = np.empty(0, dtype=np.int64)
    for t in ties:
        cand = tree.query_ball_point(samples[t], dist[t] * (1.0 + 1e-12) + 1e-300)
        exact = [c for c in cand if np.linalg.norm(centers[c] - samples[t]) == dist[t]]
        if exact:
            idx[t] = min(exact)
    return idx, dist


def inclusion_loss(samples: np.ndarray, grid: ControlGrid, params: EnergyParams) -> float:
    """Mean sigmoid penalty over samples of distance-to-covering minus radius.

    Per sample: f(d) = 0.5*tanh(stiffness*(d - radius)) + 0.5, where d is the
    distance to the nearest covering center; approaches 0 for well-covered
    samples and 1 for samples far outside.  Empty sample sets contribute 0.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        return 0.0
    centers = ball_covering(grid, params.covering_s)
    _, dist = nearest_centers(samples, centers)
    radius = params.radius_for(grid.resolution)
    stiff = params.stiffness_for(grid.resolution)
    vals = 0.5 * np.tanh(stiff * (dist - radius)) + 0.5
    return float(np.mean(vals))


def total_energy(
    grid: ControlGrid, samples: np.ndarray, params: EnergyParams
) -> tuple[float, dict[str, float]]:
    """Weighted sum of the three terms plus a per-term breakdown.

    The breakdown values are already weighted (they sum to the total).  For
    resolution 1 no second-difference stencil exists, so the bending term
    contributes 0 there; the standalone bending_energy still raises.
    """
    e = params.lambda_e * elastic_energy(grid, params)
    b = params.lambda_b * bending_energy(grid, params) if grid.resolution >= 2 else 0.0
    i = params.lambda_i * inclusion_loss(samples, grid, params)
    breakdown = {"elastic": e, "bending": b, "inclusion": i}
    for name, val in breakdown.items():
        if not math.isfinite(val):
            raise EnergyError(f"non-finite {name} energy: {val}")
    return e + b + i, breakdown


def _elastic_gradient(grid: ControlGrid, params: EnergyParams) -> np.ndarray:
    ops = diff_operators(grid.resolution, second=False)
    n = grid.n_points
    g = np.zeros_like(grid.points)
    for key in ("u", "v", "w"):
        op = ops[key]
        g += op.T @ (op @ grid.points)
    return (2.0 * params.alpha / n) * g


def _bending_gradient(grid: ControlGrid, params: EnergyParams) -> np.ndarray:
    ops = diff_operators(grid.resolution)
    n = grid.n_points
    g = np.zeros_like(grid.points)
    for key, coef in (("uu", params.beta), ("vv", params.beta), ("ww", params.beta),
                      ("uv", params.gamma), ("vw", params.gamma), ("uw", params.gamma)):
        op = ops[key]
        g += coef * (op.T @ (op @ grid.points))
    return (2.0 / n) * g


def _inclusion_gradient(
    samples: np.ndarray, grid: ControlGrid, params: EnergyParams
) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.float64)
    g = np.zeros_like(grid.points)
    if samples.size == 0:
        return g
    s = params.covering_s
    centers = ball_covering(grid, s)
    idx, dist = nearest_centers(samples, centers)
    radius = params.radius_for(grid.resolution)
    stiff = params.stiffness_for(grid.resolution)
    t = np.tanh(stiff * (dist - radius))
    fprime = 0.5 * stiff * (1.0 - t * t)
    # d|s - p|/dp = (p - s)/|s - p|; the assignment to the nearest center is
    # held fixed (piecewise-smooth subgradient), zero direction at d = 0.
    diff = centers[idx] - samples
    safe = np.where(dist > 0.0, dist, 1.0)
    direction = diff / safe[:, None]
    direction[dist == 0.0] = 0.0
    per_sample = (fprime / len(samples))[:, None] * direction  # (k, 3)
    # Each center is a fixed trilinear combination of its cell's 8 corners.
    n_sub = s**3
    cell_of_center = idx // n_sub
    sub_of_center = idx % n_sub
    weights = subcell_weights(s)[sub_of_center]  # (k, 8)
    nodes = cell_node_indices(grid.resolution)[cell_of_center]  # (k, 8)
    contrib = weights[:, :, None] * per_sample[:, None, :]  # (k, 8, 3)
    np.add.at(g, nodes.reshape(-1), contrib.reshape(-1, 3))
    return g


def energy_gradient(
    grid: ControlGrid, samples: np.ndarray, params: EnergyParams
) -> np.ndarray:
    """Exact analytic gradient of total_energy w.r.t. control positions.

    Elastic/bending are quadratic forms (fixed sparse stencils); the inclusion
    gradient chains through the sigmoid, the distance, and the trilinear
    dependence of each sample's nearest center on its cell corners.
    """
    terms = [("elastic", params.lambda_e * _elastic_gradient(grid, params))]
    if grid.resolution >= 2 and params.lambda_b != 0.0:
        terms.append(("bending", params.lambda_b * _bending_gradient(grid, params)))
    if params.lambda_i != 0.0:
        terms.append(("inclusion", params.lambda_i * _inclusion_gradient(samples, grid, params)))
    g = np.zeros_like(grid.points)
    for name, term in terms:
        if not np.all(np.isfinite(term)):
            raise EnergyError(f"non-finite {name} gradient")
        g += term
    return g


def resolve_params(params: EnergyParams, resolution: int) -> EnergyParams:
    """Pin the auto radius/stiffness to concrete values for one resolution."""
    return replace(
        params,
        ball_radius=params.radius_for(resolution),
        stiffness=params.stiffness_for(resolution),
    )
