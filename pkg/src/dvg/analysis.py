"""Grid-based shape descriptors, retrieval, correspondences, and PCA modes.

Descriptors use only the grid's outer (boundary) control points; PCA runs
over full flattened grids so the modes can deform whole grids.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .grid import ControlGrid
from .registration import project
from .shape_io import SampledShape


@dataclass(frozen=True)
class DvgDescriptor:
    """Outer control points flattened in ascending node-index order."""

    resolution: int
    vector: np.ndarray  # (3 * ((r+1)^3 - (r-1)^3),)

    def __post_init__(self):
        r = self.resolution
        vec = np.ascontiguousarray(np.asarray(self.vector, dtype=np.float64).ravel())
        expected = 3 * ((r + 1) ** 3 - (r - 1) ** 3)
        if vec.shape[0] != expected:
            raise ValueError(
                f"descriptor length {vec.shape[0]} != {expected} for resolution {r}"
            )
        object.__setattr__(self, "vector", vec)


def boundary_node_mask(r: int) -> np.ndarray:
    """Flat boolean mask of boundary nodes (any of i, j, k in {0, r})."""
    n = r + 1
    idx = np.arange(n)
    i, j, k = np.meshgrid(idx, idx, idx, indexing="ij")
    on_edge = (i == 0) | (i == r) | (j == 0) | (j == r) | (k == 0) | (k == r)
    return on_edge.reshape(-1)


def descriptor(grid: ControlGrid) -> DvgDescriptor:
    """Outer-point shape descriptor (blind to interior-only differences)."""
    mask = boundary_node_mask(grid.resolution)
    return DvgDescriptor(resolution=grid.resolution, vector=grid.points[mask].ravel())


def knn_search(
    query: DvgDescriptor, database: list[DvgDescriptor], k: int
) -> list[int]:
    """Exact k nearest descriptors by Euclidean distance, ties by lower index."""
    if not 1 <= k <= len(database):
        raise ValueError(f"k must be in [1, {len(database)}], got {k}")
    for d in database:
        if d.resolution != query.resolution:
            raise ValueError(
                f"descriptor resolution mismatch: query {query.resolution}, "
                f"database entry {d.resolution}"
            )
    mat = np.stack([d.vector for d in database])
    dist = np.linalg.norm(mat - query.vector, axis=1)
    order = np.argsort(dist, kind="stable")  # stable sort keeps lower index on ties
    return [int(i) for i in order[:k]]


@dataclass(frozen=True)
class Correspondence:
    """For each target point, the index of its closest source point."""

    source_index: np.ndarray  # (n_target,) int
    distance: np.ndarray  # (n_target,) float, cubified-space distances


def correspondences(
    cubified_source: np.ndarray, cubified_target: np.ndarray
) -> Correspondence:
    """Match every target point to its exact nearest source point.

    The match is many-to-one; ties resolve to the lower source index.
    """
    src = np.asarray(cubified_source, dtype=np.float64).reshape(-1, 3)
    tgt = np.asarray(cubified_target, dtype=np.float64).reshape(-1, 3)
    if len(src) == 0 or len(tgt) == 0:
        raise ValueError("both point sets must be nonempty")
    d = cdist(tgt, src)
    idx = np.argmin(d, axis=1)  # argmin returns the first (lowest) index on ties
    return Correspondence(
        source_index=idx, distance=d[np.arange(len(tgt)), idx]
    )


@dataclass(frozen=True)
class PcaModel:
    """Mean, orthonormal principal directions, and variances of grid vectors."""

    resolution: int
    mean: np.ndarray  # (3*(r+1)^3,)
    components: np.ndarray  # (n_components, 3*(r+1)^3), rows orthonormal
    variances: np.ndarray  # (n_components,) descending
    n_samples: int

    @property
    def n_components(self) -> int:
        return len(self.variances)

    def explained_variance_ratio(self) -> np.ndarray:
        total = self.variances.sum()
        if total == 0.0:
            return np.zeros_like(self.variances)
        return self.variances / total


def pca_fit(grids: list[ControlGrid]) -> PcaModel:
    """Mean-centered PCA over flattened full-grid vectors.

    Component signs are fixed so each component's largest-magnitude entry is
    positive; variances use the (n-1)-denominator sample convention.
    """
    if len(grids) < 2:
        raise ValueError(f"need at least 2 grids, got {len(grids)}")
    r = grids[0].resolution
    for g in grids:
        if g.resolution != r:
            raise ValueError(
                f"grid resolution mismatch: {g.resolution} vs {r}"
            )
    x = np.stack([g.points.ravel() for g in grids])  # (n, 3N)
    mean = x.mean(axis=0)
    centered = x - mean
    n = len(grids)
    n_keep = min(n - 1, x.shape[1])
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:n_keep].copy()
    variances = (svals[:n_keep] ** 2) / (n - 1)
    for row in components:
        lead = np.argmax(np.abs(row))
        if row[lead] < 0:
            row *= -1.0
    return PcaModel(
        resolution=r,
        mean=mean,
        components=components,
        variances=variances,
        n_samples=n,
    )


def pca_deform_grid(
    grid: ControlGrid, model: PcaModel, coeffs: np.ndarray
) -> ControlGrid:
    """grid + sum_i t_i * sqrt(var_i) * component_i (t in std-dev units)."""
    if grid.resolution != model.resolution:
        raise ValueError(
            f"resolution mismatch: grid {grid.resolution}, model {model.resolution}"
        )
    coeffs = np.asarray(coeffs, dtype=np.float64).ravel()
    if len(coeffs) > model.n_components:
        raise ValueError(
            f"{len(coeffs)} coefficients for {model.n_components} components"
        )
    delta = np.zeros(model.mean.shape[0])
    for i, t in enumerate(coeffs):
        delta += t * np.sqrt(model.variances[i]) * model.components[i]
    return grid.with_points(grid.points + delta.reshape(-1, 3))


def pca_deform(
    shape: SampledShape,
    grid: ControlGrid,
    model: PcaModel,
    coeffs: np.ndarray,
) -> tuple[SampledShape, ControlGrid]:
    """Displace the grid along principal modes and carry the shape along.

    The shape follows via the TPS projection from the base grid to the
    deformed grid; coefficients are in standard-deviation units.
    """
    deformed = pca_deform_grid(grid, model, coeffs)
    return project(shape, grid, deformed), deformed
