"""Expressing shapes in grid-local coordinates.

Two routes: exact per-cell inversion of the trilinear map (Newton), and a
thin-plate-spline approximation fitted on all control points.  Cubification
maps a fitted grid onto the straight regular lattice; projection maps a shape
from one grid into another (deformation / style transfer).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist

from .grid import (
    ControlGrid,
    all_cell_corners,
    cell_node_indices,
    inverted_cells,
    regular_grid,
    trilinear_eval,
    trilinear_jacobian,
)
from .shape_io import Mesh, SampledShape

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 30
IN_CELL_EPS = 1e-9
DEFAULT_RIDGE_PER_SOURCE = 1e-8  # lam = 1e-8 * n unless given


class TpsSingularError(ValueError):
    """The TPS system cannot be solved; message names the deficiency."""


@dataclass(frozen=True)
class TpsMap:
    """Fitted 3D thin-plate spline: affine part + kernel weights.

    f(x) = A x + b + sum_i w_i * |x - c_i|  (biharmonic kernel phi(d) = d).
    """

    sources: np.ndarray  # (n, 3)
    affine: np.ndarray  # (3, 3)
    offset: np.ndarray  # (3,)
    weights: np.ndarray  # (n, 3)
    regularization: float


def tps_fit(sources: np.ndarray, targets: np.ndarray, lam: float = 0.0) -> TpsMap:
    """Solve the standard 3D TPS system with kernel phi(d) = d.

    The kernel block gets a ridge term ``lam`` on its diagonal; lam = 0 gives
    exact interpolation.  Requires n >= 4 non-coplanar sources.
    """
    sources = np.asarray(sources, dtype=np.float64).reshape(-1, 3)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1, 3)
    n = len(sources)
    if n != len(targets):
        raise ValueError(f"{n} sources vs {len(targets)} targets")
    if n < 4:
        raise TpsSingularError(f"need at least 4 sources, got {n}")
    kmat = cdist(sources, sources)
    if lam < 0:
        raise ValueError("regularization must be nonnegative")
    off_diag = kmat[~np.eye(n, dtype=bool)]
    if off_diag.size and off_diag.min() == 0.0:
        raise TpsSingularError("duplicated sources make the TPS system singular")
    poly = np.hstack([np.ones((n, 1)), sources])  # (n, 4)
    if np.linalg.matrix_rank(poly) < 4:
        raise TpsSingularError("coplanar sources make the TPS system singular")
    system = np.zeros((n + 4, n + 4))
    system[:n, :n] = kmat + lam * np.eye(n)
    system[:n, n:] = poly
    system[n:, :n] = poly.T
    rhs = np.zeros((n + 4, 3))
    rhs[:n] = targets
    try:
        sol = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise TpsSingularError(f"singular TPS system: {exc}") from None
    weights = sol[:n]
    offset = sol[n]
    affine = sol[n + 1 :].T  # rows of sol are coefficient per coordinate
    return TpsMap(
        sources=sources,
        affine=affine,
        offset=offset,
        weights=weights,
        regularization=lam,
    )


def tps_apply(tps: TpsMap, points: np.ndarray) -> np.ndarray:
    """Evaluate the spline at arbitrary points (defined on all of R^3)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    kernel = cdist(points, tps.sources)
    return points @ tps.affine.T + tps.offset + kernel @ tps.weights


def _newton_invert(
    corners: np.ndarray,
    q: np.ndarray,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> tuple[np.ndarray, np.ndarray]:
    """Batched Newton inversion of the trilinear map.

    ``corners``: (m, 8, 3), ``q``: (m, 3).  Returns (uvw, ok) where ok marks
    convergence to a parameter inside [-IN_CELL_EPS, 1+IN_CELL_EPS]^3; the
    returned uvw are clamped to [0, 1].  Singular Jacobians mark failure.
    """
    corners = np.asarray(corners, dtype=np.float64).reshape(-1, 8, 3)
    q = np.asarray(q, dtype=np.float64).reshape(-1, 3)
    m = len(q)
    uvw = np.full((m, 3), 0.5)
    converged = np.zeros(m, dtype=bool)
    singular = np.zeros(m, dtype=bool)
    resid = trilinear_eval(corners, uvw) - q
    converged |= np.linalg.norm(resid, axis=1) < tol
    for _ in range(max_iter):
        active = ~(converged | singular)
        if not active.any():
            break
        jac = trilinear_jacobian(corners[active], uvw[active])
        det = np.linalg.det(jac)
        bad = np.abs(det) < 1e-300
        if bad.any():
            act_idx = np.nonzero(active)[0]
            singular[act_idx[bad]] = True
            active = ~(converged | singular)
            if not active.any():
                break
            jac = trilinear_jacobian(corners[active], uvw[active])
        delta = np.linalg.solve(jac, resid[active][..., None])[..., 0]
        uvw[active] -= delta
        resid[active] = trilinear_eval(corners[active], uvw[active]) - q[active]
        converged |= (np.linalg.norm(resid, axis=1) < tol) & ~singular
    inside = np.all((uvw >= -IN_CELL_EPS) & (uvw <= 1.0 + IN_CELL_EPS), axis=1)
    ok = converged & inside & ~singular
    return np.clip(uvw, 0.0, 1.0), ok


def exact_local_coords(
    cell_corners: np.ndarray,
    q: np.ndarray,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> np.ndarray | None:
    """Invert one cell's trilinear map at q; None when q is not in the cell.

    Newton iteration starts at the cell-parameter center (0.5, 0.5, 0.5);
    divergence, a singular Jacobian, or a solution outside [0,1]^3 (beyond a
    1e-9 slack) all report not-in-cell.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    uvw, ok = _newton_invert(cell_corners, np.asarray(q, dtype=np.float64), tol, max_iter)
    return uvw[0] if ok[0] else None


@dataclass(frozen=True)
class Registration:
    """Per-point grid registration: cell indices and local coordinates.

    ``registered`` flags points resolved to some cell; ``global_coords`` maps
    into [0,1]^3 via ((i, j, k) + (u, v, w)) / r.
    """

    registered: np.ndarray  # (k,) bool
    cells: np.ndarray  # (k, 3) int, valid where registered
    local: np.ndarray  # (k, 3) float, valid where registered
    global_coords: np.ndarray  # (k, 3) float, valid where registered


def _warn_inverted(grid: ControlGrid) -> None:
    bad = inverted_cells(grid)
    if bad:
        warnings.warn(
            f"grid contains {len(bad)} degenerate/inverted cells: {bad[:16]}",
            RuntimeWarning,
            stacklevel=3,
        )


def locate_and_register(grid: ControlGrid, points: np.ndarray) -> Registration:
    """Resolve each point to (cell, local uvw) by exact trilinear inversion.

    Candidate cells are pre-filtered by their axis-aligned bounding boxes
    (inflated by 1e-9); among multiple accepting cells the lowest (i, j, k)
    lexicographic index wins.  Unregistered points are flagged, not fatal.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    r = grid.resolution
    _warn_inverted(grid)
    corners = all_cell_corners(grid)  # (C, 8, 3), lexicographic cell order
    lo = corners.min(axis=1) - IN_CELL_EPS  # (C, 3)
    hi = corners.max(axis=1) + IN_CELL_EPS
    k = len(points)
    registered = np.zeros(k, dtype=bool)
    cells = np.zeros((k, 3), dtype=np.int64)
    local = np.full((k, 3), np.nan)
    # Walk cells in lexicographic order so the first acceptance is the winner.
    pending = np.ones(k, dtype=bool)
    for c in range(corners.shape[0]):
        if not pending.any():
            break
        inside = pending & np.all((points >= lo[c]) & (points <= hi[c]), axis=1)
        if not inside.any():
            continue
        qs = points[inside]
        uvw, ok = _newton_invert(np.broadcast_to(corners[c], (len(qs), 8, 3)), qs)
        if not ok.any():
            continue
        hit = np.nonzero(inside)[0][ok]
        ci, rem = divmod(c, r * r)
        cj, ck = divmod(rem, r)
        registered[hit] = True
        cells[hit] = (ci, cj, ck)
        local[hit] = uvw[ok]
        pending[hit] = False
    global_coords = (cells + local) / r
    return Registration(registered=registered, cells=cells, local=local, global_coords=global_coords)


def default_ridge(n_sources: int) -> float:
    return DEFAULT_RIDGE_PER_SOURCE * n_sources


def grid_to_lattice_tps(grid: ControlGrid, lam: float | None = None) -> TpsMap:
    """TPS sending the grid's control points to the straight regular lattice."""
    lattice = regular_grid(grid.resolution, 0.0, 1.0)
    if lam is None:
        lam = default_ridge(grid.n_points)
    return tps_fit(grid.points, lattice.points, lam=lam)


def _transform_shape(shape: SampledShape, fn) -> SampledShape:
    points = fn(shape.points)
    mesh = shape.source_mesh
    if mesh is not None:
        mesh = Mesh(vertices=fn(mesh.vertices), faces=mesh.faces)
    return replace(shape, points=points, source_mesh=mesh)


def cubify(
    grid,
    shape: SampledShape,
    method: str = "tps",
    lam: float | None = None,
) -> SampledShape:
    """Warp a shape into canonical unit-cube coordinates via its fitted grid.

    ``grid`` is a ControlGrid or a fitted model (its final grid is used).
    'tps' (default) fits control points -> regular lattice and applies the
    spline everywhere (points outside the grid included).  'exact' inverts
    the trilinear map per point and falls back to the TPS value for points
    that register to no cell.
    """
    if method not in ("tps", "exact"):
        raise ValueError(f"unknown cubify method {method!r}")
    if not isinstance(grid, ControlGrid):
        grid = grid.final_grid
    tps = grid_to_lattice_tps(grid, lam=lam)
    if method == "tps":
        return _transform_shape(shape, lambda pts: tps_apply(tps, pts))

    def exact(pts: np.ndarray) -> np.ndarray:
        reg = locate_and_register(grid, pts)
        out = reg.global_coords.copy()
        missing = ~reg.registered
        if missing.any():
            out[missing] = tps_apply(tps, pts[missing])
        return out

    return _transform_shape(shape, exact)


def _eval_in_grid(grid: ControlGrid, coords: np.ndarray) -> np.ndarray:
    """Trilinear evaluation of unit-cube coordinates inside a grid."""
    r = grid.resolution
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
    scaled = coords * r
    cell = np.clip(np.floor(scaled).astype(np.int64), 0, r - 1)
    local = scaled - cell
    flat = (cell[:, 0] * r + cell[:, 1]) * r + cell[:, 2]
    corners = all_cell_corners(grid)[flat]
    return trilinear_eval(corners, local)


def project(
    shape: SampledShape,
    source_grid: ControlGrid,
    target_grid: ControlGrid,
    method: str = "tps",
    lam: float | None = None,
) -> SampledShape:
    """Carry a shape from its own grid into another grid of equal resolution.

    'tps' (default) interpolates source control points -> target control
    points.  'exact' registers against the source grid (cubifies exactly)
    and re-evaluates the global coordinates through the target's trilinear
    interpolation.
    """
    if source_grid.resolution != target_grid.resolution:
        raise ValueError(
            f"resolution mismatch: source {source_grid.resolution}, "
            f"target {target_grid.resolution}"
        )
    if method == "tps":
        if lam is None:
            lam = default_ridge(source_grid.n_points)
        tps = tps_fit(source_grid.points, target_grid.points, lam=lam)
        return _transform_shape(shape, lambda pts: tps_apply(tps, pts))
    if method == "exact":
        cubified = cubify(source_grid, shape, method="exact", lam=lam)
        return _transform_shape(cubified, lambda pts: _eval_in_grid(target_grid, pts))
    raise ValueError(f"unknown project method {method!r}")
