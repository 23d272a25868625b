"""Hexahedral control grids.

A grid of resolution ``r`` has ``(r+1)**3`` control points stored flat in
``idx(i, j, k) = (i*(r+1) + j)*(r+1) + k`` order (``i`` along u, ``j`` along v,
``k`` along w, w fastest).  A *cell* is the volume bounded by 8 lattice-adjacent
control points; its corners are handed around as ``(8, 3)`` arrays ordered by
local ``(u, v, w)`` bits with w fastest.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

# Corner ordering of a cell: local (u, v, w) in {0,1}^3, w fastest.
CORNER_BITS = np.array(
    [[0, 0, 0], [0, 0, 1], [0, 1, 0], [0, 1, 1],
     [1, 0, 0], [1, 0, 1], [1, 1, 0], [1, 1, 1]],
    dtype=np.int64,
)


@dataclass(frozen=True)
class ControlGrid:
    """Control-point positions of one resolution level.

    Treated as an immutable value: operations return new grids.
    """

    resolution: int
    points: np.ndarray  # ((r+1)**3, 3) float64

    def __post_init__(self):
        r = self.resolution
        if r < 1:
            raise ValueError(f"resolution must be >= 1, got {r}")
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.shape != ((r + 1) ** 3, 3):
            raise ValueError(
                f"expected {(r + 1) ** 3} points of dim 3, got shape {pts.shape}"
            )
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return (self.resolution + 1) ** 3

    def idx(self, i: int, j: int, k: int) -> int:
        n = self.resolution + 1
        return (i * n + j) * n + k

    def lattice(self) -> np.ndarray:
        """Points reshaped to (r+1, r+1, r+1, 3); axis order (i, j, k)."""
        n = self.resolution + 1
        return self.points.reshape(n, n, n, 3)

    def with_points(self, points: np.ndarray) -> "ControlGrid":
        return ControlGrid(self.resolution, points)

    def cell_corners(self, i: int, j: int, k: int) -> np.ndarray:
        """Corner positions (8, 3) of cell (i, j, k), CORNER_BITS order."""
        r = self.resolution
        if not (0 <= i < r and 0 <= j < r and 0 <= k < r):
            raise IndexError(f"cell ({i},{j},{k}) out of range for resolution {r}")
        nodes = [self.idx(i + b[0], j + b[1], k + b[2]) for b in CORNER_BITS]
        return self.points[nodes]


def regular_grid(r: int, lo: float, hi: float) -> ControlGrid:
    """Regular lattice over [lo, hi]^3: points = lo + (hi-lo)*(i,j,k)/r."""
    if r < 1:
        raise ValueError(f"resolution must be >= 1, got {r}")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
    coords = lo + (hi - lo) * np.arange(r + 1, dtype=np.float64) / r
    gi, gj, gk = np.meshgrid(coords, coords, coords, indexing="ij")
    pts = np.stack([gi, gj, gk], axis=-1).reshape(-1, 3)
    return ControlGrid(r, pts)


def trilinear_weights(uvw: np.ndarray) -> np.ndarray:
    """Trilinear corner weights (..., 8) for parameters (..., 3)."""
    uvw = np.asarray(uvw, dtype=np.float64)
    c = uvw[..., None, :]  # (..., 1, 3)
    bits = CORNER_BITS  # (8, 3)
    factors = np.where(bits == 1, c, 1.0 - c)  # (..., 8, 3)
    return factors[..., 0] * factors[..., 1] * factors[..., 2]


def trilinear_eval(corners: np.ndarray, uvw: np.ndarray) -> np.ndarray:
    """Standard 8-corner trilinear blend.

    ``corners``: (..., 8, 3) cell corners, ``uvw``: (..., 3) parameters.
    Defined for all of R^3 (the same polynomial outside [0,1]^3).
    """
    w = trilinear_weights(uvw)  # (..., 8)
    return np.einsum("...m,...mx->...x", w, np.asarray(corners, dtype=np.float64))


def trilinear_jacobian(corners: np.ndarray, uvw: np.ndarray) -> np.ndarray:
    """Jacobian d(blend)/d(u,v,w), shape (..., 3, 3) with J[..., x, p]."""
    uvw = np.asarray(uvw, dtype=np.float64)
    corners = np.asarray(corners, dtype=np.float64)
    c = uvw[..., None, :]  # (..., 1, 3)
    bits = CORNER_BITS
    factors = np.where(bits == 1, c, 1.0 - c)  # (..., 8, 3)
    signs = np.where(bits == 1, 1.0, -1.0)  # (8, 3)
    cols = []
    for p in range(3):
        # derivative of the weight w.r.t. parameter p: drop factor p, keep sign
        others = [q for q in range(3) if q != p]
        dweight = signs[:, p] * factors[..., others[0]] * factors[..., others[1]]
        cols.append(np.einsum("...m,...mx->...x", dweight, corners))
    return np.stack(cols, axis=-1)  # (..., 3, 3): columns are d/du, d/dv, d/dw


def subdivide(grid: ControlGrid) -> ControlGrid:
    """Split every cell into 8; resolution doubles.

    Original control points are preserved bit-for-bit at even lattice indices;
    new edge points are means of 2 endpoints, face points means of 4 corners,
    cell centers means of 8 corners.
    """
    r = grid.resolution
    p = grid.lattice()
    out = np.empty((2 * r + 1, 2 * r + 1, 2 * r + 1, 3), dtype=np.float64)
    out[::2, ::2, ::2] = p
    # edge midpoints (one odd index)
    out[1::2, ::2, ::2] = (p[:-1, :, :] + p[1:, :, :]) / 2.0
    out[::2, 1::2, ::2] = (p[:, :-1, :] + p[:, 1:, :]) / 2.0
    out[::2, ::2, 1::2] = (p[:, :, :-1] + p[:, :, 1:]) / 2.0
    # face centers (two odd indices)
    out[1::2, 1::2, ::2] = (p[:-1, :-1, :] + p[1:, :-1, :]
                            + p[:-1, 1:, :] + p[1:, 1:, :]) / 4.0
    out[1::2, ::2, 1::2] = (p[:-1, :, :-1] + p[1:, :, :-1]
                            + p[:-1, :, 1:] + p[1:, :, 1:]) / 4.0
    out[::2, 1::2, 1::2] = (p[:, :-1, :-1] + p[:, 1:, :-1]
                            + p[:, :-1, 1:] + p[:, 1:, 1:]) / 4.0
    # cell centers (three odd indices)
    out[1::2, 1::2, 1::2] = (
        p[:-1, :-1, :-1] + p[1:, :-1, :-1] + p[:-1, 1:, :-1] + p[1:, 1:, :-1]
        + p[:-1, :-1, 1:] + p[1:, :-1, 1:] + p[:-1, 1:, 1:] + p[1:, 1:, 1:]
    ) / 8.0
    return ControlGrid(2 * r, out.reshape(-1, 3))


def _diff_1d(r: int, kind: str) -> sp.csr_matrix:
    """1D difference operator on r+1 samples with spacing h = 1/r.

    kind 'first'   : central in the interior, one-sided at the two ends.
    kind 'central' : central, boundary rows copy the nearest interior row
                     (used as a factor of the mixed second derivative).
    kind 'second'  : 3-point second difference, boundary rows copy the
                     nearest interior stencil.
    """
    n = r + 1
    h = 1.0 / r
    m = sp.lil_matrix((n, n))
    if kind == "first":
        m[0, 0], m[0, 1] = -1.0 / h, 1.0 / h
        m[n - 1, n - 2], m[n - 1, n - 1] = -1.0 / h, 1.0 / h
        for i in range(1, n - 1):
            m[i, i - 1], m[i, i + 1] = -0.5 / h, 0.5 / h
        return m.tocsr()
    if r < 2:
        raise ValueError("second-derivative stencils need resolution >= 2")
    for i in range(n):
        c = min(max(i, 1), n - 2)  # nearest interior stencil center
        if kind == "central":
            m[i, c - 1], m[i, c + 1] = -0.5 / h, 0.5 / h
        elif kind == "second":
            m[i, c - 1], m[i, c], m[i, c + 1] = 1.0 / h**2, -2.0 / h**2, 1.0 / h**2
        else:
            raise ValueError(f"unknown stencil kind {kind!r}")
    return m.tocsr()


_OPS_CACHE: dict[tuple[int, bool], dict[str, sp.csr_matrix]] = {}


def diff_operators(r: int, second: bool = True) -> dict[str, sp.csr_matrix]:
    """Sparse operators mapping flat point arrays to per-node derivatives.

    Keys 'u','v','w' (first partials) and, when ``second`` and r >= 2,
    'uu','vv','ww','uv','vw','uw'.  Parameter spacing is h = 1/r.
    """
    key = (r, second and r >= 2)
    cached = _OPS_CACHE.get(key)
    if cached is not None:
        return cached
    eye = sp.identity(r + 1, format="csr")
    d1 = _diff_1d(r, "first")
    ops = {
        "u": sp.kron(sp.kron(d1, eye), eye, format="csr"),
        "v": sp.kron(sp.kron(eye, d1), eye, format="csr"),
        "w": sp.kron(sp.kron(eye, eye), d1, format="csr"),
    }
    if second and r >= 2:
        c1 = _diff_1d(r, "central")
        d2 = _diff_1d(r, "second")
        ops["uu"] = sp.kron(sp.kron(d2, eye), eye, format="csr")
        ops["vv"] = sp.kron(sp.kron(eye, d2), eye, format="csr")
        ops["ww"] = sp.kron(sp.kron(eye, eye), d2, format="csr")
        ops["uv"] = sp.kron(sp.kron(c1, c1), eye, format="csr")
        ops["vw"] = sp.kron(sp.kron(eye, c1), c1, format="csr")
        ops["uw"] = sp.kron(sp.kron(c1, eye), c1, format="csr")
    _OPS_CACHE[key] = ops
    return ops


@dataclass(frozen=True)
class GridDerivatives:
    """Per-node finite-difference partials of the grid map V(u,v,w)."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    uu: np.ndarray | None = None
    vv: np.ndarray | None = None
    ww: np.ndarray | None = None
    uv: np.ndarray | None = None
    vw: np.ndarray | None = None
    uw: np.ndarray | None = None


def grid_derivatives(grid: ControlGrid, second: bool = True) -> GridDerivatives:
    """First (and optionally second) partials at every node.

    Interior nodes use central differences; boundary nodes use one-sided
    first differences and copy the nearest interior second-difference
    stencil.  Raises for r < 2 when second derivatives are requested.
    """
    r = grid.resolution
    if second and r < 2:
        raise ValueError(
            f"second derivatives need resolution >= 2, got {r}"
        )
    ops = diff_operators(r, second=second)
    p = grid.points
    first = {k: ops[k] @ p for k in ("u", "v", "w")}
    if not second:
        return GridDerivatives(**first)
    rest = {k: ops[k] @ p for k in ("uu", "vv", "ww", "uv", "vw", "uw")}
    return GridDerivatives(**first, **rest)


_CELL_NODES_CACHE: dict[int, np.ndarray] = {}


def cell_node_indices(r: int) -> np.ndarray:
    """(r^3, 8) flat node indices of every cell's corners, cells in (i,j,k)
    lexicographic order, corners in CORNER_BITS order."""
    cached = _CELL_NODES_CACHE.get(r)
    if cached is not None:
        return cached
    n = r + 1
    ci, cj, ck = np.meshgrid(np.arange(r), np.arange(r), np.arange(r), indexing="ij")
    base = np.stack([ci, cj, ck], axis=-1).reshape(-1, 3)  # (r^3, 3)
    corners = base[:, None, :] + CORNER_BITS[None, :, :]  # (r^3, 8, 3)
    flat = (corners[..., 0] * n + corners[..., 1]) * n + corners[..., 2]
    flat = np.ascontiguousarray(flat)
    _CELL_NODES_CACHE[r] = flat
    return flat


def all_cell_corners(grid: ControlGrid) -> np.ndarray:
    """Corner positions of every cell, shape (r^3, 8, 3)."""
    return grid.points[cell_node_indices(grid.resolution)]


_SUBCELL_CACHE: dict[int, np.ndarray] = {}


def subcell_weights(s: int) -> np.ndarray:
    """Trilinear weights (s^3, 8) of the subcell centers ((a+.5)/s, ...),
    subcells in (a,b,c) lexicographic order with c fastest."""
    cached = _SUBCELL_CACHE.get(s)
    if cached is not None:
        return cached
    t = (np.arange(s, dtype=np.float64) + 0.5) / s
    ta, tb, tc = np.meshgrid(t, t, t, indexing="ij")
    uvw = np.stack([ta, tb, tc], axis=-1).reshape(-1, 3)
    w = trilinear_weights(uvw)
    _SUBCELL_CACHE[s] = w
    return w


def ball_covering(grid: ControlGrid, s: int) -> np.ndarray:
    """Centers of the per-cell ball covering, shape (r^3 * s^3, 3).

    For each cell the centers sit at the trilinear images of the subcell
    midpoints ((a+0.5)/s, (b+0.5)/s, (c+0.5)/s); each center is therefore a
    fixed linear function of its cell's 8 corner positions.
    """
    if s < 1:
        raise ValueError(f"covering subdivision must be >= 1, got {s}")
    corners = all_cell_corners(grid)  # (C, 8, 3)
    w = subcell_weights(s)  # (S, 8)
    centers = np.einsum("tm,cmx->ctx", w, corners)  # (C, S, 3)
    return np.ascontiguousarray(centers.reshape(-1, 3))


def inverted_cells(grid: ControlGrid) -> list[tuple[int, int, int]]:
    """Cells whose trilinear Jacobian determinant is <= 0 at any corner."""
    r = grid.resolution
    corners = all_cell_corners(grid)  # (C, 8, 3)
    bad = np.zeros(corners.shape[0], dtype=bool)
    for m, bits in enumerate(CORNER_BITS):
        uvw = bits.astype(np.float64)
        jac = trilinear_jacobian(corners, np.broadcast_to(uvw, (corners.shape[0], 3)))
        bad |= np.linalg.det(jac) <= 0.0
    out = []
    for flat in np.nonzero(bad)[0]:
        i, rem = divmod(int(flat), r * r)
        j, k = divmod(rem, r)
        out.append((i, j, k))
    return out
