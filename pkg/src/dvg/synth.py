"""Synthetic shapes for benchmarks, demos, and tests."""
from __future__ import annotations

import numpy as np

from .shape_io import Mesh, SampledShape


def sphere_points(
    k: int = 2048,
    radius: float = 0.35,
    center: tuple[float, float, float] = (0.5, 0.5, 0.5),
    seed: int = 0,
) -> np.ndarray:
    """Uniform samples of a sphere surface (normalized Gaussian directions)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((k, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.asarray(center) + radius * v


def sphere_shape(
    k: int = 2048, radius: float = 0.35, seed: int = 0
) -> SampledShape:
    pts = sphere_points(k, radius, seed=seed)
    return SampledShape(points=pts, source_mesh=None, center=np.full(3, 0.5), scale=1.0)


def box_mesh(
    center: tuple[float, float, float], extents: tuple[float, float, float]
) -> Mesh:
    """Axis-aligned box as 8 vertices and 12 triangles."""
    c = np.asarray(center, dtype=np.float64)
    e = np.asarray(extents, dtype=np.float64) / 2.0
    signs = np.array(
        [[-1, -1, -1], [-1, -1, 1], [-1, 1, -1], [-1, 1, 1],
         [1, -1, -1], [1, -1, 1], [1, 1, -1], [1, 1, 1]],
        dtype=np.float64,
    )
    vertices = c + signs * e
    quads = [
        (0, 1, 3, 2), (4, 6, 7, 5),  # x- and x+ faces
        (0, 4, 5, 1), (2, 3, 7, 6),  # y- and y+
        (0, 2, 6, 4), (1, 5, 7, 3),  # z- and z+
    ]
    faces = []
    for a, b, cc, d in quads:
        faces.append([a, b, cc])
        faces.append([a, cc, d])
    return Mesh(vertices=vertices, faces=np.asarray(faces, dtype=np.int64))


def uv_sphere_mesh(
    center: tuple[float, float, float] = (0.5, 0.5, 0.5),
    radius: float = 0.35,
    n_lat: int = 16,
    n_lon: int = 24,
) -> Mesh:
    """Latitude/longitude triangulated sphere."""
    c = np.asarray(center, dtype=np.float64)
    verts = [c + np.array([0.0, 0.0, radius])]
    for i in range(1, n_lat):
        theta = np.pi * i / n_lat
        for j in range(n_lon):
            phi = 2.0 * np.pi * j / n_lon
            verts.append(
                c
                + radius
                * np.array(
                    [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)]
                )
            )
    verts.append(c + np.array([0.0, 0.0, -radius]))
    vertices = np.asarray(verts)
    south = len(vertices) - 1
    faces = []
    ring = lambda i, j: 1 + (i - 1) * n_lon + (j % n_lon)
    for j in range(n_lon):  # polar caps
        faces.append([0, ring(1, j), ring(1, j + 1)])
        faces.append([south, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)])
    for i in range(1, n_lat - 1):  # quad strips
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            d, e = ring(i + 1, j), ring(i + 1, j + 1)
            faces.append([a, d, e])
            faces.append([a, e, b])
    return Mesh(vertices=vertices, faces=np.asarray(faces, dtype=np.int64))
