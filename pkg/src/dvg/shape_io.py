"""Shape loading, unit-cube normalization, and surface sampling.

Supported formats: OBJ (v/f records, 1-based indices, quads and larger
polygons fan-triangulated), ascii PLY (vertex + face elements), and XYZ
(whitespace-separated floats, one point per line).  Pointcloud inputs bypass
surface sampling and are used as-is after normalization.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MeshFormatError(ValueError):
    """Malformed shape file; message carries the offending line or element."""


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray  # (n, 3) float64
    faces: np.ndarray  # (m, 3) int64 triangle indices

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64).reshape(-1, 3))
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if len(f) and (f.min() < 0 or f.max() >= len(v)):
            raise MeshFormatError(
                f"face index out of range: max {f.max()} for {len(v)} vertices"
            )


@dataclass(frozen=True)
class SampledShape:
    """Point samples of a shape, normalized into the unit cube.

    ``normalization`` stores the (center, scale) used so the original
    coordinates can be recovered: original = (unit - 0.5)/scale + center.
    """

    points: np.ndarray  # (k, 3) float64, in [0,1]^3
    source_mesh: Mesh | None
    center: np.ndarray  # (3,) original-space center
    scale: float  # positive

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
            raise ValueError(f"need at least one 3D point, got shape {pts.shape}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(
            self, "center", np.asarray(self.center, dtype=np.float64).reshape(3)
        )
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    def denormalize(self, points: np.ndarray) -> np.ndarray:
        """Map unit-cube coordinates back to the original frame."""
        return (np.asarray(points, dtype=np.float64) - 0.5) / self.scale + self.center


def _parse_face_indices(tokens: list[str], n_vertices: int, lineno: int) -> list[int]:
    idxs = []
    for tok in tokens:
        head = tok.split("/")[0]
        try:
            i = int(head)
        except ValueError:
            raise MeshFormatError(f"line {lineno}: bad face index {tok!r}") from None
        if i < 0:
            i = n_vertices + i  # OBJ relative indexing
        else:
            i = i - 1
        if not 0 <= i < n_vertices:
            raise MeshFormatError(
                f"line {lineno}: face index {tok!r} out of range (have {n_vertices} vertices)"
            )
        idxs.append(i)
    return idxs


def _fan_triangulate(poly: list[int]) -> list[list[int]]:
    return [[poly[0], poly[a], poly[a + 1]] for a in range(1, len(poly) - 1)]


def _load_obj(path: Path) -> tuple[np.ndarray, np.ndarray | None]:
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise MeshFormatError(f"line {lineno}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(x) for x in parts[1:4]])
                except ValueError:
                    raise MeshFormatError(
                        f"line {lineno}: bad vertex coordinate in {line.strip()!r}"
                    ) from None
            elif parts[0] == "f":
                if len(parts) < 4:
                    raise MeshFormatError(f"line {lineno}: face needs >= 3 indices")
                poly = _parse_face_indices(parts[1:], len(vertices), lineno)
                faces.extend(_fan_triangulate(poly))
    if not vertices:
        raise MeshFormatError(f"{path}: zero vertices")
    v = np.asarray(vertices, dtype=np.float64)
    return v, (np.asarray(faces, dtype=np.int64) if faces else None)


def _load_ply(path: Path) -> tuple[np.ndarray, np.ndarray | None]:
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise MeshFormatError(f"{path}: missing 'ply' magic")
    elements: list[tuple[str, int]] = []
    vertex_props: list[str] = []
    i = 1
    ascii_fmt = False
    while i < len(lines):
        parts = lines[i].split()
        i += 1
        if not parts:
            continue
        if parts[0] == "format":
            ascii_fmt = len(parts) > 1 and parts[1] == "ascii"
        elif parts[0] == "element":
            if len(parts) < 3:
                raise MeshFormatError(f"line {i}: malformed element declaration")
            elements.append((parts[1], int(parts[2])))
        elif parts[0] == "property" and elements and elements[-1][0] == "vertex":
            vertex_props.append(parts[-1])
        elif parts[0] == "end_header":
            break
    else:
        raise MeshFormatError(f"{path}: missing end_header")
    if not ascii_fmt:
        raise MeshFormatError(f"{path}: only ascii PLY is supported")
    try:
        xi, yi, zi = (vertex_props.index(n) for n in ("x", "y", "z"))
    except ValueError:
        raise MeshFormatError(f"{path}: vertex element lacks x/y/z properties") from None

    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    for name, count in elements:
        for e in range(count):
            if i >= len(lines):
                raise MeshFormatError(f"{path}: {name} element {e}: unexpected end of file")
            parts = lines[i].split()
            i += 1
            try:
                if name == "vertex":
                    vertices.append([float(parts[xi]), float(parts[yi]), float(parts[zi])])
                elif name == "face":
                    n = int(parts[0])
                    if len(parts) < n + 1 or n < 3:
                        raise MeshFormatError(
                            f"{path}: face element {e}: bad vertex list"
                        )
                    poly = [int(x) for x in parts[1 : n + 1]]
                    faces.extend(_fan_triangulate(poly))
                # other elements are skipped line-by-line
            except (ValueError, IndexError):
                raise MeshFormatError(f"{path}: {name} element {e}: malformed record") from None
    if not vertices:
        raise MeshFormatError(f"{path}: zero vertices")
    v = np.asarray(vertices, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64) if faces else None
    if f is not None and len(f) and (f.min() < 0 or f.max() >= len(v)):
        raise MeshFormatError(f"{path}: face index out of range")
    return v, f


def _load_xyz(path: Path) -> tuple[np.ndarray, None]:
    points: list[list[float]] = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) < 3:
                raise MeshFormatError(f"line {lineno}: need 3 coordinates per point")
            try:
                points.append([float(x) for x in parts[:3]])
            except ValueError:
                raise MeshFormatError(
                    f"line {lineno}: bad coordinate in {line.strip()!r}"
                ) from None
    if not points:
        raise MeshFormatError(f"{path}: zero vertices")
    return np.asarray(points, dtype=np.float64), None


def load_shape(path: str | Path, format: str | None = None) -> tuple[np.ndarray, np.ndarray | None]:
    """Load raw vertices (n, 3) and optional triangle faces (m, 3).

    ``format`` overrides the extension-based detection ('obj' | 'ply' | 'xyz').
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"shape file not found: {path}")
    fmt = (format or path.suffix.lstrip(".")).lower()
    loaders = {"obj": _load_obj, "ply": _load_ply, "xyz": _load_xyz}
    if fmt not in loaders:
        raise ValueError(f"unsupported shape format {fmt!r} (expected obj, ply, or xyz)")
    return loaders[fmt](path)


def normalize_to_unit_cube(
    vertices: np.ndarray, margin: float = 0.05
) -> tuple[np.ndarray, np.ndarray, float]:
    """Uniformly scale + translate vertices into the unit cube.

    The output bounding box is centered at (0.5, 0.5, 0.5) and its longest
    extent equals 1 - 2*margin.  Returns (vertices', center, scale) with
    unit = (original - center)*scale + 0.5.
    """
    v = np.asarray(vertices, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 1:
        raise ValueError(f"need (n, 3) vertices, got shape {v.shape}")
    if not 0 <= margin < 0.5:
        raise ValueError(f"margin must be in [0, 0.5), got {margin}")
    lo = v.min(axis=0)
    hi = v.max(axis=0)
    extent = float((hi - lo).max())
    if extent == 0.0:
        raise ValueError("all vertices identical: shape has zero extent")
    center = (lo + hi) / 2.0
    scale = (1.0 - 2.0 * margin) / extent
    return (v - center) * scale + 0.5, center, scale


def denormalize(points: np.ndarray, center: np.ndarray, scale: float) -> np.ndarray:
    """Inverse of :func:`normalize_to_unit_cube` for the stored (center, scale)."""
    return (np.asarray(points, dtype=np.float64) - 0.5) / scale + center


def triangle_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def sample_surface(mesh: Mesh, k: int, seed: int = 0) -> np.ndarray:
    """Draw k i.i.d. area-weighted surface samples from a triangle mesh.

    Triangles are chosen with probability proportional to area; the point is
    uniform within the triangle (square-root barycentric trick).  Zero-area
    triangles are excluded from the distribution.  Deterministic given seed.
    """
    if k < 1:
        raise ValueError(f"sample count must be >= 1, got {k}")
    if mesh.faces is None or len(mesh.faces) == 0:
        raise ValueError("mesh has no triangles to sample")
    areas = triangle_areas(mesh.vertices, mesh.faces)
    total = areas.sum()
    if total <= 0.0:
        raise ValueError("all triangles are degenerate (total surface area is zero)")
    rng = np.random.default_rng(seed)
    probs = areas / total
    tri = rng.choice(len(areas), size=k, p=probs)
    r1 = rng.random(k)
    r2 = rng.random(k)
    sq = np.sqrt(r1)
    u = 1.0 - sq
    v = r2 * sq
    a = mesh.vertices[mesh.faces[tri, 0]]
    b = mesh.vertices[mesh.faces[tri, 1]]
    c = mesh.vertices[mesh.faces[tri, 2]]
    return a + u[:, None] * (b - a) + v[:, None] * (c - a)


def load_sampled_shape(
    path: str | Path,
    k: int = 2048,
    margin: float = 0.05,
    seed: int = 0,
    format: str | None = None,
) -> SampledShape:
    """Load, normalize, and (for meshes) surface-sample a shape file."""
    vertices, faces = load_shape(path, format=format)
    norm_vertices, center, scale = normalize_to_unit_cube(vertices, margin=margin)
    if faces is None:
        return SampledShape(points=norm_vertices, source_mesh=None, center=center, scale=scale)
    mesh = Mesh(vertices=norm_vertices, faces=faces)
    points = sample_surface(mesh, k, seed=seed)
    return SampledShape(points=points, source_mesh=mesh, center=center, scale=scale)


def write_xyz(points: np.ndarray, path: str | Path) -> None:
    points = np.asarray(points, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        for p in points:
            fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")


def write_obj(mesh: Mesh, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in mesh.vertices:
            fh.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
