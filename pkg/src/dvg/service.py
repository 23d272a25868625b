"""HTTP service backing the interactive editor.

Serves a read-only workspace of precomputed shapes, fitted grids, and a PCA
model.  All handlers are stateless: slider coefficients are absolute, so a
request sequence yields the same responses as the matching CLI invocations.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import serialize
from .analysis import PcaModel, pca_deform
from .optimizer import DvgModel
from .registration import project
from .shape_io import SampledShape

MAX_RESPONSE_VERTICES = 50_000


class Workspace:
    """Immutable in-memory view of a workspace directory."""

    def __init__(self, directory: str | Path):
        directory = Path(directory)
        manifest_path = directory / "workspace.json"
        if not manifest_path.is_file():
            raise FileNotFoundError(f"workspace manifest not found: {manifest_path}")
        manifest = serialize.load(manifest_path)
        self.shape_order: list[str] = []
        self.shapes: dict[str, SampledShape] = {}
        for entry in manifest.get("shapes", []):
            shape = serialize.load_sampled_shape_json(directory / entry["shape"])
            self.shapes[entry["id"]] = shape
            self.shape_order.append(entry["id"])
        self.models: dict[str, DvgModel] = {}
        for entry in manifest.get("models", []):
            if entry["id"] not in self.shapes:
                raise ValueError(
                    f"model {entry['id']!r} references a shape id that does not exist"
                )
            self.models[entry["id"]] = serialize.load_model(directory / entry["model"])
        self.pca: PcaModel | None = None
        if manifest.get("pca"):
            self.pca = serialize.load_pca(directory / manifest["pca"])


class MeshTooLarge(Exception):
    pass


def _vertex_count(shape: SampledShape) -> int:
    if shape.source_mesh is not None:
        return len(shape.source_mesh.vertices)
    return len(shape.points)


def _mesh_payload(shape: SampledShape) -> dict:
    if _vertex_count(shape) > MAX_RESPONSE_VERTICES:
        raise MeshTooLarge()
    mesh = shape.source_mesh
    if mesh is not None:
        return {
            "vertices": mesh.vertices.ravel().tolist(),
            "faces": mesh.faces.ravel().tolist(),
        }
    return {"vertices": shape.points.ravel().tolist(), "faces": []}


def _grid_payload(grid) -> dict:
    return {"resolution": grid.resolution, "points": grid.points.ravel().tolist()}


def create_app(workspace_dir: str | Path) -> FastAPI:
    ws = Workspace(workspace_dir)
    app = FastAPI(title="dvg editor service")
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"https?://(localhost|127\.0\.0\.1)(:\d+)?",
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def _error(status: int, code: str, detail: str = "") -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": code, "detail": detail})

    @app.get("/shapes")
    def list_shapes():
        return [
            {
                "id": sid,
                "point_count": len(ws.shapes[sid].points),
                "has_mesh": ws.shapes[sid].source_mesh is not None,
            }
            for sid in ws.shape_order
        ]

    @app.get("/shapes/{shape_id}/mesh")
    def get_mesh(shape_id: str):
        shape = ws.shapes.get(shape_id)
        if shape is None:
            return _error(404, "unknown_shape", shape_id)
        if shape.source_mesh is None:
            return _error(422, "no_mesh", shape_id)
        try:
            return _mesh_payload(shape)
        except MeshTooLarge:
            return _error(413, "mesh_too_large", shape_id)

    @app.get("/shapes/{shape_id}/grid")
    def get_grid(shape_id: str):
        model = ws.models.get(shape_id)
        if model is None:
            return _error(404, "unknown_model", shape_id)
        return _grid_payload(model.final_grid)

    @app.get("/pca")
    def get_pca():
        if ws.pca is None:
            return _error(404, "no_pca")
        ratios = ws.pca.explained_variance_ratio()
        return {
            "resolution": ws.pca.resolution,
            "n_components": ws.pca.n_components,
            "variances": ws.pca.variances.tolist(),
            "explained_variance_ratio": ratios.tolist(),
        }

    @app.post("/deform")
    async def deform(body: dict):
        shape_id = body.get("shape_id")
        coeffs = body.get("coeffs", [])
        model = ws.models.get(shape_id)
        shape = ws.shapes.get(shape_id)
        if model is None or shape is None:
            return _error(404, "unknown_shape", str(shape_id))
        if ws.pca is None:
            return _error(404, "no_pca")
        if not isinstance(coeffs, list) or len(coeffs) > ws.pca.n_components:
            return _error(400, "bad_coefficients",
                          f"need at most {ws.pca.n_components} numbers")
        try:
            values = [float(c) for c in coeffs]
        except (TypeError, ValueError):
            return _error(400, "bad_coefficients", "coefficients must be numbers")
        if any(not math.isfinite(c) for c in values):
            return _error(400, "bad_coefficients", "coefficients must be finite")
        deformed_shape, deformed_grid = pca_deform(
            shape, model.final_grid, ws.pca, np.asarray(values)
        )
        try:
            payload = _mesh_payload(deformed_shape)
        except MeshTooLarge:
            return _error(413, "mesh_too_large", str(shape_id))
        payload["grid"] = _grid_payload(deformed_grid)
        payload["base_grid"] = _grid_payload(model.final_grid)
        return payload

    @app.post("/transfer")
    async def transfer(body: dict):
        source_id = body.get("source_id")
        target_id = body.get("target_id")
        source = ws.models.get(source_id)
        target = ws.models.get(target_id)
        if source is None or ws.shapes.get(source_id) is None:
            return _error(404, "unknown_shape", str(source_id))
        if target is None:
            return _error(404, "unknown_shape", str(target_id))
        if source.final_grid.resolution != target.final_grid.resolution:
            return _error(409, "resolution_mismatch",
                          f"{source.final_grid.resolution} vs {target.final_grid.resolution}")
        result = project(ws.shapes[source_id], source.final_grid, target.final_grid)
        try:
            payload = _mesh_payload(result)
        except MeshTooLarge:
            return _error(413, "mesh_too_large", str(source_id))
        payload["grid"] = _grid_payload(target.final_grid)
        return payload

    return app
