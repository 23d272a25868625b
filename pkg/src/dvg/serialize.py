"""JSON (de)serialization for grids, models, params, shapes, and PCA models.

Floats are emitted with 17 significant digits so every double round-trips
bit-exactly, and emission order is fixed, so identical inputs produce
byte-identical files.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .analysis import DvgDescriptor, PcaModel
from .energy import EnergyParams
from .grid import ControlGrid
from .optimizer import DvgModel
from .shape_io import Mesh, SampledShape


def _emit(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError(f"cannot serialize non-finite float {x}")
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _emit(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_emit(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_emit(v)}" for k, v in obj.items()) + "}"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps(obj) -> str:
    """Stable, compact JSON with 17-significant-digit floats."""
    return _emit(obj)


def dump(obj, path: str | Path) -> None:
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


def load(path: str | Path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


# -- control grids -----------------------------------------------------------

def grid_to_dict(grid: ControlGrid) -> dict:
    return {
        "version": 1,
        "resolution": grid.resolution,
        "points": grid.points.ravel(),
    }


def grid_from_dict(d: dict) -> ControlGrid:
    pts = np.asarray(d["points"], dtype=np.float64).reshape(-1, 3)
    return ControlGrid(int(d["resolution"]), pts)


# -- energy params -----------------------------------------------------------

def params_to_dict(p: EnergyParams) -> dict:
    return {
        "lambda_e": p.lambda_e,
        "lambda_b": p.lambda_b,
        "lambda_i": p.lambda_i,
        "alpha": p.alpha,
        "beta": p.beta,
        "gamma": p.gamma,
        "ball_radius": p.ball_radius,
        "stiffness": p.stiffness,
        "covering_s": p.covering_s,
    }


def params_from_dict(d: dict) -> EnergyParams:
    return EnergyParams(
        lambda_e=float(d["lambda_e"]),
        lambda_b=float(d["lambda_b"]),
        lambda_i=float(d["lambda_i"]),
        alpha=float(d["alpha"]),
        beta=float(d["beta"]),
        gamma=float(d["gamma"]),
        ball_radius=None if d.get("ball_radius") is None else float(d["ball_radius"]),
        stiffness=None if d.get("stiffness") is None else float(d["stiffness"]),
        covering_s=int(d.get("covering_s", 2)),
    )


# -- fitted models ------------------------------------------------------------

def model_to_dict(model: DvgModel) -> dict:
    return {
        "version": 1,
        "levels": [grid_to_dict(g) for g in model.levels],
        "residuals": [r.ravel() for r in model.residuals],
        "fading": list(model.fading),
        "params": params_to_dict(model.params),
        "shape_ref": model.shape_ref,
    }


def model_from_dict(d: dict) -> DvgModel:
    levels = tuple(grid_from_dict(g) for g in d["levels"])
    residuals = tuple(
        np.asarray(r, dtype=np.float64).reshape(-1, 3) for r in d["residuals"]
    )
    return DvgModel(
        levels=levels,
        residuals=residuals,
        fading=tuple(float(a) for a in d["fading"]),
        params=params_from_dict(d["params"]),
        shape_ref=str(d.get("shape_ref", "")),
    )


def save_model(model: DvgModel, path: str | Path) -> None:
    dump(model_to_dict(model), path)


def load_model(path: str | Path) -> DvgModel:
    return model_from_dict(load(path))


# -- sampled shapes ------------------------------------------------------------

def shape_to_dict(shape: SampledShape) -> dict:
    mesh = None
    if shape.source_mesh is not None:
        mesh = {
            "vertices": shape.source_mesh.vertices.ravel(),
            "faces": shape.source_mesh.faces.ravel(),
        }
    return {
        "version": 1,
        "points": shape.points.ravel(),
        "mesh": mesh,
        "normalization": {"center": shape.center, "scale": shape.scale},
    }


def shape_from_dict(d: dict) -> SampledShape:
    mesh = None
    if d.get("mesh") is not None:
        mesh = Mesh(
            vertices=np.asarray(d["mesh"]["vertices"], dtype=np.float64).reshape(-1, 3),
            faces=np.asarray(d["mesh"]["faces"], dtype=np.int64).reshape(-1, 3),
        )
    norm = d["normalization"]
    return SampledShape(
        points=np.asarray(d["points"], dtype=np.float64).reshape(-1, 3),
        source_mesh=mesh,
        center=np.asarray(norm["center"], dtype=np.float64),
        scale=float(norm["scale"]),
    )


def save_shape(shape: SampledShape, path: str | Path) -> None:
    dump(shape_to_dict(shape), path)


def load_sampled_shape_json(path: str | Path) -> SampledShape:
    return shape_from_dict(load(path))


# -- descriptors and PCA -------------------------------------------------------

def descriptor_to_dict(desc: DvgDescriptor, id: str) -> dict:
    return {"id": id, "resolution": desc.resolution, "vector": desc.vector}


def descriptor_from_dict(d: dict) -> tuple[str, DvgDescriptor]:
    return str(d["id"]), DvgDescriptor(
        resolution=int(d["resolution"]),
        vector=np.asarray(d["vector"], dtype=np.float64),
    )


def write_descriptor_db(entries: list[tuple[str, DvgDescriptor]], path: str | Path) -> None:
    """JSON lines, one {"id", "resolution", "vector"} object per shape."""
    with open(path, "w", encoding="utf-8") as fh:
        for id, desc in entries:
            fh.write(dumps(descriptor_to_dict(desc, id)) + "\n")


def read_descriptor_db(path: str | Path) -> list[tuple[str, DvgDescriptor]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(descriptor_from_dict(json.loads(line)))
    return out


def pca_to_dict(model: PcaModel) -> dict:
    return {
        "version": 1,
        "resolution": model.resolution,
        "mean": model.mean,
        "components": [c for c in model.components],
        "variances": model.variances,
        "n_samples": model.n_samples,
    }


def pca_from_dict(d: dict) -> PcaModel:
    return PcaModel(
        resolution=int(d["resolution"]),
        mean=np.asarray(d["mean"], dtype=np.float64),
        components=np.asarray(d["components"], dtype=np.float64).reshape(
            len(d["components"]), -1
        ),
        variances=np.asarray(d["variances"], dtype=np.float64),
        n_samples=int(d["n_samples"]),
    )


def save_pca(model: PcaModel, path: str | Path) -> None:
    dump(pca_to_dict(model), path)


def load_pca(path: str | Path) -> PcaModel:
    return pca_from_dict(load(path))
