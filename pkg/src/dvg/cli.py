"""Command-line entry points for the full pipeline.

One binary with subcommands; every run echoes its fully resolved
configuration to the output directory as config.json.  Exit codes: 0 ok,
1 runtime failure, 2 usage/input error.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import serialize
from .analysis import (
    correspondences,
    descriptor,
    knn_search,
    pca_deform,
    pca_fit,
)
from .energy import EnergyParams
from .optimizer import DvgModel, ScheduleParams, fit_hierarchical
from .registration import cubify, project
from .shape_io import (
    Mesh,
    MeshFormatError,
    SampledShape,
    load_sampled_shape,
    load_shape,
    write_obj,
    write_xyz,
)
from .synth import box_mesh, sphere_shape, uv_sphere_mesh


class InputError(Exception):
    """Bad user input (missing file, malformed data): exit code 2."""


def _float17(x: float) -> str:
    return format(float(x), ".17g")


def _add_energy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda-e", type=float, default=1.0, help="elastic weight")
    p.add_argument("--lambda-b", type=float, default=0.4, help="bending weight")
    p.add_argument("--lambda-i", type=float, default=4.0, help="inclusion weight")
    p.add_argument("--alpha", type=float, default=1.0, help="first-derivative coefficient")
    p.add_argument("--beta", type=float, default=1.0, help="pure second-derivative coefficient")
    p.add_argument("--gamma", type=float, default=1.0, help="mixed second-derivative coefficient")
    p.add_argument("--ball-radius", type=float, default=None,
                   help="covering ball radius (default: half subcell diagonal)")
    p.add_argument("--stiffness", type=float, default=None,
                   help="inclusion sigmoid stiffness (default: 20/radius)")
    p.add_argument("--covering", type=int, default=2, help="covering balls per axis per cell")


def _add_shape_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--samples", type=int, default=2048, help="surface sample count for meshes")
    p.add_argument("--margin", type=float, default=0.05, help="unit-cube normalization margin")
    p.add_argument("--seed", type=int, default=0, help="sampling RNG seed")


def _energy_params(args) -> EnergyParams:
    return EnergyParams(
        lambda_e=args.lambda_e,
        lambda_b=args.lambda_b,
        lambda_i=args.lambda_i,
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
        ball_radius=args.ball_radius,
        stiffness=args.stiffness,
        covering_s=args.covering,
    )


def _load_any_shape(path: str, args=None) -> SampledShape:
    """Shape from a mesh/pointcloud file or a previously saved shape JSON."""
    p = Path(path)
    if not p.is_file():
        raise InputError(f"shape file not found: {path}")
    if p.suffix.lower() == ".json":
        return serialize.load_sampled_shape_json(p)
    kwargs = {}
    if args is not None:
        kwargs = {"k": args.samples, "margin": args.margin, "seed": args.seed}
    try:
        return load_sampled_shape(p, **kwargs)
    except MeshFormatError as exc:
        raise InputError(str(exc)) from None


def _load_model(path: str) -> DvgModel:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"model file not found: {path}")
    return serialize.load_model(p)


def _load_points(path: str) -> np.ndarray:
    """Raw coordinates with no re-normalization (cubified clouds stay put)."""
    p = Path(path)
    if not p.is_file():
        raise InputError(f"file not found: {path}")
    if p.suffix.lower() == ".json":
        return serialize.load_sampled_shape_json(p).points
    try:
        vertices, _ = load_shape(p)
    except MeshFormatError as exc:
        raise InputError(str(exc)) from None
    return vertices


def _write_shape_output(shape: SampledShape, out: Path) -> None:
    if out.suffix.lower() == ".obj":
        if shape.source_mesh is None:
            raise InputError(f"cannot write OBJ {out}: shape has no mesh")
        write_obj(shape.source_mesh, out)
    elif out.suffix.lower() == ".xyz":
        write_xyz(shape.points, out)
    elif out.suffix.lower() == ".json":
        serialize.save_shape(shape, out)
    else:
        raise InputError(f"unsupported output extension {out.suffix!r} (obj, xyz, or json)")


def _echo_config(out_dir: Path, command: str, args) -> None:
    cfg = {"command": command}
    for key, val in sorted(vars(args).items()):
        if key in ("func", "command"):
            continue
        cfg[key.replace("_", "-")] = val
    serialize.dump(cfg, out_dir / "config.json")


def cmd_fit(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    shape = _load_any_shape(args.shape, args)
    try:
        fading = tuple(float(x) for x in args.fading.split(",")) if args.fading else None
        schedule = ScheduleParams(
            max_level=args.levels,
            steps_per_level=args.steps,
            step_size=args.step_size,
            fading=fading,
            convergence_tol=args.tol,
            seed=args.seed,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    shape_ref = args.id if args.id else Path(args.shape).stem
    model, trace = fit_hierarchical(
        shape, schedule, _energy_params(args), shape_ref=shape_ref
    )
    serialize.save_model(model, out_dir / "model.json")
    serialize.save_shape(shape, out_dir / "shape.json")
    with open(out_dir / "trace.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "level", "elastic", "bending", "inclusion", "total"])
        for row in trace:
            writer.writerow(
                [row["step"], row["level"]]
                + [_float17(row[k]) for k in ("elastic", "bending", "inclusion", "total")]
            )
    _echo_config(out_dir, "fit", args)
    print(f"wrote {out_dir / 'model.json'}")
    return 0


def cmd_cubify(args) -> int:
    model = _load_model(args.model)
    shape = _load_any_shape(args.shape, args)
    out = Path(args.out)
    result = cubify(model.final_grid, shape, method=args.method, lam=args.lam)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_shape_output(result, out)
    _echo_config(out.parent, "cubify", args)
    print(f"wrote {out}")
    return 0


def cmd_transfer(args) -> int:
    source = _load_model(args.source)
    target = _load_model(args.target)
    shape = _load_any_shape(args.shape, args)
    if source.final_grid.resolution != target.final_grid.resolution:
        raise InputError(
            "resolution mismatch: source "
            f"{source.final_grid.resolution} vs target {target.final_grid.resolution}"
        )
    result = project(
        shape, source.final_grid, target.final_grid, method=args.method, lam=args.lam
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_shape_output(result, out)
    _echo_config(out.parent, "transfer", args)
    print(f"wrote {out}")
    return 0


def cmd_match(args) -> int:
    src = _load_points(args.source)
    tgt = _load_points(args.target)
    corr = correspondences(src, tgt)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["target_idx", "source_idx", "distance"])
        for t, (s, d) in enumerate(zip(corr.source_index, corr.distance)):
            writer.writerow([t, int(s), _float17(d)])
    _echo_config(out.parent, "match", args)
    print(f"wrote {out}")
    return 0


def _descriptor_from_file(path: str):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"file not found: {path}")
    data = serialize.load(p)
    if "vector" in data:
        return serialize.descriptor_from_dict(data)
    model = serialize.model_from_dict(data)
    return model.shape_ref or p.stem, descriptor(model.final_grid)


def cmd_describe(args) -> int:
    entries = []
    for path in args.models:
        entries.append(_descriptor_from_file(path))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    serialize.write_descriptor_db(entries, out)
    _echo_config(out.parent, "describe", args)
    print(f"wrote {out} ({len(entries)} descriptors)")
    return 0


def cmd_search(args) -> int:
    _, query = _descriptor_from_file(args.query)
    db_path = Path(args.db)
    if not db_path.is_file():
        raise InputError(f"descriptor database not found: {args.db}")
    entries = serialize.read_descriptor_db(db_path)
    if not entries:
        raise InputError(f"descriptor database is empty: {args.db}")
    if not 1 <= args.k <= len(entries):
        raise InputError(f"k must be in [1, {len(entries)}], got {args.k}")
    ranked = knn_search(query, [d for _, d in entries], args.k)
    for i in ranked:
        print(entries[i][0])
    return 0


def cmd_pca_fit(args) -> int:
    grids = []
    resolutions = set()
    for path in args.models:
        model = _load_model(path)
        grids.append(model.final_grid)
        resolutions.add(model.final_grid.resolution)
    if len(resolutions) > 1:
        raise InputError(f"model resolutions differ: {sorted(resolutions)}")
    pca = pca_fit(grids)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    serialize.save_pca(pca, out)
    _echo_config(out.parent, "pca-fit", args)
    print(f"wrote {out} ({pca.n_components} components)")
    return 0


def cmd_pca_deform(args) -> int:
    model = _load_model(args.model)
    pca = serialize.load_pca(Path(args.pca))
    shape = _load_any_shape(args.shape, args)
    try:
        coeffs = np.asarray([float(x) for x in args.coeffs.split(",")], dtype=np.float64)
    except ValueError:
        raise InputError(f"bad --coeffs value {args.coeffs!r} (comma-separated numbers)") from None
    deformed_shape, deformed_grid = pca_deform(shape, model.final_grid, pca, coeffs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_shape_output(deformed_shape, out)
    if args.grid_out:
        serialize.dump(serialize.grid_to_dict(deformed_grid), args.grid_out)
    _echo_config(out.parent, "pca-deform", args)
    print(f"wrote {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.workspace)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_demo(args) -> int:
    """Build a small self-contained workspace: fit demo shapes + PCA."""
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    meshes = {
        "sphere": uv_sphere_mesh(radius=0.45 - args.margin),
        "tallbox": box_mesh((0.5, 0.5, 0.5), (0.35, 0.9, 0.35)),
        "flatbox": box_mesh((0.5, 0.5, 0.5), (0.9, 0.25, 0.9)),
    }
    schedule = ScheduleParams(
        max_level=args.levels,
        steps_per_level=args.steps,
        seed=args.seed,
    )
    params = _energy_params(args)
    manifest = {"version": 1, "shapes": [], "models": [], "pca": "pca.json"}
    models = []
    for name, mesh in meshes.items():
        from .shape_io import normalize_to_unit_cube, sample_surface

        verts, center, scale = normalize_to_unit_cube(mesh.vertices, margin=args.margin)
        norm_mesh = Mesh(vertices=verts, faces=mesh.faces)
        pts = sample_surface(norm_mesh, args.samples, seed=args.seed)
        shape = SampledShape(points=pts, source_mesh=norm_mesh, center=center, scale=scale)
        model, _ = fit_hierarchical(shape, schedule, params, shape_ref=name)
        serialize.save_shape(shape, out_dir / f"{name}_shape.json")
        serialize.save_model(model, out_dir / f"{name}_model.json")
        manifest["shapes"].append({"id": name, "shape": f"{name}_shape.json"})
        manifest["models"].append({"id": name, "model": f"{name}_model.json"})
        models.append(model)
        print(f"fitted {name}")
    pca = pca_fit([m.final_grid for m in models])
    serialize.save_pca(pca, out_dir / "pca.json")
    serialize.dump(manifest, out_dir / "workspace.json")
    print(f"wrote workspace {out_dir / 'workspace.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dvg",
        description="Fit deformable voxel grids to shapes and use them for "
        "cubification, style transfer, retrieval, and PCA editing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a multi-level grid to a shape")
    p.add_argument("shape", help="input shape (obj, ply, xyz, or shape json)")
    p.add_argument("out", help="output directory")
    p.add_argument("--levels", type=int, default=3, help="max level p (resolution 2^p)")
    p.add_argument("--steps", type=int, default=300, help="gradient steps per level")
    p.add_argument("--step-size", type=float, default=5e-3)
    p.add_argument("--fading", type=str, default=None, help="comma list of per-level factors")
    p.add_argument("--tol", type=float, default=1e-6, help="relative convergence tolerance")
    p.add_argument("--id", type=str, default=None, help="shape identifier stored in the model")
    _add_shape_flags(p)
    _add_energy_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cubify", help="warp a shape into canonical cube coordinates")
    p.add_argument("--model", required=True)
    p.add_argument("--shape", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=("tps", "exact"), default="tps")
    p.add_argument("--lam", type=float, default=None, help="TPS ridge (default 1e-8*n)")
    _add_shape_flags(p)
    p.set_defaults(func=cmd_cubify)

    p = sub.add_parser("transfer", help="project a shape into another shape's grid")
    p.add_argument("--source", required=True, help="source model json")
    p.add_argument("--target", required=True, help="target model json")
    p.add_argument("--shape", required=True, help="shape fitted by the source model")
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=("tps", "exact"), default="tps")
    p.add_argument("--lam", type=float, default=None)
    _add_shape_flags(p)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("match", help="nearest-neighbor correspondences between cubified clouds")
    p.add_argument("--source", required=True, help="cubified source (xyz or shape json)")
    p.add_argument("--target", required=True, help="cubified target (xyz or shape json)")
    p.add_argument("--out", required=True, help="correspondence CSV")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("describe", help="build a descriptor database from models")
    p.add_argument("models", nargs="+", help="model json files")
    p.add_argument("--out", required=True, help="descriptor JSONL output")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("search", help="k nearest shapes by outer-point descriptor")
    p.add_argument("--query", required=True, help="model json or descriptor json")
    p.add_argument("--db", required=True, help="descriptor JSONL database")
    p.add_argument("-k", type=int, default=2)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("pca-fit", help="principal deformation modes over fitted grids")
    p.add_argument("models", nargs="+", help="model json files (same resolution)")
    p.add_argument("--out", required=True, help="PCA model json")
    p.set_defaults(func=cmd_pca_fit)

    p = sub.add_parser("pca-deform", help="deform a shape along principal modes")
    p.add_argument("--model", required=True)
    p.add_argument("--pca", required=True)
    p.add_argument("--shape", required=True)
    p.add_argument("--coeffs", required=True, help="comma list, std-dev units")
    p.add_argument("--out", required=True)
    p.add_argument("--grid-out", type=str, default=None, help="write the deformed grid json")
    _add_shape_flags(p)
    p.set_defaults(func=cmd_pca_deform)

    p = sub.add_parser("serve", help="run the editor HTTP service")
    p.add_argument("--workspace", required=True, help="directory with workspace.json")
    p.add_argument("--port", type=int, default=8123)
    p.add_argument("--host", type=str, default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("demo", help="build a demo workspace (fits three synthetic shapes)")
    p.add_argument("--out", required=True)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--steps", type=int, default=300)
    _add_shape_flags(p)
    _add_energy_flags(p)
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
