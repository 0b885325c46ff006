"""Command-line front end: synthesize, import-csv, reconstruct, evaluate, sweep, serve."""
import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from .config import settings
from .errors import DatasetError, NRSfMError
from .schemas.dataset import Contamination
from .schemas.model import GridTopology, ShapeStack, TrackMatrix
from .schemas.scene import ContaminationGrid, Scene, SceneSpec
from .schemas.solver import Method, SolverConfig
from .services.core_model import center_tracks, restore_translation
from .services.dataset_io import (
    read_csv_matrix,
    read_dataset,
    read_manifest,
    read_matrix,
    write_dataset,
    write_matrix,
)
from .services.evaluation import DEFAULT_METHODS, rms_error, run_sweep, summary_json
from .services.mesh_export import export_sequence
from .services.reconstruction import ReconstructionService
from .services.synth import generate_scene, inject_noise, inject_outliers

logger = logging.getLogger(__name__)

SHAPE_FILE = "shape.bin"
REPORT_FILE = "report.json"
_SCENE_DEFAULTS = SceneSpec.model_fields


def _grid(value: str):
    try:
        rows, cols = (int(v) for v in value.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like ROWSxCOLS, got '{value}'")
    return rows, cols


def _ratios(value: str) -> List[float]:
    """'a:step:b' inclusive range or comma list"""
    value = value.strip()
    if not value:
        return []
    try:
        if ":" in value:
            start, step, stop = (float(v) for v in value.split(":"))
        else:
            return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"ratios must be 'start:step:stop' or a comma list, got '{value}'")
    if step <= 0:
        raise argparse.ArgumentTypeError(f"range step must be positive, got {step:g}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]



def _jobs(requested: Optional[int]) -> int:
    jobs = requested or settings.JOBS
    return max(1, min(jobs, os.cpu_count() or 1))


def solver_config(args) -> SolverConfig:
    """flags > --config JSON > environment / .env > defaults"""
    overrides = {}
    if args.config:
        try:
            payload = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise DatasetError(f"cannot read config file {args.config}: {str(e)}")
        overrides.update(payload.get("solver", payload))
    flags = {
        "lambda1": getattr(args, "lambda1", None),
        "lambda2": getattr(args, "lambda2", None),
        "delta": getattr(args, "delta", None),
        "irls_max_iters": getattr(args, "irls_max_iters", None),
        "cg_max_iters": getattr(args, "cg_max_iters", None),
        "cg_tol": getattr(args, "cg_tol", None),
        "objective_tol": getattr(args, "objective_tol", None),
        "inner_solver": getattr(args, "inner_solver", None),
    }
    overrides.update({k: v for k, v in flags.items() if v is not None})
    known = set(SolverConfig.model_fields)
    return SolverConfig.from_settings(**{k: v for k, v in overrides.items() if k in known})


def _scene_spec(args) -> SceneSpec:
    rows, cols = args.grid
    return SceneSpec(
        rows=rows,
        cols=cols,
        frames=args.frames,
        basis_rank=args.basis_rank,
        amplitude=args.amplitude,
        mask=args.mask,
        angle_start=args.angle_start,
        angle_step=args.angle_step,
        seed=args.seed,
    )


def cmd_synthesize(args) -> int:
    scene = generate_scene(_scene_spec(args))
    tracks = inject_noise(scene.tracks, args.noise, args.seed)
    mask = None
    if args.outliers > 0:
        tracks, mask = inject_outliers(tracks, args.outliers, args.seed)
    contamination = None
    if args.noise > 0 or args.outliers > 0:
        contamination = Contamination(noise_ratio=args.noise, outlier_ratio=args.outliers, seed=args.seed)
    path = write_dataset(
        args.output or "dataset",
        tracks,
        scene.topology,
        shape_gt=scene.shape,
        rotations=scene.rotations,
        outlier_mask=mask,
        contamination=contamination,
        scene=scene.spec,
    )
    print(path)
    return 0


def cmd_import_csv(args) -> int:
    rows, cols = args.grid
    mask = read_csv_matrix(args.mask) != 0 if args.mask else None
    topology = GridTopology(rows=rows, cols=cols, mask=mask)
    tracks = TrackMatrix(data=read_csv_matrix(args.tracks))
    rotations = None
    if args.rotations:
        blocks = read_csv_matrix(args.rotations)
        if blocks.shape != (2 * tracks.frames, 3):
            raise DatasetError(f"rotation CSV is {blocks.shape}, expected {2 * tracks.frames}x3")
        rotations = blocks.reshape(tracks.frames, 2, 3)
    shape_gt = ShapeStack(data=read_csv_matrix(args.shape_gt)) if args.shape_gt else None
    print(write_dataset(args.output or "dataset", tracks, topology, shape_gt=shape_gt, rotations=rotations))
    return 0


def cmd_reconstruct(args) -> int:
    dataset = read_dataset(args.dataset)
    service = ReconstructionService(solver_config(args))
    source = service.resolve_rotations(dataset.tracks, dataset.rotations, args.estimate_rotations)
    shape, report = service.reconstruct(dataset.tracks, source, dataset.topology, Method(args.method))
    if args.original_frame:
        shape = restore_translation(shape, source.rotations, center_tracks(dataset.tracks).row_offsets)

    root = Path(args.dataset) if Path(args.dataset).is_dir() else Path(args.dataset).parent
    output = Path(args.output) if args.output else root / f"recon_{args.method}"
    output.mkdir(parents=True, exist_ok=True)
    write_matrix(output / SHAPE_FILE, shape.data)
    export_sequence(output / "meshes", shape, dataset.topology)
    payload = report.model_dump(mode="json")
    payload["rotation_mode"] = source.mode
    (output / REPORT_FILE).write_text(json.dumps(payload, indent=2))
    if report.warnings:
        logger.warning(f"Reconstruction finished with {len(report.warnings)} warning(s); see {output / REPORT_FILE}")
    print(output)
    return 0


def _load_shape(path: str) -> ShapeStack:
    path = Path(path)
    if path.is_dir():
        if (path / SHAPE_FILE).exists():
            return ShapeStack(data=read_matrix(path / SHAPE_FILE))
        manifest = read_manifest(path)
        if not manifest.shape_gt:
            raise DatasetError(f"dataset {path} has no ground-truth shape")
        return ShapeStack(data=read_matrix(path / manifest.shape_gt))
    if path.suffix == ".csv":
        return ShapeStack(data=read_csv_matrix(path))
    return ShapeStack(data=read_matrix(path))


def cmd_evaluate(args) -> int:
    report = rms_error(_load_shape(args.estimate), _load_shape(args.ground_truth))
    estimate_path = Path(args.estimate)
    default = (estimate_path if estimate_path.is_dir() else estimate_path.parent) / "error_report.json"
    output = Path(args.output) if args.output else default
    output.write_text(report.model_dump_json(indent=2))
    note = " (depth flip applied)" if report.flip_applied else ""
    print(f"{report.mean_error:.4f}{note}")
    return 0


def _sweep_scene(args) -> Scene:
    if not args.dataset:
        return generate_scene(_scene_spec(args))
    dataset = read_dataset(args.dataset)
    if dataset.shape_gt is None or dataset.rotations is None:
        raise DatasetError("sweeps need a dataset with ground-truth shape and rotations")
    spec = dataset.manifest.scene or SceneSpec(
        rows=dataset.topology.rows, cols=dataset.topology.cols, frames=dataset.tracks.frames
    )
    service = ReconstructionService()
    source = service.resolve_rotations(dataset.tracks, dataset.rotations)
    return Scene(
        spec=spec,
        tracks=dataset.tracks,
        rotations=source.rotations,
        shape=dataset.shape_gt,
        topology=dataset.topology,
    )


def cmd_sweep(args) -> int:
    scene = _sweep_scene(args)
    grid = ContaminationGrid(noise=args.noise, outliers=[p / 100 for p in args.outliers])
    methods = [Method(m) for m in args.methods.split(",")] if args.methods else list(DEFAULT_METHODS)
    result = run_sweep(scene, grid, solver_config(args), args.repeats, methods, _jobs(args.jobs))

    output = Path(args.output or "sweep")
    output.mkdir(parents=True, exist_ok=True)
    result.cells.to_csv(output / "cells.csv", index=False)
    result.summary.to_csv(output / "summary.csv", index=False)
    (output / "summary.json").write_text(json.dumps(summary_json(result, scene), indent=2))
    print(result.summary.to_string(index=False))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("nrsfm.main:app", host=args.host, port=args.port)
    return 0


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lambda1", type=float, help="temporal smoothness weight")
    parser.add_argument("--lambda2", type=float, help="spatial smoothness weight")
    parser.add_argument("--delta", type=float, help="IRLS smoothing in pixels (default 1e-4 max|W|)")
    parser.add_argument("--irls-max-iters", type=int)
    parser.add_argument("--cg-max-iters", type=int)
    parser.add_argument("--cg-tol", type=float)
    parser.add_argument("--objective-tol", type=float)
    parser.add_argument("--inner-solver", choices=["cg", "gradient_descent"])


def _add_scene_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--grid", type=_grid, default=(10, 10), help="ROWSxCOLS")
    parser.add_argument("--frames", type=int, default=20)
    parser.add_argument("--basis-rank", type=int, default=2)
    parser.add_argument("--amplitude", type=float, default=_SCENE_DEFAULTS["amplitude"].default)
    parser.add_argument("--mask", choices=["full", "ellipse"], default="full")
    parser.add_argument("--angle-start", type=float, default=_SCENE_DEFAULTS["angle_start"].default, help="radians")
    parser.add_argument("--angle-step", type=float, default=_SCENE_DEFAULTS["angle_step"].default, help="radians per frame")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=1)
    common.add_argument("--jobs", type=int, default=None)
    common.add_argument("--config", help="JSON file with solver settings")
    common.add_argument("--output", help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nrsfm", description="Dense non-rigid shape from 2D tracks")
    commands = parser.add_subparsers(dest="command", required=True)

    synthesize = commands.add_parser("synthesize", parents=[common], help="write a synthetic dataset")
    _add_scene_flags(synthesize)
    synthesize.add_argument("--noise", type=float, default=0.0, help="noise ratio r, sigma = r max|W|")
    synthesize.add_argument("--outliers", type=float, default=0.0, help="outlier ratio in [0, 1]")
    synthesize.set_defaults(handler=cmd_synthesize)

    import_csv = commands.add_parser("import-csv", parents=[common], help="build a dataset from CSV files")
    import_csv.add_argument("--tracks", required=True, help="2F x P CSV")
    import_csv.add_argument("--grid", type=_grid, required=True, help="ROWSxCOLS")
    import_csv.add_argument("--mask", help="ROWS x COLS CSV of 0/1")
    import_csv.add_argument("--rotations", help="2F x 3 CSV")
    import_csv.add_argument("--shape-gt", help="3F x P CSV")
    import_csv.set_defaults(handler=cmd_import_csv)

    reconstruct = commands.add_parser("reconstruct", parents=[common], help="reconstruct a dataset")
    reconstruct.add_argument("dataset", help="dataset directory or manifest path")
    reconstruct.add_argument("--method", choices=[m.value for m in Method], default=Method.ST_L1.value)
    reconstruct.add_argument("--estimate-rotations", action="store_true")
    reconstruct.add_argument("--original-frame", action="store_true", help="undo track centering in outputs")
    _add_solver_flags(reconstruct)
    reconstruct.set_defaults(handler=cmd_reconstruct)

    evaluate = commands.add_parser("evaluate", parents=[common], help="RMS 3D error against ground truth")
    evaluate.add_argument("estimate")
    evaluate.add_argument("ground_truth")
    evaluate.set_defaults(handler=cmd_evaluate)

    sweep = commands.add_parser("sweep", parents=[common], help="noise / outlier experiment tables")
    sweep.add_argument("--dataset", help="dataset with ground truth; a synthetic scene otherwise")
    _add_scene_flags(sweep)
    sweep.add_argument("--noise", type=_ratios, default="", help="ratios, 'start:step:stop' or comma list")
    sweep.add_argument("--outliers", type=_ratios, default="", help="percentages, e.g. 2,4,6,8,10")
    sweep.add_argument("--repeats", type=int, default=5)
    sweep.add_argument("--methods", help=f"comma list from {[m.value for m in Method]}")
    _add_solver_flags(sweep)
    sweep.set_defaults(handler=cmd_sweep)

    serve = commands.add_parser("serve", parents=[common], help="run the HTTP API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(handler=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(level=level)
    try:
        return args.handler(args)
    except (NRSfMError, ValidationError, OSError) as e:
        logger.error(f"{args.command} failed: {str(e)}")
        print(f"error: {e}", file=sys.stderr)
        return 2
