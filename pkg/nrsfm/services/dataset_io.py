"""Dataset directory: manifest.json plus flat binary matrices.

Matrix file layout: 8-byte magic, little-endian uint32 rows, uint32 cols
(16 bytes), then rows * cols little-endian float64 values in row-major order.
"""
import logging
from pathlib import Path
from typing import NamedTuple, Optional, Union

import numpy as np
from pydantic import ValidationError

from ..errors import DatasetError
from ..schemas.dataset import Contamination, DatasetManifest
from ..schemas.model import GridTopology, RotationStack, ShapeStack, TrackMatrix
from ..schemas.scene import SceneSpec

logger = logging.getLogger(__name__)

MAGIC = b"NRSFMAT1"
HEADER = np.dtype([("magic", "S8"), ("rows", "<u4"), ("cols", "<u4")])
MANIFEST_NAME = "manifest.json"

PathLike = Union[str, Path]


class Dataset(NamedTuple):
    manifest: DatasetManifest
    tracks: TrackMatrix
    topology: GridTopology
    shape_gt: Optional[ShapeStack]
    rotations: Optional[np.ndarray]
    outlier_mask: Optional[np.ndarray]


def write_matrix(path: PathLike, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype="<f8")
    if matrix.ndim != 2:
        raise DatasetError(f"only 2-dimensional matrices can be written, got shape {matrix.shape}")
    header = np.array([(MAGIC, matrix.shape[0], matrix.shape[1])], dtype=HEADER)
    try:
        with open(path, "wb") as f:
            f.write(header.tobytes())
            f.write(np.ascontiguousarray(matrix).tobytes())
    except OSError as e:
        logger.error(f"Error writing matrix to {path}: {str(e)}")
        raise DatasetError(f"cannot write {path}: {str(e)}")


def read_matrix(path: PathLike) -> np.ndarray:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise DatasetError(f"cannot read {path}: {str(e)}")
    if len(raw) < HEADER.itemsize:
        raise DatasetError(f"{path} is too short to hold a matrix header")
    header = np.frombuffer(raw[:HEADER.itemsize], dtype=HEADER)[0]
    if header["magic"] != MAGIC:
        raise DatasetError(f"{path} is not a matrix file (bad magic)")
    rows, cols = int(header["rows"]), int(header["cols"])
    body = raw[HEADER.itemsize:]
    if len(body) != rows * cols * 8:
        raise DatasetError(f"{path} declares {rows}x{cols} but holds {len(body)} data bytes")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)


def read_csv_matrix(path: PathLike) -> np.ndarray:
    """Plain-text import for hand-made fixtures"""
    try:
        return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))
    except (OSError, ValueError) as e:
        raise DatasetError(f"cannot parse CSV matrix {path}: {str(e)}")


def write_dataset(
    directory: PathLike,
    tracks: TrackMatrix,
    topology: GridTopology,
    shape_gt: Optional[ShapeStack] = None,
    rotations: Optional[Union[RotationStack, np.ndarray]] = None,
    outlier_mask: Optional[np.ndarray] = None,
    contamination: Optional[Contamination] = None,
    scene: Optional[SceneSpec] = None,
) -> Path:
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        logger.error(f"Error creating dataset directory {directory}: {str(e)}")
        raise DatasetError(f"cannot create {directory}: {str(e)}")

    manifest = DatasetManifest(
        frames=tracks.frames,
        points=tracks.points,
        grid_rows=topology.rows,
        grid_cols=topology.cols,
        contamination=contamination,
        scene=scene,
    )
    write_matrix(directory / manifest.tracks, tracks.data)
    write_matrix(directory / manifest.topology, topology.present.astype(np.float64))
    if shape_gt is not None:
        manifest.shape_gt = "shape_gt.bin"
        write_matrix(directory / manifest.shape_gt, shape_gt.data)
    if rotations is not None:
        manifest.rotations = "rotations.bin"
        blocks = rotations.blocks if isinstance(rotations, RotationStack) else np.asarray(rotations)
        write_matrix(directory / manifest.rotations, blocks.reshape(-1, 3))
    if outlier_mask is not None:
        manifest.outlier_mask = "outlier_mask.bin"
        write_matrix(directory / manifest.outlier_mask, np.asarray(outlier_mask, dtype=np.float64))

    path = directory / MANIFEST_NAME
    try:
        path.write_text(manifest.model_dump_json(indent=2, exclude_none=True))
    except OSError as e:
        raise DatasetError(f"cannot write {path}: {str(e)}")
    logger.info(f"Wrote dataset F={tracks.frames}, P={tracks.points} to {directory}")
    return path


def _manifest_path(path: PathLike) -> Path:
    path = Path(path)
    return path / MANIFEST_NAME if path.is_dir() else path


def read_manifest(path: PathLike) -> DatasetManifest:
    path = _manifest_path(path)
    try:
        return DatasetManifest.model_validate_json(path.read_text())
    except OSError as e:
        raise DatasetError(f"cannot read manifest {path}: {str(e)}")
    except ValidationError as e:
        raise DatasetError(f"invalid manifest {path}: {str(e)}")


def read_dataset(path: PathLike) -> Dataset:
    manifest_path = _manifest_path(path)
    manifest = read_manifest(manifest_path)
    root = manifest_path.parent

    tracks = TrackMatrix(data=read_matrix(root / manifest.tracks))
    if (tracks.frames, tracks.points) != (manifest.frames, manifest.points):
        raise DatasetError(
            f"tracks are {tracks.data.shape}, manifest declares F={manifest.frames}, P={manifest.points}"
        )
    present = read_matrix(root / manifest.topology)
    if present.shape != (manifest.grid_rows, manifest.grid_cols):
        raise DatasetError(f"topology is {present.shape}, manifest declares {manifest.grid_rows}x{manifest.grid_cols}")
    mask = present != 0
    topology = GridTopology(rows=manifest.grid_rows, cols=manifest.grid_cols, mask=None if mask.all() else mask)
    if topology.num_points != manifest.points:
        raise DatasetError(f"topology has {topology.num_points} present cells, manifest declares {manifest.points}")

    shape_gt = None
    if manifest.shape_gt:
        shape_gt = ShapeStack(data=read_matrix(root / manifest.shape_gt))
        if shape_gt.data.shape != (3 * manifest.frames, manifest.points):
            raise DatasetError(f"ground-truth shape is {shape_gt.data.shape}, expected 3F x P")
    rotations = None
    if manifest.rotations:
        blocks = read_matrix(root / manifest.rotations)
        if blocks.shape != (2 * manifest.frames, 3):
            raise DatasetError(f"rotation file is {blocks.shape}, expected {2 * manifest.frames}x3")
        rotations = blocks.reshape(manifest.frames, 2, 3)
    outlier_mask = None
    if manifest.outlier_mask:
        outlier_mask = read_matrix(root / manifest.outlier_mask) != 0

    return Dataset(manifest, tracks, topology, shape_gt, rotations, outlier_mask)
