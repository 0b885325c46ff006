"""Per-frame OBJ and ASCII PLY meshes; two triangles per complete grid quad."""
import logging
from pathlib import Path
from typing import List, Union

import numpy as np

from ..errors import DatasetError, ShapeMismatchError
from ..schemas.model import GridTopology, ShapeStack

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def grid_triangles(topology: GridTopology) -> np.ndarray:
    """(2Q, 3) zero-based vertex indices"""
    quads = topology.quads()
    first = quads[:, [0, 1, 2]]
    second = quads[:, [0, 2, 3]]
    return np.stack([first, second], axis=1).reshape(-1, 3)


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as e:
        logger.error(f"Error writing mesh {path}: {str(e)}")
        raise DatasetError(f"cannot write {path}: {str(e)}")


def write_obj(path: PathLike, vertices: np.ndarray, faces: np.ndarray) -> None:
    """vertices (3, P), faces (T, 3) zero-based"""
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in vertices.T]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in faces]
    _write(Path(path), "\n".join(lines) + "\n")


def write_ply(path: PathLike, vertices: np.ndarray, faces: np.ndarray) -> None:
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {vertices.shape[1]}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {faces.shape[0]}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    body = [f"{x:.9g} {y:.9g} {z:.9g}" for x, y, z in vertices.T]
    body += [f"3 {a} {b} {c}" for a, b, c in faces]
    _write(Path(path), "\n".join(header + body) + "\n")


def export_sequence(directory: PathLike, shape: ShapeStack, topology: GridTopology) -> List[Path]:
    if shape.points != topology.num_points:
        raise ShapeMismatchError(f"shape has {shape.points} points but the grid has {topology.num_points}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    faces = grid_triangles(topology)
    written = []
    for i in range(shape.frames):
        vertices = shape.frame(i)
        obj_path = directory / f"frame_{i:04d}.obj"
        ply_path = directory / f"frame_{i:04d}.ply"
        write_obj(obj_path, vertices, faces)
        write_ply(ply_path, vertices, faces)
        written.extend([obj_path, ply_path])
    logger.info(f"Exported {shape.frames} frames ({faces.shape[0]} triangles each) to {directory}")
    return written
