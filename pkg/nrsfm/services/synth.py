"""Synthetic deforming surfaces with known ground truth, and contamination.

All randomness is drawn from numpy Generators seeded explicitly; no global
random state is touched.
"""
import logging
import math
from typing import Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from ..errors import DataValidationError
from ..schemas.model import GridTopology, RotationStack, ShapeStack, TrackMatrix
from ..schemas.scene import Scene, SceneSpec

logger = logging.getLogger(__name__)


def _topology(spec: SceneSpec) -> GridTopology:
    if spec.mask == "full":
        return GridTopology.full(spec.rows, spec.cols)
    r, c = np.mgrid[0:spec.rows, 0:spec.cols]
    half_r = max((spec.rows - 1) / 2, 0.5)
    half_c = max((spec.cols - 1) / 2, 0.5)
    inside = ((r - (spec.rows - 1) / 2) / half_r) ** 2 + ((c - (spec.cols - 1) / 2) / half_c) ** 2 <= 1.05
    return GridTopology(rows=spec.rows, cols=spec.cols, mask=inside)


def _rotation_path(spec: SceneSpec) -> RotationStack:
    axis = np.asarray(spec.axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    angles = spec.angle_start + spec.angle_step * np.arange(spec.frames)
    matrices = Rotation.from_rotvec(angles[:, np.newaxis] * axis).as_matrix()
    return RotationStack(blocks=matrices[:, :2, :])


def _bending_modes(spec: SceneSpec, u: np.ndarray, v: np.ndarray, half_extent: float, rng) -> np.ndarray:
    """Out-of-plane modes: centred cosine bumps with their bilinear part removed

    Constant, tilt and twist components cost nothing under the grid
    Laplacian, so each bump is projected off span{1, u, v, uv} and rescaled to
    an RMS of amplitude * half_extent.
    """
    design = np.column_stack([np.ones_like(u), u, v, u * v])
    modes = np.zeros((spec.basis_rank, 3, u.size))
    for k in range(spec.basis_rank):
        freq_u, freq_v = rng.uniform(0.5, 1.0, size=2)
        phase_u, phase_v = rng.uniform(-np.pi / 4, np.pi / 4, size=2)
        bump = np.cos(np.pi * freq_u * u + phase_u) * np.cos(np.pi * freq_v * v + phase_v)
        coef, *_ = np.linalg.lstsq(design, bump, rcond=None)
        bend = bump - design @ coef
        rms = np.sqrt(np.mean(bend ** 2))
        if rms > 1e-12:
            modes[k, 2] = spec.amplitude * half_extent * bend / rms
    return modes


def _coefficients(spec: SceneSpec, rng) -> np.ndarray:
    """(F, K) slow sinusoids, each sweeping most of a half period over the sequence"""
    s = np.linspace(0.0, 1.0, spec.frames)[:, np.newaxis]
    omega = rng.uniform(0.7, 1.0, size=spec.basis_rank)
    psi = rng.uniform(-0.25, 0.25, size=spec.basis_rank)
    sign = rng.choice([-1.0, 1.0], size=spec.basis_rank)
    return sign * np.sin(np.pi * omega * (s - 0.5) + psi)


def generate_scene(spec: SceneSpec) -> Scene:
    """Planar grid plus basis_rank smooth bending modes with sinusoidal coefficients"""
    rng = np.random.default_rng(spec.seed)
    topology = _topology(spec)
    cells = topology.cells.astype(np.float64)

    half_extent = spec.spacing * max(spec.rows - 1, spec.cols - 1, 1) / 2
    x = (cells[:, 1] - (spec.cols - 1) / 2) * spec.spacing
    y = (cells[:, 0] - (spec.rows - 1) / 2) * spec.spacing
    base = np.vstack([x, y, np.zeros_like(x)])

    # normalized coordinates in [-1, 1] for the deformation modes
    modes = _bending_modes(spec, x / half_extent, y / half_extent, half_extent, rng)
    coefficients = _coefficients(spec, rng)

    frames = base[np.newaxis] + np.einsum("fk,kdp->fdp", coefficients, modes)
    frames -= frames.mean(axis=2, keepdims=True)
    shape = ShapeStack(data=frames.reshape(3 * spec.frames, -1))

    rank_limit = 3 * (spec.basis_rank + 1)
    singular = np.linalg.svd(frames.reshape(spec.frames, -1), compute_uv=False)
    if singular.size > rank_limit and singular[rank_limit] > 1e-8 * singular[0]:
        raise DataValidationError(f"generated shape exceeds rank {rank_limit}")

    rotations = _rotation_path(spec)
    tracks = TrackMatrix(data=rotations.apply(shape.data))
    logger.info(
        f"Generated scene: {spec.rows}x{spec.cols} grid, P={topology.num_points}, "
        f"F={spec.frames}, K={spec.basis_rank}, seed={spec.seed}"
    )
    return Scene(spec=spec, tracks=tracks, rotations=rotations, shape=shape, topology=topology)


def inject_noise(tracks: TrackMatrix, ratio: float, seed: int) -> TrackMatrix:
    """Add i.i.d. Gaussian noise with sigma = ratio * max|W|"""
    if ratio < 0:
        raise DataValidationError(f"noise ratio must be non-negative, got {ratio}")
    if ratio == 0:
        return TrackMatrix(data=tracks.data, offsets=tracks.offsets)
    rng = np.random.default_rng(seed)
    sigma = ratio * tracks.max_abs()
    noisy = tracks.data + rng.normal(0.0, sigma, size=tracks.data.shape)
    return TrackMatrix(data=noisy, offsets=tracks.offsets)


def inject_outliers(tracks: TrackMatrix, ratio: float, seed: int) -> Tuple[TrackMatrix, np.ndarray]:
    """Replace floor(ratio * F * P) observations by uniform draws over the observed range"""
    if not 0 <= ratio <= 1:
        raise DataValidationError(f"outlier ratio must lie in [0, 1], got {ratio}")
    frames, points = tracks.frames, tracks.points
    count = math.floor(ratio * frames * points + 1e-9)
    mask = np.zeros((frames, points), dtype=bool)
    if count == 0:
        return TrackMatrix(data=tracks.data, offsets=tracks.offsets), mask

    rng = np.random.default_rng(seed)
    chosen = rng.choice(frames * points, size=count, replace=False)
    frame_idx, point_idx = np.divmod(chosen, points)
    low, high = float(tracks.data.min()), float(tracks.data.max())
    draws = rng.uniform(low, high, size=(count, 2))

    data = np.array(tracks.data)
    data[2 * frame_idx, point_idx] = draws[:, 0]
    data[2 * frame_idx + 1, point_idx] = draws[:, 1]
    mask[frame_idx, point_idx] = True
    return TrackMatrix(data=data, offsets=tracks.offsets), mask
