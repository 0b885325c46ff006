"""Shared fixtures and dense reference implementations.

The dense oracles build the full block-diagonal R, the temporal difference
matrix H and the grid Laplacian L explicitly, so the matrix-free code paths
can be checked against plain numpy linear algebra on small problems.
"""
from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import block_diag
from scipy.spatial.transform import Rotation

from nrsfm.schemas.model import GridTopology, RotationStack, ShapeStack, TrackMatrix
from nrsfm.schemas.scene import SceneSpec
from nrsfm.services.synth import generate_scene


# ── Helpers ──────────────────────────────────────────────────────────────

def random_rotations(frames: int, seed: int = 0) -> RotationStack:
    matrices = Rotation.random(frames, random_state=seed).as_matrix()
    return RotationStack(blocks=matrices[:, :2, :])


def random_shape(frames: int, points: int, seed: int = 0) -> ShapeStack:
    rng = np.random.default_rng(seed)
    return ShapeStack(data=rng.normal(size=(3 * frames, points)))


def dense_rotation(rotations: RotationStack) -> np.ndarray:
    return block_diag(*rotations.blocks)


def dense_temporal(frames: int) -> np.ndarray:
    h = np.zeros((3 * (frames - 1), 3 * frames))
    for j in range(3 * (frames - 1)):
        h[j, j] = 1.0
        h[j, j + 3] = -1.0
    return h


def dense_laplacian(topology: GridTopology) -> np.ndarray:
    points = topology.num_points
    lap = np.zeros((points, points))
    for p, (r, c) in enumerate(topology.cells):
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                q = topology.index_of(r + dr, c + dc)
                if q is not None and topology.index_of(r - dr, c - dc) is not None:
                    lap[p, q] = 1.0
                    lap[p, p] -= 1.0
    return lap


def dense_temporal_solve(tracks: TrackMatrix, rotations: RotationStack, lam: float) -> np.ndarray:
    r = dense_rotation(rotations)
    h = dense_temporal(rotations.frames)
    return np.linalg.solve(r.T @ r + lam * h.T @ h, r.T @ tracks.data)


# ── Fixtures ─────────────────────────────────────────────────────────────

@pytest.fixture
def small_spec() -> SceneSpec:
    return SceneSpec(rows=4, cols=5, frames=6, angle_step=0.15, seed=3)


@pytest.fixture
def small_scene(small_spec):
    return generate_scene(small_spec)


@pytest.fixture
def rotations6() -> RotationStack:
    return random_rotations(6, seed=11)
