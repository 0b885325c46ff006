"""IRLS objective, gradient, weighted subproblem and the outer loop."""
from __future__ import annotations

import numpy as np
import pytest

from nrsfm.errors import DataValidationError, ShapeMismatchError
from nrsfm.schemas.model import GridTopology, ShapeStack, TrackMatrix
from nrsfm.schemas.solver import IrlsWeights, SolverConfig, SubproblemResult
from nrsfm.services import solver
from nrsfm.services.core_model import center_tracks
from nrsfm.services.solver import (
    gradient,
    irls_reconstruct,
    robust_objective,
    solve_quadratic_subproblem,
    update_weights,
)
from nrsfm.services.spatial import build_laplacian
from nrsfm.services.synth import inject_outliers
from nrsfm.services.temporal import build_temporal_operator, solve_temporal

from conftest import dense_laplacian, dense_rotation, dense_temporal, random_rotations, random_shape

FRAMES = 4
TOPOLOGY = GridTopology.full(3, 3)
POINTS = TOPOLOGY.num_points


@pytest.fixture
def problem():
    rng = np.random.default_rng(31)
    rotations = random_rotations(FRAMES, seed=31)
    tracks = TrackMatrix(data=rng.normal(size=(2 * FRAMES, POINTS)))
    weights = IrlsWeights(values=rng.uniform(0.5, 1.5, size=(2 * FRAMES, POINTS)), delta=0.1)
    return tracks, rotations, weights


def _weighted_objective(shape, tracks, rotations, weights, cfg, topology=TOPOLOGY):
    h = dense_temporal(rotations.frames)
    lap = dense_laplacian(topology)
    residual = weights.values * (tracks.data - rotations.apply(shape))
    return (
        np.sum(residual ** 2)
        + cfg.lambda1 * np.sum((h @ shape) ** 2)
        + cfg.lambda2 * np.sum((shape @ lap.T) ** 2)
    )


def _dense_subproblem(tracks, rotations, weights, cfg, topology=TOPOLOGY):
    """Kronecker form of the normal equations on row-major vec(S)"""
    frames = rotations.frames
    eye_p = np.eye(topology.num_points)
    r = np.kron(dense_rotation(rotations), eye_p)
    h = np.kron(dense_temporal(frames), eye_p)
    a = np.kron(np.eye(3 * frames), dense_laplacian(topology))
    d = (weights.values ** 2).ravel()
    lhs = r.T @ (d[:, np.newaxis] * r) + cfg.lambda1 * h.T @ h + cfg.lambda2 * a.T @ a
    rhs = r.T @ (d * tracks.data.ravel())
    return np.linalg.solve(lhs, rhs).reshape(3 * frames, topology.num_points)


# grids of at most six points that still carry stencil rows
SMALL_GRIDS = [(1, 6), (2, 3), (3, 2), (1, 5), (1, 4)]


def _small_instance(seed):
    rng = np.random.default_rng(500 + seed)
    frames = 2 + seed % 2
    topology = GridTopology.full(*SMALL_GRIDS[seed % len(SMALL_GRIDS)])
    points = topology.num_points
    rotations = random_rotations(frames, seed=500 + seed)
    tracks = TrackMatrix(data=rng.normal(size=(2 * frames, points)))
    weights = IrlsWeights(values=rng.uniform(0.2, 2.0, size=(2 * frames, points)))
    cfg = SolverConfig(
        lambda1=10 ** rng.uniform(-2, 0), lambda2=10 ** rng.uniform(-2, 0),
        cg_tol=1e-12, cg_max_iters=10000,
    )
    return tracks, rotations, weights, topology, cfg


class TestObjective:

    def test_objective_terms(self, problem):
        tracks, rotations, _ = problem
        shape = random_shape(FRAMES, POINTS, seed=1)
        cfg = SolverConfig(lambda1=0.3, lambda2=0.7)
        residual = tracks.data - rotations.apply(shape.data)
        expected = (
            np.sum(np.sqrt(residual ** 2 + 0.01))
            + 0.3 * np.sum((dense_temporal(FRAMES) @ shape.data) ** 2)
            + 0.7 * np.sum((shape.data @ dense_laplacian(TOPOLOGY).T) ** 2)
        )
        value = robust_objective(
            tracks, rotations, shape, build_temporal_operator(FRAMES), build_laplacian(TOPOLOGY), cfg, delta=0.1
        )
        assert value == pytest.approx(expected)

    def test_operator_size_checked(self, problem):
        tracks, rotations, _ = problem
        with pytest.raises(ShapeMismatchError):
            robust_objective(
                tracks, rotations, random_shape(FRAMES, POINTS), build_temporal_operator(FRAMES + 1),
                None, SolverConfig(),
            )


class TestWeights:

    def test_weights_bounded_by_delta(self):
        residual = np.array([[0.0, 1.0, -10.0]])
        weights = update_weights(residual, delta=0.04)
        assert weights.values.max() == pytest.approx(0.04 ** -0.5)
        np.testing.assert_allclose(weights.values, (residual ** 2 + 0.04 ** 2) ** -0.25)

    def test_weights_above_bound_rejected(self):
        with pytest.raises(DataValidationError):
            IrlsWeights(values=np.full((2, 2), 20.0), delta=0.01)

    def test_non_positive_weights_rejected(self):
        with pytest.raises(DataValidationError):
            IrlsWeights(values=np.zeros((2, 2)), delta=1.0)

    def test_uniform_weights_carry_no_smoothing(self):
        weights = IrlsWeights.uniform(4, 3)
        assert weights.delta is None
        np.testing.assert_array_equal(weights.values, np.ones((4, 3)))
        # no delta, no bound
        assert IrlsWeights(values=np.full((2, 2), 1e6)).delta is None


class TestGradient:

    def test_matches_central_differences(self, problem):
        tracks, rotations, weights = problem
        cfg = SolverConfig(lambda1=0.4, lambda2=0.2)
        shape = random_shape(FRAMES, POINTS, seed=2)
        grad = gradient(
            shape, tracks, rotations, weights, build_temporal_operator(FRAMES), build_laplacian(TOPOLOGY), cfg
        ).data

        eps = 1e-6
        rng = np.random.default_rng(3)
        for _ in range(10):
            r, p = rng.integers(3 * FRAMES), rng.integers(POINTS)
            bump = np.zeros_like(shape.data)
            bump[r, p] = eps
            plus = _weighted_objective(shape.data + bump, tracks, rotations, weights, cfg)
            minus = _weighted_objective(shape.data - bump, tracks, rotations, weights, cfg)
            assert grad[r, p] == pytest.approx((plus - minus) / (2 * eps), rel=1e-5, abs=1e-6)

    def test_vanishes_at_subproblem_minimum(self, problem):
        tracks, rotations, weights = problem
        cfg = SolverConfig(lambda1=0.4, lambda2=0.2)
        minimum = ShapeStack(data=_dense_subproblem(tracks, rotations, weights, cfg))
        grad = gradient(
            minimum, tracks, rotations, weights, build_temporal_operator(FRAMES), build_laplacian(TOPOLOGY), cfg
        )
        np.testing.assert_allclose(grad.data, 0.0, atol=1e-9)


class TestSubproblem:

    @pytest.mark.parametrize("inner_solver", ["cg", "gradient_descent"])
    def test_matches_dense_solve(self, problem, inner_solver):
        tracks, rotations, weights = problem
        cfg = SolverConfig(lambda1=0.4, lambda2=0.2, cg_tol=1e-12, cg_max_iters=200000, inner_solver=inner_solver)
        result = solve_quadratic_subproblem(
            tracks, rotations, weights, build_temporal_operator(FRAMES), build_laplacian(TOPOLOGY), cfg,
            ShapeStack.zeros(FRAMES, POINTS),
        )
        assert result.converged
        assert result.relative_residual <= 1e-10
        np.testing.assert_allclose(result.shape.data, _dense_subproblem(tracks, rotations, weights, cfg), atol=1e-7)

    def test_unit_weights_without_spatial_term_is_temporal_solve(self, problem):
        tracks, rotations, _ = problem
        cfg = SolverConfig(lambda1=0.5, lambda2=0.0, cg_tol=1e-12, cg_max_iters=2000)
        result = solve_quadratic_subproblem(
            tracks, rotations, IrlsWeights.uniform(2 * FRAMES, POINTS), build_temporal_operator(FRAMES), None, cfg,
            ShapeStack.zeros(FRAMES, POINTS),
        )
        np.testing.assert_allclose(result.shape.data, solve_temporal(tracks, rotations, 0.5).data, atol=1e-8)

    def test_warm_start_at_solution_needs_no_iterations(self, problem):
        tracks, rotations, weights = problem
        cfg = SolverConfig(lambda1=0.4, lambda2=0.2, cg_tol=1e-6)
        exact = ShapeStack(data=_dense_subproblem(tracks, rotations, weights, cfg))
        result = solve_quadratic_subproblem(
            tracks, rotations, weights, build_temporal_operator(FRAMES), build_laplacian(TOPOLOGY), cfg, exact
        )
        assert result.iterations == 0
        assert result.converged

    def test_iteration_budget_reported(self, problem):
        tracks, rotations, weights = problem
        cfg = SolverConfig(lambda1=0.4, lambda2=0.2, cg_tol=1e-14, cg_max_iters=2)
        result = solve_quadratic_subproblem(
            tracks, rotations, weights, build_temporal_operator(FRAMES), build_laplacian(TOPOLOGY), cfg,
            ShapeStack.zeros(FRAMES, POINTS),
        )
        assert not result.converged
        assert result.iterations == 2

    def test_weight_shape_checked(self, problem):
        tracks, rotations, _ = problem
        with pytest.raises(ShapeMismatchError):
            solve_quadratic_subproblem(
                tracks, rotations, IrlsWeights.uniform(2, 2), None, None, SolverConfig(),
                ShapeStack.zeros(FRAMES, POINTS),
            )


class TestRandomSmallInstances:

    @pytest.mark.parametrize("seed", range(20))
    def test_subproblem_matches_dense_solve(self, seed):
        tracks, rotations, weights, topology, cfg = _small_instance(seed)
        result = solve_quadratic_subproblem(
            tracks, rotations, weights, build_temporal_operator(rotations.frames), build_laplacian(topology), cfg,
            ShapeStack.zeros(rotations.frames, topology.num_points),
        )
        expected = _dense_subproblem(tracks, rotations, weights, cfg, topology)
        assert result.converged
        assert np.linalg.norm(result.shape.data - expected) <= 1e-6 * np.linalg.norm(expected)

    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_matches_central_differences(self, seed):
        tracks, rotations, weights, topology, cfg = _small_instance(seed)
        shape = random_shape(rotations.frames, topology.num_points, seed=seed)
        grad = gradient(
            shape, tracks, rotations, weights, build_temporal_operator(rotations.frames),
            build_laplacian(topology), cfg,
        ).data

        eps = 1e-6 * np.linalg.norm(shape.data)
        numeric = np.zeros_like(grad)
        for index in np.ndindex(*shape.data.shape):
            bump = np.zeros_like(shape.data)
            bump[index] = eps
            plus = _weighted_objective(shape.data + bump, tracks, rotations, weights, cfg, topology)
            minus = _weighted_objective(shape.data - bump, tracks, rotations, weights, cfg, topology)
            numeric[index] = (plus - minus) / (2 * eps)
        assert np.linalg.norm(grad - numeric) <= 1e-5 * np.linalg.norm(grad)


class TestIrls:

    def test_objective_never_increases(self, small_scene):
        tracks, _ = inject_outliers(small_scene.tracks, 0.1, seed=4)
        tracks = center_tracks(tracks)
        cfg = SolverConfig(lambda1=1e-2, lambda2=0.5, irls_max_iters=15)
        _, report = irls_reconstruct(tracks, small_scene.rotations, small_scene.topology, cfg)
        trace = report.objective_trace
        assert len(trace) >= 2
        assert all(b <= a * (1 + 1e-12) for a, b in zip(trace, trace[1:]))
        assert report.final_objective == pytest.approx(trace[-1])
        assert len(report.cg_iterations) == len(report.subproblem_converged)
        assert report.delta == pytest.approx(1e-4 * np.max(np.abs(tracks.data)))

    def test_large_delta_reduces_to_least_squares(self, small_scene):
        tracks = center_tracks(small_scene.tracks)
        rotations, topology = small_scene.rotations, small_scene.topology
        lambda1, lambda2, delta = 1e-2, 0.5, 100.0

        l2_cfg = SolverConfig(lambda1=lambda1, lambda2=lambda2, cg_tol=1e-12, cg_max_iters=20000)
        initial = solve_temporal(tracks, rotations, lambda1)
        expected = solve_quadratic_subproblem(
            tracks, rotations, IrlsWeights.uniform(*tracks.data.shape), build_temporal_operator(rotations.frames),
            build_laplacian(topology), l2_cfg, initial,
        ).shape

        # sqrt(r^2 + delta^2) ~ delta + r^2 / (2 delta) once residuals are small against delta
        robust_cfg = SolverConfig(
            lambda1=lambda1 / (2 * delta), lambda2=lambda2 / (2 * delta), delta=delta,
            cg_tol=1e-12, cg_max_iters=20000,
        )
        shape, report = irls_reconstruct(tracks, rotations, topology, robust_cfg, initial)
        assert report.converged
        np.testing.assert_allclose(shape.data, expected.data, atol=1e-4)

    def test_iteration_cap_is_reported(self, small_scene):
        tracks, _ = inject_outliers(small_scene.tracks, 0.2, seed=5)
        cfg = SolverConfig(lambda2=0.5, irls_max_iters=1, objective_tol=1e-15)
        _, report = irls_reconstruct(center_tracks(tracks), small_scene.rotations, small_scene.topology, cfg)
        assert not report.converged
        assert any("without meeting objective_tol" in w for w in report.warnings)

    def test_grid_size_checked(self, small_scene):
        with pytest.raises(ShapeMismatchError):
            irls_reconstruct(small_scene.tracks, small_scene.rotations, GridTopology.full(2, 2), SolverConfig())

    def test_exact_tracks_converge_immediately(self, small_scene):
        tracks = center_tracks(small_scene.tracks)
        cfg = SolverConfig(lambda1=1e-6, lambda2=1e-6)
        _, report = irls_reconstruct(tracks, small_scene.rotations, small_scene.topology, cfg, small_scene.shape)
        assert report.converged
        assert len(report.objective_trace) <= 3

    def test_objective_increase_stops_without_claiming_convergence(self, small_scene, monkeypatch):
        tracks = center_tracks(small_scene.tracks)
        initial = solve_temporal(tracks, small_scene.rotations, 1e-3)
        noise = 5.0 * np.random.default_rng(0).normal(size=initial.data.shape)

        def worse_step(*args, **kwargs):
            return SubproblemResult(
                shape=ShapeStack(data=initial.data + noise), iterations=3, converged=False, relative_residual=0.5
            )

        monkeypatch.setattr(solver, "solve_quadratic_subproblem", worse_step)
        shape, report = solver.irls_reconstruct(
            tracks, small_scene.rotations, small_scene.topology, SolverConfig(), initial
        )
        assert not report.converged
        assert report.objective_trace == [report.final_objective]
        np.testing.assert_array_equal(shape.data, initial.data)
        assert any("objective increased" in w for w in report.warnings)
        assert not any("without meeting objective_tol" in w for w in report.warnings)
