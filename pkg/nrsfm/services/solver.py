"""Robust spatial-temporal reconstruction by IRLS.

Objective (smoothed L1 data term):

    f(S) = sum_ij sqrt(r_ij^2 + delta^2) + lambda1 ||H S||^2 + lambda2 ||S L^T||^2,   r = W - R S

Each outer iteration replaces the data term by its quadratic majorizer at the
current residual, which is 1/2 ||E (W - R S)||^2 + const with
E_ij = (r_ij^2 + delta^2)^(-1/4). Scaling by two gives the weighted least
squares subproblem with doubled regularization weights, solved matrix-free
with conjugate gradients warm-started at the current iterate.
"""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from ..errors import ShapeMismatchError
from ..schemas.model import GridTopology, RotationStack, ShapeStack, TrackMatrix
from ..schemas.solver import IrlsWeights, SolveReport, SolverConfig, SubproblemResult
from .core_model import check_dimensions, check_tracks
from .spatial import SpatialOperator, build_laplacian
from .temporal import TemporalOperator, build_temporal_operator, solve_temporal

logger = logging.getLogger(__name__)


def _check_operators(
    shape: ShapeStack,
    op_h: Optional[TemporalOperator],
    op_a: Optional[SpatialOperator],
) -> None:
    if op_h is not None and op_h.frames != shape.frames:
        raise ShapeMismatchError(f"temporal operator covers {op_h.frames} frames, shape has {shape.frames}")
    if op_a is not None and op_a.points != shape.points:
        raise ShapeMismatchError(f"spatial operator covers {op_a.points} points, shape has {shape.points}")


def robust_objective(
    tracks: TrackMatrix,
    rotations: RotationStack,
    shape: ShapeStack,
    op_h: Optional[TemporalOperator],
    op_a: Optional[SpatialOperator],
    cfg: SolverConfig,
    delta: Optional[float] = None,
) -> float:
    check_tracks(tracks, rotations)
    check_dimensions(rotations, shape)
    _check_operators(shape, op_h, op_a)
    if delta is None:
        delta = cfg.resolve_delta(tracks.data)

    residual = tracks.data - rotations.apply(shape.data)
    value = float(np.sum(np.sqrt(residual ** 2 + delta ** 2)))
    if op_h is not None and cfg.lambda1 > 0:
        value += cfg.lambda1 * float(np.sum(op_h.apply(shape.data) ** 2))
    if op_a is not None and cfg.lambda2 > 0:
        value += cfg.lambda2 * float(np.sum(op_a.apply(shape.data) ** 2))
    return value


def update_weights(residual: np.ndarray, delta: float) -> IrlsWeights:
    return IrlsWeights(values=(residual ** 2 + delta ** 2) ** -0.25, delta=delta)


def _normal_product(
    data: np.ndarray,
    rotations: RotationStack,
    sq_weights: np.ndarray,
    op_h: Optional[TemporalOperator],
    op_a: Optional[SpatialOperator],
    cfg: SolverConfig,
) -> np.ndarray:
    """Q S = R^T (E^2 . R S) + lambda1 H^T H S + lambda2 S L^T L"""
    out = rotations.apply_transpose(sq_weights * rotations.apply(data))
    if op_h is not None and cfg.lambda1 > 0:
        out += cfg.lambda1 * op_h.apply_gram(data)
    if op_a is not None and cfg.lambda2 > 0:
        out += cfg.lambda2 * op_a.apply_gram(data)
    return out


def gradient(
    shape: ShapeStack,
    tracks: TrackMatrix,
    rotations: RotationStack,
    weights: IrlsWeights,
    op_h: Optional[TemporalOperator],
    op_a: Optional[SpatialOperator],
    cfg: SolverConfig,
) -> ShapeStack:
    """Gradient of ||E (W - R S)||^2 + lambda1 ||H S||^2 + lambda2 ||A vec(S)||^2"""
    check_tracks(tracks, rotations)
    check_dimensions(rotations, shape)
    _check_operators(shape, op_h, op_a)
    if weights.values.shape != tracks.data.shape:
        raise ShapeMismatchError(f"weights shape {weights.values.shape} does not match tracks {tracks.data.shape}")

    sq_weights = weights.values ** 2
    product = _normal_product(shape.data, rotations, sq_weights, op_h, op_a, cfg)
    rhs = rotations.apply_transpose(sq_weights * tracks.data)
    return ShapeStack(data=2.0 * (product - rhs))


def _gradient_descent(matvec, rhs: np.ndarray, x0: np.ndarray, tol: float, max_iters: int):
    """Steepest descent with exact line search on 1/2 x^T Q x - b^T x"""
    x = x0.copy()
    residual = rhs - matvec(x)
    threshold = tol * np.linalg.norm(rhs)
    iterations = 0
    while np.linalg.norm(residual) > threshold:
        if iterations >= max_iters:
            return x, iterations, False
        q_residual = matvec(residual)
        curvature = residual @ q_residual
        if curvature <= 0:
            break
        alpha = (residual @ residual) / curvature
        x += alpha * residual
        residual -= alpha * q_residual
        iterations += 1
    return x, iterations, True


def solve_quadratic_subproblem(
    tracks: TrackMatrix,
    rotations: RotationStack,
    weights: IrlsWeights,
    op_h: Optional[TemporalOperator],
    op_a: Optional[SpatialOperator],
    cfg: SolverConfig,
    init: ShapeStack,
) -> SubproblemResult:
    """Minimize ||E (W - R S)||^2 + lambda1 ||H S||^2 + lambda2 ||A vec(S)||^2 from init"""
    check_tracks(tracks, rotations)
    check_dimensions(rotations, init)
    _check_operators(init, op_h, op_a)
    if weights.values.shape != tracks.data.shape:
        raise ShapeMismatchError(f"weights shape {weights.values.shape} does not match tracks {tracks.data.shape}")

    rows, cols = init.data.shape
    sq_weights = weights.values ** 2
    rhs = rotations.apply_transpose(sq_weights * tracks.data).ravel()

    def matvec(v):
        return _normal_product(v.reshape(rows, cols), rotations, sq_weights, op_h, op_a, cfg).ravel()

    x0 = init.data.ravel().copy()
    if cfg.inner_solver == "gradient_descent":
        solution, iterations, converged = _gradient_descent(matvec, rhs, x0, cfg.cg_tol, cfg.cg_max_iters)
    else:
        counter = {"iterations": 0}

        def count(_):
            counter["iterations"] += 1

        operator = LinearOperator((rows * cols, rows * cols), matvec=matvec, dtype=np.float64)
        solution, info = cg(
            operator, rhs, x0=x0, rtol=cfg.cg_tol, atol=0.0, maxiter=cfg.cg_max_iters, callback=count
        )
        iterations = counter["iterations"]
        converged = info == 0

    rhs_norm = np.linalg.norm(rhs)
    residual_norm = np.linalg.norm(matvec(solution) - rhs)
    relative = residual_norm / rhs_norm if rhs_norm > 0 else residual_norm
    logger.debug(f"Subproblem solved in {iterations} iterations, relative residual {relative:.3e}")
    return SubproblemResult(
        shape=ShapeStack(data=solution.reshape(rows, cols)),
        iterations=iterations,
        converged=bool(converged),
        relative_residual=float(relative),
    )


def irls_reconstruct(
    tracks: TrackMatrix,
    rotations: RotationStack,
    topology: GridTopology,
    cfg: SolverConfig,
    init: Optional[ShapeStack] = None,
) -> Tuple[ShapeStack, SolveReport]:
    check_tracks(tracks, rotations)
    if topology.num_points != tracks.points:
        raise ShapeMismatchError(f"grid has {topology.num_points} points but tracks have {tracks.points}")

    op_h = build_temporal_operator(rotations.frames)
    op_a = build_laplacian(topology)
    delta = cfg.resolve_delta(tracks.data)
    majorizer_cfg = cfg.model_copy(update={"lambda1": 2.0 * cfg.lambda1, "lambda2": 2.0 * cfg.lambda2})

    shape = init if init is not None else solve_temporal(tracks, rotations, cfg.lambda1)
    check_dimensions(rotations, shape)

    objective = robust_objective(tracks, rotations, shape, op_h, op_a, cfg, delta)
    report = SolveReport(objective_trace=[objective], converged=False, delta=delta)
    logger.info(f"IRLS start: F={tracks.frames}, P={tracks.points}, delta={delta:.3e}, objective={objective:.6e}")

    for iteration in range(cfg.irls_max_iters):
        residual = tracks.data - rotations.apply(shape.data)
        weights = update_weights(residual, delta)
        result = solve_quadratic_subproblem(tracks, rotations, weights, op_h, op_a, majorizer_cfg, shape)
        report.cg_iterations.append(result.iterations)
        report.subproblem_converged.append(result.converged)
        if not result.converged:
            message = (
                f"IRLS iteration {iteration + 1}: inner solver stopped after {result.iterations} "
                f"iterations at relative residual {result.relative_residual:.3e}"
            )
            logger.warning(message)
            report.warnings.append(message)

        candidate = robust_objective(tracks, rotations, result.shape, op_h, op_a, cfg, delta)
        if candidate > objective:
            message = f"IRLS iteration {iteration + 1}: objective increased, keeping previous iterate"
            logger.warning(message)
            report.warnings.append(message)
            break

        decrease = objective - candidate
        shape, objective = result.shape, candidate
        report.objective_trace.append(objective)
        logger.info(f"IRLS iteration {iteration + 1}: objective={objective:.6e}, cg={result.iterations}")
        if decrease <= cfg.objective_tol * abs(report.objective_trace[-2]):
            report.converged = True
            break
    else:
        message = f"IRLS reached {cfg.irls_max_iters} iterations without meeting objective_tol"
        logger.warning(message)
        report.warnings.append(message)

    report.final_objective = objective
    return shape, report
