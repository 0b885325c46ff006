import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import DataValidationError, NRSfMError, RotationValidityError
from ..schemas.model import GridTopology, RotationSource, ShapeStack, TrackMatrix
from ..schemas.solver import IrlsWeights, Method, SolveReport, SolverConfig
from .core_model import center_tracks
from .rotation import estimate_rigid_rotations, validate_rotations
from .solver import irls_reconstruct, solve_quadratic_subproblem
from .spatial import build_laplacian
from .temporal import build_temporal_operator, solve_pseudo_inverse, solve_rigid, solve_temporal

logger = logging.getLogger(__name__)


class ReconstructionService:
    def __init__(self, config: Optional[SolverConfig] = None):
        self.config = config or SolverConfig.from_settings()

    def resolve_rotations(
        self,
        tracks: TrackMatrix,
        blocks: Optional[Sequence[np.ndarray]] = None,
        estimate: bool = False,
    ) -> RotationSource:
        """Provided rotations win; estimation only on request"""
        try:
            if blocks is not None:
                return validate_rotations(blocks)
            if estimate:
                return estimate_rigid_rotations(tracks)
            raise RotationValidityError("no rotations provided; supply a rotation file or request estimation")
        except NRSfMError as e:
            logger.error(f"Error resolving rotations: {str(e)}")
            raise

    def reconstruct(
        self,
        tracks: TrackMatrix,
        source: RotationSource,
        topology: Optional[GridTopology],
        method: Method = Method.ST_L1,
    ) -> Tuple[ShapeStack, SolveReport]:
        method = Method(method)
        cfg = self.config
        rotations = source.rotations
        centered = center_tracks(tracks)
        logger.info(f"Reconstructing F={tracks.frames}, P={tracks.points} with method {method.value}")

        try:
            if method is Method.PINV:
                return solve_pseudo_inverse(centered, rotations), SolveReport(method=method)
            if method is Method.RIGID:
                return solve_rigid(centered, rotations), SolveReport(method=method)

            initial = solve_temporal(centered, rotations, cfg.lambda1)
            if method is Method.TEMPORAL:
                return initial, SolveReport(method=method)

            if topology is None:
                raise DataValidationError("spatial methods need a grid topology")
            if method is Method.ST_L2:
                result = solve_quadratic_subproblem(
                    centered,
                    rotations,
                    IrlsWeights.uniform(*centered.data.shape),
                    build_temporal_operator(rotations.frames),
                    build_laplacian(topology),
                    cfg,
                    initial,
                )
                report = SolveReport(
                    method=method,
                    cg_iterations=[result.iterations],
                    subproblem_converged=[result.converged],
                    converged=result.converged,
                )
                if not result.converged:
                    report.warnings.append(
                        f"inner solver stopped at relative residual {result.relative_residual:.3e}"
                    )
                return result.shape, report

            shape, report = irls_reconstruct(centered, rotations, topology, cfg, initial)
            report.method = method
            return shape, report
        except NRSfMError as e:
            logger.error(f"Error reconstructing with method {method.value}: {str(e)}")
            raise
