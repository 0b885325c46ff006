import logging

from fastapi import APIRouter, Depends
from fastapi.concurrency import run_in_threadpool

from ..dependencies import get_reconstruction_service
from ..schemas.api import EvaluateRequest, ReconstructRequest, ReconstructResponse
from ..schemas.model import GridTopology, ShapeStack, TrackMatrix
from ..schemas.report import ErrorReport
from ..schemas.solver import SolverConfig
from ..services.evaluation import rms_error
from ..services.reconstruction import ReconstructionService

logger = logging.getLogger(__name__)

router = APIRouter(tags=["reconstruction"])


def _run_reconstruction(request: ReconstructRequest, service: ReconstructionService) -> ReconstructResponse:
    overrides = request.solver.model_dump(exclude_none=True)
    if overrides:
        service = ReconstructionService(SolverConfig(**{**service.config.model_dump(), **overrides}))

    tracks = TrackMatrix(data=request.tracks)
    topology = None
    if request.grid is not None:
        topology = GridTopology(rows=request.grid.rows, cols=request.grid.cols, mask=request.grid.mask)
    source = service.resolve_rotations(tracks, request.rotations, request.estimate_rotations)
    shape, report = service.reconstruct(tracks, source, topology, request.method)
    return ReconstructResponse(shape=shape.data.tolist(), report=report, rotation_mode=source.mode)


@router.post("/reconstruct", response_model=ReconstructResponse,
    summary="Reconstruct a dense shape sequence from 2D tracks",
    description="""
    Methods, from weakest to strongest prior:
    - pinv: per-frame minimum-norm solution
    - rigid: one time-constant shape
    - temporal: first-order temporal smoothing (closed form)
    - st-l2: temporal + spatial smoothing, squared data term
    - st-l1: temporal + spatial smoothing, robust data term (default)
    """
)
async def reconstruct(
    request: ReconstructRequest,
    service: ReconstructionService = Depends(get_reconstruction_service)
):
    logger.info(f"Reconstruct request: method={request.method.value}")
    return await run_in_threadpool(_run_reconstruction, request, service)


@router.post("/evaluate", response_model=ErrorReport)
async def evaluate(request: EvaluateRequest):
    """Normalized RMS 3D error of an estimate against ground truth"""
    return rms_error(ShapeStack(data=request.estimate), ShapeStack(data=request.ground_truth))
