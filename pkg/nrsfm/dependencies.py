import logging
from functools import lru_cache

from fastapi import Depends, HTTPException

from .config import Settings
from .schemas.solver import SolverConfig
from .services.reconstruction import ReconstructionService

logger = logging.getLogger(__name__)


@lru_cache()
def get_settings() -> Settings:
    return Settings()


def get_reconstruction_service(settings: Settings = Depends(get_settings)) -> ReconstructionService:
    try:
        return ReconstructionService(SolverConfig.from_settings(settings))
    except Exception as e:
        logger.error(f"Failed to initialize ReconstructionService: {str(e)}")
        raise HTTPException(
            status_code=500,
            detail="Reconstruction service initialization failed"
        )
