from typing import Literal

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Solver defaults
    LAMBDA1: float = 1e-3
    LAMBDA2: float = 1.0
    DELTA_RATIO: float = 1e-4
    IRLS_MAX_ITERS: int = 30
    CG_MAX_ITERS: int = 500
    CG_TOL: float = 1e-8
    OBJECTIVE_TOL: float = 1e-6
    INNER_SOLVER: Literal["cg", "gradient_descent"] = "cg"

    # Runtime settings
    JOBS: int = 1
    LOG_LEVEL: str = "INFO"

    model_config = SettingsConfigDict(env_file=".env", env_prefix="NRSFM_", extra="ignore")

    @field_validator("LAMBDA1", "LAMBDA2")
    @classmethod
    def validate_weight(cls, v):
        if v < 0:
            raise ValueError("Regularization weights must be non-negative")
        return v

    @field_validator("DELTA_RATIO", "CG_TOL", "OBJECTIVE_TOL")
    @classmethod
    def validate_tolerance(cls, v):
        if v <= 0:
            raise ValueError("Tolerances must be positive")
        return v

    @field_validator("IRLS_MAX_ITERS", "CG_MAX_ITERS", "JOBS")
    @classmethod
    def validate_count(cls, v):
        if v < 1:
            raise ValueError("Iteration budgets and job counts must be at least 1")
        return v


settings = Settings()
