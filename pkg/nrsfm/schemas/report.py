from typing import List

from pydantic import BaseModel, model_validator


class ErrorReport(BaseModel):
    per_frame_error: List[float]
    mean_error: float
    flip_applied: bool = False

    @model_validator(mode="after")
    def check_values(self):
        if any(e < 0 for e in self.per_frame_error) or self.mean_error < 0:
            raise ValueError("Reconstruction errors must be non-negative")
        return self
