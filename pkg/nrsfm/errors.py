"""Exception hierarchy shared by the services, the CLI and the HTTP surface.

NRSfMError derives from Exception rather than ValueError so that errors raised
inside pydantic validators reach the caller unwrapped.
"""
from typing import Optional


class NRSfMError(Exception):
    """Base class for all reconstruction errors"""


class DataValidationError(NRSfMError):
    pass


class ShapeMismatchError(NRSfMError):
    pass


class RotationValidityError(NRSfMError):
    def __init__(self, message: str, frame: Optional[int] = None):
        super().__init__(message)
        self.frame = frame


class DegenerateRotationError(RotationValidityError):
    pass


class UnsupportedOrderError(NRSfMError):
    pass


class RankDeficiencyError(NRSfMError):
    pass


class DegenerateMotionError(NRSfMError):
    pass


class EstimationFailureError(NRSfMError):
    pass


class NormalizationError(NRSfMError):
    pass


class DatasetError(NRSfMError):
    pass
