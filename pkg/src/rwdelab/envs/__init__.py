from .base import CensoredError, CensoredFieldError, CensoredTimeError, CensoredValueError
from .boolean import BallRecord, BooleanConfig, BooleanEnv, RadiusLaw
from .renewal import InterarrivalLaw, RenewalConfig, RenewalEnv

__all__ = [
    "BallRecord",
    "BooleanConfig",
    "BooleanEnv",
    "CensoredError",
    "CensoredFieldError",
    "CensoredTimeError",
    "CensoredValueError",
    "InterarrivalLaw",
    "RadiusLaw",
    "RenewalConfig",
    "RenewalEnv",
]
