from .interfaces import (
    BackendError,
    BackendSuite,
    BackendUnavailable,
    RenderContext,
)
from .world import SyntheticWorld, WorldConfig
from .synthetic import make_synthetic_suite, SyntheticDepthCorruption
from .detector import heuristic_border_detect, DetectorThresholds
from .http import HttpEndpoints, http_call, make_http_suite

__all__ = [
    "BackendError",
    "BackendSuite",
    "BackendUnavailable",
    "RenderContext",
    "SyntheticWorld",
    "WorldConfig",
    "make_synthetic_suite",
    "SyntheticDepthCorruption",
    "heuristic_border_detect",
    "DetectorThresholds",
    "HttpEndpoints",
    "http_call",
    "make_http_suite",
]
