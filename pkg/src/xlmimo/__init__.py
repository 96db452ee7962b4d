"""Near-field, spatially non-stationary XL-MIMO channel simulation and estimation."""

from .estimators import (
    EstimatedPath,
    EstimationResult,
    EstimatorParams,
    StoppingConfig,
    ls_estimate,
    noise_floor_threshold,
    residual_is_noise,
    scatterer_wise_estimate,
    subarray_wise_estimate,
)
from .scene import (
    ArrayGeometry,
    ConfigError,
    GenerationError,
    RegionBounds,
    Scatterer,
    Scene,
    SceneConfig,
    element_coordinate,
    generate_scene,
    subarray_of_element,
)
from .wavefield import PilotSnapshot, array_response, receive_pilot, steering_phase, synthesize_channel

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "ConfigError",
    "EstimatedPath",
    "EstimationResult",
    "EstimatorParams",
    "GenerationError",
    "PilotSnapshot",
    "RegionBounds",
    "Scatterer",
    "Scene",
    "SceneConfig",
    "StoppingConfig",
    "array_response",
    "element_coordinate",
    "generate_scene",
    "ls_estimate",
    "noise_floor_threshold",
    "receive_pilot",
    "residual_is_noise",
    "scatterer_wise_estimate",
    "steering_phase",
    "subarray_of_element",
    "subarray_wise_estimate",
    "synthesize_channel",
]
