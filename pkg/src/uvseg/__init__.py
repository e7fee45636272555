"""uvseg: urban-village boundary segmentation.

A small trainable specialist segmenter produces coarse masks, boxes, and
pooled embeddings that prompt a frozen promptable generalist's mask decoder.
The package also carries the training objective, detection/segmentation
metrics, and city-scale analytics (pre-classification gate, region counts
and areas, distance-band curves, multi-year trends).
"""

__version__ = "0.1.0"

from .errors import (
    ArtifactMismatchError,
    ConfigError,
    InvalidInputError,
    TrainingDivergedError,
    UvsegError,
    WeightsUnavailableError,
)

__all__ = [
    "ArtifactMismatchError",
    "ConfigError",
    "InvalidInputError",
    "TrainingDivergedError",
    "UvsegError",
    "WeightsUnavailableError",
    "__version__",
]
