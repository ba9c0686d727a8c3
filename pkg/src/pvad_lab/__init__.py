"""Desk-scale lab for enrollment-less training of personalized VAD."""

__version__ = "0.1.0"

from .config import (
    AugConfig,
    ConfigError,
    CorpusConfig,
    ExperimentConfig,
    FeatureConfig,
    NoiseConfig,
    TrainConfig,
    desk_scale_config,
)

__all__ = [
    "AugConfig",
    "ConfigError",
    "CorpusConfig",
    "ExperimentConfig",
    "FeatureConfig",
    "NoiseConfig",
    "TrainConfig",
    "desk_scale_config",
    "__version__",
]
