"""Conformer acoustic model with variance adaptor and style references."""

from .config import AcousticConfig
from .conformer import ConformerBlock, ConformerStack, lengths_to_mask, sinusoidal_positions
from .model import (
    AcousticModel,
    InferenceOutput,
    MelPrediction,
    TrainOutputs,
    UtteranceFeatures,
)
from .predictors import (
    GSTPredictor,
    PitchEmbedding,
    ProsodyPredictor,
    VariancePredictor,
    durations_from_log,
    length_regulate,
)
from .reference import GSTReferenceEncoder, ProsodyReferenceEncoder, segment_means

__all__ = [
    "AcousticConfig",
    "AcousticModel",
    "ConformerBlock",
    "ConformerStack",
    "GSTPredictor",
    "GSTReferenceEncoder",
    "InferenceOutput",
    "MelPrediction",
    "PitchEmbedding",
    "ProsodyPredictor",
    "ProsodyReferenceEncoder",
    "TrainOutputs",
    "UtteranceFeatures",
    "VariancePredictor",
    "durations_from_log",
    "length_regulate",
    "lengths_to_mask",
    "segment_means",
    "sinusoidal_positions",
]
