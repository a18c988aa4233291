"""Real-time social reward from fused facial/speech emotion and presence signals."""

from .core import (
    EmotionTaxonomy,
    FusionConfig,
    Modality,
    ModalitySnapshot,
    RewardSample,
    average_modality,
    normalize_unit,
    reward,
)
from .fusion import FusionEngine, run
from .stream import ChannelRegistry, ChannelSpec, PerceptorFrame, merge_streams, parse_frame

__version__ = "0.1.0"
