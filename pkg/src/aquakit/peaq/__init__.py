"""Objective perceptual audio quality grading (basic PEAQ model)."""

from .earmodel import (
    TimeSmearing,
    add_internal_noise,
    critical_band_grouping,
    data_boundary,
    ear_weighting,
    frame_spectrum,
    masking_threshold,
    spreading,
    time_smearing,
)
from .movs import (
    FrameFeatures,
    ModulationEnvelope,
    MovVector,
    compute_movs,
    modulation_loudness,
    specific_loudness,
    total_loudness,
)
from .neural import movs_to_odg
from .pipeline import PeaqConfig, PeaqResult, peaq_basic

__all__ = [
    "FrameFeatures",
    "ModulationEnvelope",
    "MovVector",
    "PeaqConfig",
    "PeaqResult",
    "TimeSmearing",
    "add_internal_noise",
    "compute_movs",
    "critical_band_grouping",
    "data_boundary",
    "ear_weighting",
    "frame_spectrum",
    "masking_threshold",
    "modulation_loudness",
    "movs_to_odg",
    "peaq_basic",
    "specific_loudness",
    "spreading",
    "time_smearing",
    "total_loudness",
]
