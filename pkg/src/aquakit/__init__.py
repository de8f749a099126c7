"""Audio quality evaluation toolkit.

Signal-space distances, embedding-distribution distances, and an
objective perceptual grade, over single pairs or paired directories of
WAV files.
"""

from . import peaq
from .audio_io import AudioBuffer, align_pair, downmix_mono, read_wav, resample, write_wav
from .embedding_stats import (
    EmbeddingSet,
    GaussianStats,
    baseline_embedding,
    estimate_gaussian,
    frechet_audio_distance,
    kernel_distance_mmd2,
    load_embeddings,
    sqrt_psd,
)
from .errors import AquaKitError, AquaKitWarning
from .signal_metrics import (
    METRIC_NAMES,
    MetricValue,
    buffer_metric,
    cosine_similarity,
    kl_divergence,
    kl_spectrogram,
    mae,
    mse,
    si_sdr,
    snr,
)
from .spectral import (
    MelFilterbank,
    Spectrogram,
    dft_real,
    hann_window,
    mel_filterbank,
    mel_spectrogram,
    stft,
)

__version__ = "0.1.0"

__all__ = [
    "AquaKitError",
    "AquaKitWarning",
    "AudioBuffer",
    "EmbeddingSet",
    "GaussianStats",
    "METRIC_NAMES",
    "MelFilterbank",
    "MetricValue",
    "Spectrogram",
    "__version__",
    "align_pair",
    "baseline_embedding",
    "buffer_metric",
    "cosine_similarity",
    "dft_real",
    "downmix_mono",
    "estimate_gaussian",
    "frechet_audio_distance",
    "hann_window",
    "kernel_distance_mmd2",
    "kl_divergence",
    "kl_spectrogram",
    "load_embeddings",
    "mae",
    "mel_filterbank",
    "mel_spectrogram",
    "mse",
    "peaq",
    "read_wav",
    "resample",
    "si_sdr",
    "snr",
    "sqrt_psd",
    "stft",
    "write_wav",
]
