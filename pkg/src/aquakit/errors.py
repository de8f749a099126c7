"""Exception types shared across the toolkit."""


class AquaKitError(Exception):
    """Base class for all toolkit errors."""


class AquaKitWarning(UserWarning):
    """Base class for toolkit warnings."""


# --- audio decoding ---

class MalformedRiffError(AquaKitError):
    """The file is not a well-formed RIFF/WAVE container."""


class UnsupportedCodecError(AquaKitError):
    """The wav file uses a compression code other than PCM or IEEE float."""


class UnsupportedBitDepthError(AquaKitError):
    """The wav file uses a sample width outside 16/24/32-bit int or 32-bit float."""


class UnsupportedChannelCountError(AquaKitError):
    """The wav file has zero channels or more than two."""


# --- alignment ---

class SampleRateMismatchError(AquaKitError):
    """Reference and test buffers have different sample rates."""


class LengthMismatchError(AquaKitError):
    """Reference and test buffers have different lengths under strict alignment."""


# --- spectral primitives ---

class SpectralInputError(AquaKitError):
    """Invalid input to a spectral primitive (frame length, size, window name)."""


class SignalTooShortError(AquaKitError):
    """Signal shorter than one analysis frame or window."""


# --- metric domain errors ---

class MetricInputError(AquaKitError):
    """Metric inputs violate a precondition (lengths, emptiness)."""


class ZeroNormError(MetricInputError):
    """Cosine similarity is undefined for a zero-norm vector."""


class ZeroEnergyError(MetricInputError):
    """SNR and SI-SDR are undefined for a zero-energy reference."""


class DistributionError(MetricInputError):
    """KL divergence input is not a probability vector."""


class InfiniteDivergenceError(MetricInputError):
    """KL divergence is infinite: unsmoothed q has a zero where p is positive."""


# --- embeddings and distribution distances ---

class EmbeddingFormatError(AquaKitError):
    """Embedding file cannot be parsed under the declared format."""


class EmbeddingInputError(AquaKitError):
    """Audio input unsuitable for embedding extraction."""


class InsufficientSamplesError(AquaKitError):
    """Too few embedding vectors for the requested estimator."""


class DimensionMismatchError(AquaKitError):
    """Operands have different embedding dimensions."""


class NotSymmetricError(AquaKitError):
    """Matrix expected to be symmetric is not, beyond tolerance."""


class NotPsdError(AquaKitError):
    """Matrix has an eigenvalue below the negative tolerance gate."""


# --- perceptual model ---

class PeaqInputError(AquaKitError):
    """Input signals violate a perceptual-model precondition."""


class NoDataError(PeaqInputError):
    """Both signals stay below the activity threshold: nothing to grade."""


# --- batch CLI ---

class ConfigError(AquaKitError):
    """Invalid evaluation configuration."""


class PairingError(AquaKitError):
    """Directory pairing failed (missing directory or zero matched pairs)."""
