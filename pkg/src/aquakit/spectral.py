"""Frequency-domain primitives: real DFT, STFT, mel filterbank.

Shared by the signal metrics, the baseline embedding, and the perceptual
model. Sizes are restricted to powers of two; trailing partial frames are
dropped rather than zero-padded so frame statistics stay unbiased.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SignalTooShortError, SpectralInputError

LOG_POWER_FLOOR = 1e-10  # -100 dB


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def hann_window(n: int) -> np.ndarray:
    """Symmetric Hann window 0.5*(1 - cos(2*pi*k/(n-1)))."""
    if n < 2:
        return np.ones(max(n, 0))
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / (n - 1)))


def dft_real(frame: np.ndarray, size: int) -> np.ndarray:
    """DFT of a real frame, bins 0..size/2 inclusive.

    Standard e^{-2 pi i k n / N} convention, no normalization. The size
    must be a power of two and match the frame length.
    """
    if not _is_power_of_two(size):
        raise SpectralInputError(f"DFT size must be a power of two, got {size}")
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 1 or len(frame) != size:
        raise SpectralInputError(
            f"frame length {frame.shape} does not match DFT size {size}"
        )
    return np.fft.rfft(frame)


@dataclass
class Spectrogram:
    """Framed frequency-domain representation with its analysis metadata."""

    frames: np.ndarray  # n_frames x n_bins
    frame_size: int
    hop: int
    window: str
    sample_rate: int
    kind: str  # complex | power | log_power

    def __post_init__(self):
        if not _is_power_of_two(self.frame_size):
            raise SpectralInputError(
                f"frame_size must be a power of two, got {self.frame_size}"
            )
        if self.hop < 1:
            raise SpectralInputError("hop must be >= 1")
        if self.kind not in ("complex", "power", "log_power"):
            raise SpectralInputError(f"unknown spectrogram kind {self.kind!r}")
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 2 or self.frames.shape[1] != self.frame_size // 2 + 1:
            raise SpectralInputError(
                f"frames must be n_frames x {self.frame_size // 2 + 1}"
            )

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_bins(self) -> int:
        return self.frames.shape[1]

    def power(self) -> "Spectrogram":
        """Squared-magnitude copy of a complex spectrogram."""
        if self.kind != "complex":
            raise SpectralInputError(f"power() needs a complex spectrogram, got {self.kind}")
        return Spectrogram(
            frames=np.abs(self.frames) ** 2,
            frame_size=self.frame_size,
            hop=self.hop,
            window=self.window,
            sample_rate=self.sample_rate,
            kind="power",
        )


def stft(
    samples: np.ndarray,
    sample_rate: int,
    frame_size: int = 2048,
    hop: int = 1024,
    window: str = "hann",
) -> Spectrogram:
    """Short-time Fourier transform of one channel.

    Frames start at offsets 0, hop, 2*hop, ...; the window is applied
    multiplicatively and a trailing partial frame is dropped.

    Raises:
        SignalTooShortError: fewer samples than one frame.
        SpectralInputError: bad frame size, hop, or window name.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise SpectralInputError("stft expects a single channel vector")
    if not _is_power_of_two(frame_size):
        raise SpectralInputError(f"frame_size must be a power of two, got {frame_size}")
    if hop < 1:
        raise SpectralInputError("hop must be >= 1")
    if len(samples) < frame_size:
        raise SignalTooShortError(
            f"signal length {len(samples)} is shorter than one frame ({frame_size})"
        )
    if window == "hann":
        win = hann_window(frame_size)
    elif window == "rect":
        win = np.ones(frame_size)
    else:
        raise SpectralInputError(f"unknown window {window!r}")

    n_frames = (len(samples) - frame_size) // hop + 1
    offsets = np.arange(n_frames) * hop
    idx = offsets[:, None] + np.arange(frame_size)[None, :]
    frames = np.fft.rfft(samples[idx] * win, axis=1)
    return Spectrogram(
        frames=frames,
        frame_size=frame_size,
        hop=hop,
        window=window,
        sample_rate=sample_rate,
        kind="complex",
    )


def _mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_inv(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass
class MelFilterbank:
    """Triangular mel filters over DFT bins (HTK mel scale)."""

    n_mels: int
    weights: np.ndarray  # n_mels x n_bins
    f_min: float
    f_max: float

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[0] != self.n_mels:
            raise SpectralInputError("weights must be n_mels x n_bins")
        if np.any(self.weights < 0):
            raise SpectralInputError("filter weights must be nonnegative")
        if np.any(self.weights.sum(axis=1) <= 0):
            raise SpectralInputError(
                "every mel filter needs positive support; "
                "increase frame_size or reduce n_mels"
            )

    @property
    def n_bins(self) -> int:
        return self.weights.shape[1]


def mel_filterbank(
    sample_rate: int,
    frame_size: int,
    n_mels: int = 64,
    f_min: float = 20.0,
    f_max: float | None = None,
) -> MelFilterbank:
    """Build the triangular filterbank, mel(f) = 2595*log10(1 + f/700).

    Defaults follow the baseline embedding: 64 mels from 20 Hz up to
    min(16 kHz, Nyquist). Triangle peaks are 1 (no area normalization).
    """
    nyquist = sample_rate / 2.0
    if f_max is None:
        f_max = min(16000.0, nyquist)
    if not 0 <= f_min < f_max <= nyquist:
        raise SpectralInputError(
            f"need 0 <= f_min < f_max <= Nyquist, got [{f_min}, {f_max}] at {sample_rate} Hz"
        )
    n_bins = frame_size // 2 + 1
    edges = _mel_inv(np.linspace(_mel(f_min), _mel(f_max), n_mels + 2))
    bin_freqs = np.arange(n_bins) * sample_rate / frame_size
    lower = edges[:-2][:, None]
    center = edges[1:-1][:, None]
    upper = edges[2:][:, None]
    rising = (bin_freqs[None, :] - lower) / (center - lower)
    falling = (upper - bin_freqs[None, :]) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    return MelFilterbank(n_mels=n_mels, weights=weights, f_min=f_min, f_max=f_max)


def mel_spectrogram(
    spec: Spectrogram,
    fb: MelFilterbank,
    log: bool = True,
    floor: float = LOG_POWER_FLOOR,
) -> np.ndarray:
    """Apply a mel filterbank to a power spectrogram.

    Returns an n_frames x n_mels matrix. In log mode values are
    10*log10(max(power, floor)), so silence maps to -100 dB with the
    default floor.
    """
    if spec.kind != "power":
        raise SpectralInputError(f"mel_spectrogram needs a power spectrogram, got {spec.kind}")
    if spec.n_bins != fb.n_bins:
        raise SpectralInputError(
            f"bin count mismatch: spectrogram {spec.n_bins}, filterbank {fb.n_bins}"
        )
    mel = spec.frames @ fb.weights.T
    if not log:
        return mel
    return 10.0 * np.log10(np.maximum(mel, floor))
