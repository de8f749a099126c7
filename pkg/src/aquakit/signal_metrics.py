"""Reference-vs-test signal distances.

Six distances over aligned sample vectors or generic real vectors: MSE,
MAE, cosine similarity, KL divergence (generic and spectrogram form),
SNR, and SI-SDR. Infinities are legal metric values: identical files are
a common smoke test, so snr(x, x) returns +inf rather than raising.
"""

import math
from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer
from .errors import (
    DistributionError,
    InfiniteDivergenceError,
    LengthMismatchError,
    MetricInputError,
    SampleRateMismatchError,
    ZeroEnergyError,
    ZeroNormError,
)
from .spectral import mel_filterbank, mel_spectrogram, stft

METRIC_NAMES = ("mse", "mae", "cosine", "kl", "snr", "si_sdr")


@dataclass
class MetricValue:
    """One computed metric: its name, scalar value, per-channel breakdown."""

    name: str
    value: float
    per_channel: list[float] | None = None


def _pair(ref, test) -> tuple[np.ndarray, np.ndarray]:
    ref = np.asarray(ref, dtype=np.float64).ravel()
    test = np.asarray(test, dtype=np.float64).ravel()
    if len(ref) != len(test):
        raise MetricInputError(f"length mismatch: {len(ref)} vs {len(test)}")
    if len(ref) == 0:
        raise MetricInputError("empty input")
    return ref, test


def mse(ref, test) -> float:
    """Mean squared error (1/N) * sum((ref - test)^2)."""
    ref, test = _pair(ref, test)
    d = ref - test
    return float(np.mean(d * d))


def mae(ref, test) -> float:
    """Mean absolute error (1/N) * sum(|ref - test|)."""
    ref, test = _pair(ref, test)
    return float(np.mean(np.abs(ref - test)))


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1].

    Raises ZeroNormError when either vector has zero norm.
    """
    a, b = _pair(a, b)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroNormError("cosine similarity undefined for zero-norm input")
    if np.array_equal(a, b):
        return 1.0  # exact for self-comparison, no rounding residue
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def kl_divergence(p, q, epsilon: float = 0.0) -> float:
    """KL divergence sum p_i * ln(p_i / q_i) in nats.

    Inputs must be probability vectors (nonnegative, each summing to 1
    within 1e-6). With epsilon > 0 both are smoothed, p' = (p + eps) /
    sum(p + eps), before evaluation. Terms with p'_i = 0 contribute 0.

    Raises:
        DistributionError: negative entries or sums off by more than 1e-6.
        InfiniteDivergenceError: epsilon = 0 and some q_i = 0 where p_i > 0.
    """
    p, q = _pair(p, q)
    if np.any(p < 0) or np.any(q < 0):
        raise DistributionError("probability vectors must be nonnegative")
    if abs(p.sum() - 1.0) > 1e-6 or abs(q.sum() - 1.0) > 1e-6:
        raise DistributionError("probability vectors must sum to 1 within 1e-6")
    if epsilon < 0:
        raise MetricInputError("epsilon must be >= 0")
    if epsilon > 0:
        p = (p + epsilon) / (p.sum() + epsilon * len(p))
        q = (q + epsilon) / (q.sum() + epsilon * len(q))
    support = p > 0
    if np.any(q[support] == 0):
        raise InfiniteDivergenceError(
            "divergence is infinite: q has zero mass where p is positive"
        )
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def _frame_distributions(mel: np.ndarray) -> np.ndarray:
    """Normalize each row to a distribution; all-zero rows become uniform."""
    totals = mel.sum(axis=1, keepdims=True)
    n = mel.shape[1]
    safe = np.where(totals > 0, totals, 1.0)
    dist = mel / safe
    dist[totals[:, 0] == 0] = 1.0 / n
    return dist


def kl_spectrogram(
    ref: AudioBuffer,
    test: AudioBuffer,
    frame_size: int = 2048,
    hop: int = 512,
    n_mels: int = 64,
    epsilon: float = 1e-8,
) -> float:
    """Average per-frame KL divergence between mel power distributions.

    Each frame's mel powers are normalized to sum 1, KL(p_ref || p_test)
    is smoothed with epsilon and averaged over frames, then over channels.
    Buffers must be aligned (same rate, length, and channel count).
    """
    if ref.sample_rate != test.sample_rate:
        raise SampleRateMismatchError(
            f"sample rates differ: {ref.sample_rate} vs {test.sample_rate}"
        )
    if ref.n_samples != test.n_samples:
        raise LengthMismatchError(
            f"lengths differ: {ref.n_samples} vs {test.n_samples}"
        )
    if ref.n_channels != test.n_channels:
        raise MetricInputError(
            f"channel counts differ: {ref.n_channels} vs {test.n_channels}"
        )
    fb = mel_filterbank(ref.sample_rate, frame_size, n_mels=n_mels)
    per_channel = []
    for cr, ct in zip(ref.channels, test.channels):
        mel_r = mel_spectrogram(
            stft(cr, ref.sample_rate, frame_size, hop).power(), fb, log=False
        )
        mel_t = mel_spectrogram(
            stft(ct, test.sample_rate, frame_size, hop).power(), fb, log=False
        )
        p = _frame_distributions(mel_r)
        q = _frame_distributions(mel_t)
        p = (p + epsilon) / (p.sum(axis=1, keepdims=True) + epsilon * n_mels)
        q = (q + epsilon) / (q.sum(axis=1, keepdims=True) + epsilon * n_mels)
        terms = np.where(p > 0, p * np.log(p / q), 0.0)
        per_channel.append(float(np.mean(terms.sum(axis=1))))
    return float(np.mean(per_channel))


def snr(ref, test) -> float:
    """Signal-to-noise ratio 10*log10(sum(ref^2) / sum((ref-test)^2)) in dB.

    Zero error energy returns +inf. A zero-energy reference raises.
    """
    ref, test = _pair(ref, test)
    signal = float(np.sum(ref * ref))
    if signal == 0.0:
        raise ZeroEnergyError("SNR undefined for zero-energy reference")
    noise = float(np.sum((ref - test) ** 2))
    if noise == 0.0:
        return math.inf
    return 10.0 * math.log10(signal / noise)


def si_sdr(ref, test) -> float:
    """Scale-invariant signal-to-distortion ratio in dB.

    Projects test onto ref (s = <test,ref>/||ref||^2 * ref) and returns
    10*log10(||s||^2 / ||test - s||^2). Zero residual gives +inf, a zero
    projection (orthogonal test) gives -inf.
    """
    ref, test = _pair(ref, test)
    # same reduction as the numerator so identical inputs give alpha exactly 1.0
    energy = float(np.dot(ref, ref))
    if energy == 0.0:
        raise ZeroEnergyError("SI-SDR undefined for zero-energy reference")
    alpha = float(np.dot(test, ref)) / energy
    if alpha == 0.0:
        return -math.inf
    s_target = alpha * ref
    e = test - s_target
    target_energy = float(np.sum(s_target * s_target))
    error_energy = float(np.sum(e * e))
    if error_energy == 0.0:
        return math.inf
    return 10.0 * math.log10(target_energy / error_energy)


_VECTOR_METRICS = {
    "mse": mse,
    "mae": mae,
    "cosine": cosine_similarity,
    "snr": snr,
    "si_sdr": si_sdr,
}


def buffer_metric(name: str, ref: AudioBuffer, test: AudioBuffer) -> MetricValue:
    """Compute one named metric over a pair of aligned buffers.

    Sample-domain metrics run per channel and report the channel mean
    (IEEE semantics when a channel is infinite). The kl metric is the
    spectrogram form.
    """
    if name not in METRIC_NAMES:
        raise MetricInputError(f"unknown metric {name!r}")
    if ref.sample_rate != test.sample_rate:
        raise SampleRateMismatchError(
            f"sample rates differ: {ref.sample_rate} vs {test.sample_rate}"
        )
    if ref.n_channels != test.n_channels:
        raise MetricInputError(
            f"channel counts differ: {ref.n_channels} vs {test.n_channels}"
        )
    if name == "kl":
        return MetricValue(name="kl", value=kl_spectrogram(ref, test))
    fn = _VECTOR_METRICS[name]
    per_channel = [float(fn(cr, ct)) for cr, ct in zip(ref.channels, test.channels)]
    return MetricValue(name=name, value=float(np.mean(per_channel)), per_channel=per_channel)
