import numpy as np
import pytest

from aquakit.audio_io import AudioBuffer


def make_buffer(samples, sample_rate=48000, channels=1):
    """Wrap a 1-D array (or stack of rows) into an AudioBuffer."""
    data = np.asarray(samples, dtype=np.float64)
    if data.ndim == 1:
        data = np.tile(data, (channels, 1))
    return AudioBuffer(channels=data, sample_rate=sample_rate)


def sine(freq, seconds, sample_rate=48000, amplitude=0.5, phase=0.0):
    t = np.arange(int(round(seconds * sample_rate))) / sample_rate
    return amplitude * np.sin(2 * np.pi * freq * t + phase)


def music_like(seconds, sample_rate=48000, seed=11):
    """Deterministic multi-tone signal with amplitude modulation.

    Broadband enough to exercise masking, tonal enough to mask noise.
    """
    rng = np.random.default_rng(seed)
    n = int(round(seconds * sample_rate))
    t = np.arange(n) / sample_rate
    x = np.zeros(n)
    for freq, amp in ((220.0, 0.30), (440.0, 0.22), (880.0, 0.15),
                      (1760.0, 0.10), (3520.0, 0.06)):
        x += amp * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
    x *= 0.6 + 0.4 * np.sin(2 * np.pi * 3.0 * t)
    return x


def add_noise_db(signal, level_db, seed=0):
    """Add white noise at level_db relative to the signal's RMS."""
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(signal))
    noise *= np.sqrt(np.mean(signal ** 2) / np.mean(noise ** 2))
    return signal + noise * 10.0 ** (level_db / 20.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
