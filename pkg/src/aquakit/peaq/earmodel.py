"""FFT ear model: scaled frame spectra to excitation patterns.

Operates on 2048-sample frames at 48 kHz with 50% overlap. The chain is
frame_spectrum -> ear_weighting -> critical_band_grouping ->
add_internal_noise -> spreading -> time_smearing, producing the pitch,
unsmeared-excitation, and excitation patterns the model variables need.
"""

from functools import lru_cache

import numpy as np

from ..errors import PeaqInputError
from ..spectral import hann_window
from . import tables as T

# calibration tone: a full-scale sine at this frequency maps to the
# configured listening level in the scaled spectrum's peak bin
CALIBRATION_HZ = 1000.0

_HANN = hann_window(T.FRAME_SIZE)


def _peak_factor(freq: float) -> float:
    # largest DFT bin of a Hann-windowed sine relative to the continuous
    # response peak, for a tone falling between bins
    w = T.FRAME_SIZE - 1
    df = 1.0 / T.FRAME_SIZE
    fcn = freq / T.SAMPLE_RATE
    k = np.floor(fcn / df)
    dfn = min((k + 1) * df - fcn, fcn - k * df)
    dfw = dfn * w
    return float(np.sin(np.pi * dfw) / (np.pi * dfw * (1.0 - dfw ** 2)))


@lru_cache(maxsize=8)
def _level_gain(level_db: float) -> float:
    # amplitude gain such that the calibration sine's peak bin power is
    # 10^(level_db/10)
    gp = _peak_factor(CALIBRATION_HZ)
    return 10.0 ** (level_db / 20.0) / (gp * (T.FRAME_SIZE - 1) / 4.0)


def frame_spectrum(frame: np.ndarray, level_db: float = 92.0) -> np.ndarray:
    """Scaled power spectrum of one 2048-sample frame.

    Hann-windowed DFT with the gain anchored so a full-scale sine at
    1 kHz peaks at level_db (dB) in power. Bins are floored at 1e-12 so
    silence has a defined spectrum. Returns 1025 nonnegative powers.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != (T.FRAME_SIZE,):
        raise PeaqInputError(
            f"frame must have exactly {T.FRAME_SIZE} samples, got {frame.shape}"
        )
    spectrum = np.fft.rfft(frame * (_level_gain(level_db) * _HANN))
    return np.maximum(spectrum.real ** 2 + spectrum.imag ** 2, T.POWER_FLOOR)


def ear_weighting(spectrum: np.ndarray) -> np.ndarray:
    """Apply the outer/middle ear power weighting (DC bin is zeroed)."""
    spectrum = np.asarray(spectrum, dtype=np.float64)
    if spectrum.shape != (T.N_BINS,):
        raise PeaqInputError(f"expected {T.N_BINS} bins, got {spectrum.shape}")
    return spectrum * T.EAR_WEIGHT


def critical_band_grouping(weighted: np.ndarray) -> np.ndarray:
    """Distribute bin powers into the 109 quarter-Bark bands.

    Each bin's power is split proportionally to the frequency overlap of
    its df-wide cell with each band; band energies are floored at 1e-12.
    """
    weighted = np.asarray(weighted, dtype=np.float64)
    if weighted.shape != (T.N_BINS,):
        raise PeaqInputError(f"expected {T.N_BINS} bins, got {weighted.shape}")
    return np.maximum(T.GROUPING @ weighted, T.E_MIN)


def add_internal_noise(pitch: np.ndarray) -> np.ndarray:
    """Add the hearing-threshold internal noise pattern."""
    return np.asarray(pitch, dtype=np.float64) + T.INTERNAL_NOISE


def _spread_accumulate(energy: np.ndarray, norm: np.ndarray) -> np.ndarray:
    # Level-dependent spreading: lower slope 27 dB/Bark, upper slope
    # -24 - 230/fc + 0.2*L dB/Bark, contributions combined in the
    # 0.4-power domain and renormalized by `norm`.
    e = 0.4
    nc = T.N_BANDS
    a_lower = 10.0 ** (2.7 * T.DZ)
    a_upper = 10.0 ** ((-2.4 - 23.0 / T.FC) * T.DZ) * energy ** (0.2 * T.DZ)

    idx = np.arange(nc)
    g_lower = (1.0 - a_lower ** -(idx + 1.0)) / (1.0 - 1.0 / a_lower)
    g_upper = (1.0 - a_upper ** (nc - idx)) / (1.0 - a_upper)
    normalized = energy / (g_lower + g_upper - 1.0)

    en_e = normalized ** e
    a_upper_e = a_upper ** e

    acc = np.zeros(nc)
    # lower skirt: top-down first-order recursion in the power-e domain
    acc[nc - 1] = en_e[nc - 1]
    a_lower_e = a_lower ** -e
    for i in range(nc - 2, -1, -1):
        acc[i] = a_lower_e * acc[i + 1] + en_e[i]
    # upper skirt: each masker decays geometrically with its own
    # level-dependent ratio
    for i in range(nc - 1):
        steps = np.arange(1, nc - i)
        acc[i + 1 :] += en_e[i] * a_upper_e[i] ** steps
    return acc ** (1.0 / e) / norm


_SPREAD_NORM = _spread_accumulate(np.ones(T.N_BANDS), np.ones(T.N_BANDS))


def spreading(pitch: np.ndarray) -> np.ndarray:
    """Frequency-domain spreading of a pitch pattern (unsmeared excitation)."""
    pitch = np.asarray(pitch, dtype=np.float64)
    if pitch.shape != (T.N_BANDS,):
        raise PeaqInputError(f"expected {T.N_BANDS} bands, got {pitch.shape}")
    return _spread_accumulate(pitch, _SPREAD_NORM)


class TimeSmearing:
    """Per-band forward-masking filter state for one signal stream.

    The output is the maximum of the instantaneous pattern and a
    first-order decay of the previous output, so each band holds its
    peak and releases with the band's time constant. Starts at zero.
    """

    def __init__(self):
        self.smeared = np.zeros(T.N_BANDS)

    def step(self, excitation: np.ndarray) -> np.ndarray:
        filtered = T.SMEAR_ALPHA * self.smeared + (1.0 - T.SMEAR_ALPHA) * excitation
        self.smeared = np.maximum(filtered, excitation)
        return self.smeared


def time_smearing(excitations: np.ndarray, state: TimeSmearing | None = None) -> np.ndarray:
    """Run the forward-masking filter over a sequence of patterns.

    `excitations` is n_frames x 109; returns the smeared sequence. A
    fresh zero state is used unless one is passed in.
    """
    state = state or TimeSmearing()
    excitations = np.atleast_2d(np.asarray(excitations, dtype=np.float64))
    return np.stack([state.step(e) for e in excitations])


def masking_threshold(excitation: np.ndarray) -> np.ndarray:
    """Masking threshold: excitation divided by the per-band mask offset."""
    excitation = np.asarray(excitation, dtype=np.float64)
    if excitation.shape != (T.N_BANDS,):
        raise PeaqInputError(f"expected {T.N_BANDS} bands, got {excitation.shape}")
    return excitation * T.MASK_OFFSET


def data_boundary(samples: np.ndarray, threshold: float) -> int | None:
    """First sample index where five consecutive |samples| sum above threshold."""
    samples = np.asarray(samples, dtype=np.float64)
    if len(samples) < 5:
        return None
    csum = np.concatenate([[0.0], np.cumsum(np.abs(samples))])
    sums = csum[5:] - csum[:-5]
    hits = np.nonzero(sums > threshold)[0]
    return int(hits[0]) if len(hits) else None
