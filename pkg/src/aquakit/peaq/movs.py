"""Model output variables: per-frame features and their aggregation.

Consumes the per-frame ear-model outputs of both signal streams and
produces the 11 model output variables. Temporal recursions that couple
the two streams (pattern adaptation, detection-probability smoothing)
live here; per-stream recursions (smearing, modulation envelopes) run in
the pipeline and arrive as stream features.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import NoDataError, PeaqInputError
from ..spectral import hann_window
from . import tables as T
from .earmodel import critical_band_grouping

# energy gate for the harmonic-structure MOV: second half-frame energy,
# 8000 in 16-bit sample-squared units, here for full scale 1.0
EHS_ENERGY_GATE = 8000.0 / (32768.0 ** 2)

# detection-probability constants
_PD_POLY = (-0.198719, 0.0550197, -0.00102438, 5.05622e-6, 9.01033e-11)
_PD_D1 = 5.95072
_PD_D2 = 6.39468
_PD_G = 1.71332

# bandwidth detection: threshold region above 21.6 kHz, search floor 8.1 kHz
_BW_KX = 921
_BW_KL = 346
_BW_REF_FACTOR = 10.0  # reference must clear the noise floor by 10 dB
_BW_TEST_FACTOR = 10.0 ** 0.5  # test by 5 dB

# autocorrelation window for the harmonic-structure MOV
_EHS_LAGS = 256
_EHS_WINDOW = (1.0 / _EHS_LAGS) * math.sqrt(8.0 / 3.0) * hann_window(_EHS_LAGS)

_NMR_DISTORTION_THRESHOLD = 10.0 ** 0.15  # 1.5 dB


@dataclass
class MovVector:
    """The 11 model output variables feeding the grading network."""

    avg_bw_ref: float
    avg_bw_tst: float
    nmr_tot_b: float
    win_mod_diff1_b: float
    adb_b: float
    ehs_b: float
    avg_mod_diff1_b: float
    avg_mod_diff2_b: float
    rms_noise_loud_b: float
    mfpd_b: float
    rel_dist_frames_b: float

    def __post_init__(self):
        if not 0.0 <= self.mfpd_b <= 1.0:
            raise PeaqInputError(f"mfpd_b out of [0, 1]: {self.mfpd_b}")
        if not 0.0 <= self.rel_dist_frames_b <= 1.0:
            raise PeaqInputError(f"rel_dist_frames_b out of [0, 1]: {self.rel_dist_frames_b}")
        for name in ("avg_bw_ref", "avg_bw_tst"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1025.0:
                raise PeaqInputError(f"{name} out of [0, 1025]: {value}")

    def vector(self) -> np.ndarray:
        """MOVs in the fixed order the grading network expects."""
        return np.array([
            self.avg_bw_ref, self.avg_bw_tst, self.nmr_tot_b,
            self.win_mod_diff1_b, self.adb_b, self.ehs_b,
            self.avg_mod_diff1_b, self.avg_mod_diff2_b,
            self.rms_noise_loud_b, self.mfpd_b, self.rel_dist_frames_b,
        ])

    def as_dict(self) -> dict:
        return {
            "avg_bw_ref": self.avg_bw_ref,
            "avg_bw_tst": self.avg_bw_tst,
            "nmr_tot_b": self.nmr_tot_b,
            "win_mod_diff1_b": self.win_mod_diff1_b,
            "adb_b": self.adb_b,
            "ehs_b": self.ehs_b,
            "avg_mod_diff1_b": self.avg_mod_diff1_b,
            "avg_mod_diff2_b": self.avg_mod_diff2_b,
            "rms_noise_loud_b": self.rms_noise_loud_b,
            "mfpd_b": self.mfpd_b,
            "rel_dist_frames_b": self.rel_dist_frames_b,
        }


@dataclass
class FrameFeatures:
    """Per-frame ear-model outputs of one signal stream."""

    power: np.ndarray  # scaled power spectrum, 1025 bins
    weighted: np.ndarray  # after ear weighting
    excitation: np.ndarray  # spread, unsmeared, 109 bands
    smeared: np.ndarray  # after forward masking
    modulation: np.ndarray  # per-band modulation measure
    mod_average: np.ndarray  # smoothed compressed envelope
    total_loudness: float
    tail_energy: float  # sum of squares of the frame's second half


class ModulationEnvelope:
    """Per-band modulation tracker for one stream (input: unsmeared excitation)."""

    def __init__(self):
        self.previous = np.zeros(T.N_BANDS)
        self.derivative = np.zeros(T.N_BANDS)
        self.average = np.zeros(T.N_BANDS)

    def step(self, excitation: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Returns (modulation pattern, smoothed envelope) for this frame."""
        compressed = excitation ** 0.3
        a = T.MOD_ALPHA
        self.derivative = a * self.derivative + (1.0 - a) * T.FRAME_RATE * np.abs(
            compressed - self.previous
        )
        self.average = a * self.average + (1.0 - a) * compressed
        self.previous = compressed
        modulation = self.derivative / (1.0 + self.average / 0.3)
        return modulation, self.average.copy()


def specific_loudness(excitation: np.ndarray) -> np.ndarray:
    """Compressive per-band loudness; zero at or below the threshold excitation."""
    grown = (1.0 - T.LOUD_INDEX + T.LOUD_INDEX * excitation / T.LOUD_THRESHOLD) ** T.LOUD_E
    return np.maximum(T.LOUD_SCALE * (grown - 1.0), 0.0)


def total_loudness(excitation: np.ndarray) -> float:
    """Total loudness: scaled sum of the specific loudness over bands."""
    return float((24.0 / T.N_BANDS) * np.sum(specific_loudness(excitation)))


def modulation_loudness(
    excitation: np.ndarray,
    state: ModulationEnvelope,
    loudness_input: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Step the modulation envelope and evaluate loudness for one frame.

    Modulation always tracks the (unsmeared) excitation passed first;
    loudness is evaluated on `loudness_input` when given (the pipeline
    passes the time-smeared pattern there), else on the same excitation.
    Returns (modulation, specific loudness, total loudness).
    """
    modulation, _ = state.step(np.asarray(excitation, dtype=np.float64))
    basis = excitation if loudness_input is None else loudness_input
    loud = specific_loudness(np.asarray(basis, dtype=np.float64))
    return modulation, loud, float((24.0 / T.N_BANDS) * loud.sum())


# pattern-adaptation window: running average over 8 neighboring bands
_ADAPT_LOW = np.maximum(np.arange(T.N_BANDS) - 3, 0)
_ADAPT_HIGH = np.minimum(np.arange(T.N_BANDS) + 4, T.N_BANDS - 1)


class PatternAdaptation:
    """Level and pattern adaptation coupling the two streams."""

    def __init__(self):
        self.p = np.zeros((2, T.N_BANDS))
        self.rn = np.zeros(T.N_BANDS)
        self.rd = np.zeros(T.N_BANDS)
        self.pc = np.zeros((2, T.N_BANDS))

    def step(self, smeared_ref: np.ndarray, smeared_tst: np.ndarray):
        """Returns the spectrally adapted patterns (ref, test)."""
        a = T.MOD_ALPHA
        b = 1.0 - a
        self.p = a * self.p + b * np.stack([smeared_ref, smeared_tst])
        level = (np.sum(np.sqrt(self.p[0] * self.p[1])) / np.sum(self.p[1])) ** 2
        if level > 1.0:
            ep_ref = smeared_ref / level
            ep_tst = smeared_tst.copy()
        else:
            ep_ref = smeared_ref.copy()
            ep_tst = smeared_tst * level
        self.rn = a * self.rn + ep_tst * ep_ref
        self.rd = a * self.rd + ep_ref * ep_ref
        dominant = self.rn >= self.rd
        r_ref = np.where(dominant, 1.0, self.rn / self.rd)
        r_tst = np.where(dominant, self.rd / self.rn, 1.0)
        for channel, r in ((0, r_ref), (1, r_tst)):
            csum = np.concatenate([[0.0], np.cumsum(r)])
            means = (csum[_ADAPT_HIGH + 1] - csum[_ADAPT_LOW]) / (
                _ADAPT_HIGH - _ADAPT_LOW + 1
            )
            self.pc[channel] = a * self.pc[channel] + b * means
        return ep_ref * self.pc[0], ep_tst * self.pc[1]


def detection_probability(smeared_ref, smeared_tst) -> tuple[float, float]:
    """Per-frame detection probability and distortion-step count.

    Asymmetric excitation difference in dB drives a per-band probability;
    bands combine as 1 - prod(1 - p). Returns (probability, total steps).
    """
    db_ref = 10.0 * np.log10(smeared_ref)
    db_tst = 10.0 * np.log10(smeared_tst)
    diff = db_ref - db_tst
    louder = diff > 0.0
    level = np.where(louder, 0.3 * db_ref + 0.7 * db_tst, db_tst)
    exponent = np.where(louder, 4.0, 6.0)
    c0, c1, c2, c3, c4 = _PD_POLY
    poly = c0 + level * (c1 + level * (c2 + level * (c3 + level * c4)))
    safe = np.where(level > 0.0, level, 1.0)
    slope = np.where(level > 0.0, _PD_D1 * (_PD_D2 / safe) ** _PD_G + poly, 1e30)
    prob = 1.0 - 0.5 ** ((diff / slope) ** exponent)
    steps = np.abs(np.trunc(diff)) / slope
    return float(1.0 - np.prod(1.0 - prob)), float(np.sum(steps))


def noise_loudness(modulation_ref, modulation_tst, adapted_ref, adapted_tst) -> float:
    """Partial loudness of additive distortion after pattern adaptation."""
    s_ref = 0.15 * modulation_ref + 0.5
    s_tst = 0.15 * modulation_tst + 0.5
    beta = np.exp(-1.5 * (adapted_tst - adapted_ref) / adapted_ref)
    a = np.maximum(s_tst * adapted_tst - s_ref * adapted_ref, 0.0)
    b = T.INTERNAL_NOISE + s_ref * adapted_ref * beta
    terms = (T.INTERNAL_NOISE / s_tst) ** T.LOUD_E * ((1.0 + a / b) ** T.LOUD_E - 1.0)
    value = (24.0 / T.N_BANDS) * float(np.sum(terms))
    return max(value, 0.0)


def bandwidth(power_ref: np.ndarray, power_tst: np.ndarray) -> tuple[int, int]:
    """Per-frame bandwidths (in bins) from high-frequency rolloff detection.

    The noise floor is the largest test power above 21.6 kHz; the
    reference bandwidth is the highest bin clearing it by 10 dB, the test
    bandwidth the highest bin at or below that clearing it by 5 dB.
    Returns 0 for a channel with no qualifying bin.
    """
    floor = float(np.max(power_tst[_BW_KX : T.N_BINS - 1]))
    above = np.nonzero(power_ref[_BW_KL + 1 : _BW_KX] >= _BW_REF_FACTOR * floor)[0]
    if len(above) == 0:
        return 0, 0
    bw_ref = _BW_KL + 1 + int(above[-1]) + 1
    above_tst = np.nonzero(power_tst[:bw_ref] >= _BW_TEST_FACTOR * floor)[0]
    bw_tst = int(above_tst[-1]) + 1 if len(above_tst) else 0
    return bw_ref, bw_tst


def noise_to_mask(noise_bands: np.ndarray, smeared_ref: np.ndarray) -> tuple[float, float]:
    """Mean and max band noise-to-mask ratio for one frame."""
    ratio = noise_bands / (T.MASK_OFFSET * smeared_ref)
    return float(np.mean(ratio)), float(np.max(ratio))


def harmonic_structure(
    power_ref: np.ndarray,
    power_tst: np.ndarray,
    tail_energy_ref: float,
    tail_energy_tst: float,
) -> float:
    """Per-frame harmonic structure of the error: peak of the spectrum of
    the windowed autocorrelation of the log spectral difference.

    Returns -1.0 for frames below the energy gate (excluded from the
    average).
    """
    if tail_energy_ref < EHS_ENERGY_GATE and tail_energy_tst < EHS_ENERGY_GATE:
        return -1.0
    m = _EHS_LAGS
    diff = np.log(power_tst / power_ref)
    corr = np.correlate(diff[: 2 * m - 1], diff[:m], mode="valid")
    # incremental window energies for the normalization
    sq = diff[: 2 * m - 1] ** 2
    csum = np.concatenate([[0.0], np.cumsum(sq)])
    window_energy = csum[m:] - csum[:m]
    denom = corr[0] * window_energy
    normalized = np.ones(m)
    positive = denom > 0.0
    normalized[positive] = corr[positive] / np.sqrt(denom[positive])
    normalized[0] = 1.0
    windowed = _EHS_WINDOW * (normalized - np.mean(normalized))
    spectrum = np.fft.rfft(windowed, m)
    magnitude = spectrum.real ** 2 + spectrum.imag ** 2
    rising = magnitude[1:][magnitude[1:] > magnitude[:-1]]
    return float(np.max(rising)) if len(rising) else 0.0


def _windowed_average(values: np.ndarray, length: int) -> float:
    # sliding fourth-power average of square roots
    n = len(values)
    if n < length:
        return 0.0
    roots = np.sqrt(values)
    csum = np.concatenate([[0.0], np.cumsum(roots)])
    means = (csum[length:] - csum[:-length]) / length
    return float(np.sqrt(np.sum(means ** 4) / (n - length + 1)))


def _weighted_average(values: np.ndarray, weights: np.ndarray) -> float:
    if len(values) == 0:
        return 0.0
    return float(np.sum(weights * values) / np.sum(weights))


def compute_movs(
    ref_frames: list[FrameFeatures],
    test_frames: list[FrameFeatures],
    config=None,
    diagnostics: list | None = None,
) -> MovVector:
    """Aggregate the 11 model output variables over both frame streams.

    Streams must be frame-synchronous and already trimmed to start at the
    data boundary. When `diagnostics` is a list, one dict of per-frame
    intermediates is appended per frame.
    """
    if len(ref_frames) != len(test_frames):
        raise PeaqInputError(
            f"stream lengths differ: {len(ref_frames)} vs {len(test_frames)}"
        )
    n = len(ref_frames)
    if n == 0:
        raise NoDataError("no frames to grade")

    adapt = PatternAdaptation()
    bw_ref = np.zeros(n)
    bw_tst = np.zeros(n)
    nmr_avg = np.zeros(n)
    nmr_max = np.zeros(n)
    pd_prob = np.zeros(n)
    pd_steps = np.zeros(n)
    mod_diff1 = np.zeros(n)
    mod_diff2 = np.zeros(n)
    mod_weight = np.zeros(n)
    noise_loud = np.zeros(n)
    harmonic = np.zeros(n)
    loud_ref = np.zeros(n)
    loud_tst = np.zeros(n)

    for i, (fr, ft) in enumerate(zip(ref_frames, test_frames)):
        # error signal patterns from the weighted spectra
        noise_spectrum = fr.weighted - 2.0 * np.sqrt(fr.weighted * ft.weighted) + ft.weighted
        noise_bands = critical_band_grouping(noise_spectrum)

        bw_ref[i], bw_tst[i] = bandwidth(fr.power, ft.power)
        nmr_avg[i], nmr_max[i] = noise_to_mask(noise_bands, fr.smeared)
        pd_prob[i], pd_steps[i] = detection_probability(fr.smeared, ft.smeared)

        m_ref = fr.modulation
        m_tst = ft.modulation
        larger = m_ref > m_tst
        diff = np.abs(m_ref - m_tst)
        asym = np.where(larger, 0.1 * diff, diff)
        mod_diff1[i] = (100.0 / T.N_BANDS) * np.sum(diff / (1.0 + m_ref))
        mod_diff2[i] = (100.0 / T.N_BANDS) * np.sum(asym / (0.01 + m_ref))
        mod_weight[i] = np.sum(
            fr.mod_average / (fr.mod_average + 100.0 * T.INTERNAL_NOISE ** 0.3)
        )

        adapted_ref, adapted_tst = adapt.step(fr.smeared, ft.smeared)
        noise_loud[i] = noise_loudness(m_ref, m_tst, adapted_ref, adapted_tst)
        harmonic[i] = harmonic_structure(
            fr.power, ft.power, fr.tail_energy, ft.tail_energy
        )
        loud_ref[i] = fr.total_loudness
        loud_tst[i] = ft.total_loudness

        if diagnostics is not None:
            diagnostics.append({
                "frame": i,
                "bw_ref": float(bw_ref[i]),
                "bw_tst": float(bw_tst[i]),
                "nmr_avg": nmr_avg[i],
                "nmr_max": nmr_max[i],
                "detection_probability": pd_prob[i],
                "distortion_steps": pd_steps[i],
                "mod_diff1": mod_diff1[i],
                "mod_diff2": mod_diff2[i],
                "mod_weight": mod_weight[i],
                "noise_loudness": noise_loud[i],
                "harmonic_structure": harmonic[i],
                "total_loudness_ref": loud_ref[i],
                "total_loudness_tst": loud_tst[i],
            })

    # bandwidth MOVs average frames with a positive detection
    valid_ref = bw_ref > 0
    valid_tst = bw_tst > 0
    avg_bw_ref = float(np.mean(bw_ref[valid_ref])) if valid_ref.any() else 0.0
    avg_bw_tst = float(np.mean(bw_tst[valid_tst])) if valid_tst.any() else 0.0

    nmr_tot = 10.0 * math.log10(np.mean(nmr_avg))
    rel_dist = float(np.mean(nmr_max > _NMR_DISTORTION_THRESHOLD))

    # modulation-difference MOVs skip the first half second
    delay = math.ceil(0.5 * T.FRAME_RATE)
    win_len = int(0.1 * T.FRAME_RATE)
    win_mod_diff1 = _windowed_average(mod_diff1[delay:], win_len)
    avg_mod_diff1 = _weighted_average(mod_diff1[delay:], mod_weight[delay:])
    avg_mod_diff2 = _weighted_average(mod_diff2[delay:], mod_weight[delay:])

    # detection-probability MOVs run over all frames
    phc = 0.0
    mfpd = 0.0
    distorted = 0
    step_sum = 0.0
    for i in range(n):
        phc = 0.9 * phc + 0.1 * pd_prob[i]
        mfpd = max(mfpd, phc)
        if pd_prob[i] > 0.5:
            distorted += 1
            step_sum += pd_steps[i]
    if distorted == 0:
        adb = 0.0
    elif step_sum > 0.0:
        adb = math.log10(step_sum / distorted)
    else:
        adb = -0.5

    # noise loudness starts after both streams reach the loudness
    # threshold (plus 50 ms), never earlier than the half-second delay
    loud_frame = n
    for i in range(n):
        if loud_ref[i] > 0.1 and loud_tst[i] > 0.1:
            loud_frame = i
            break
    nl_start = int(max(loud_frame + math.ceil(0.05 * T.FRAME_RATE), delay))
    nl_tail = noise_loud[nl_start:]
    rms_noise_loud = float(np.sqrt(np.mean(nl_tail ** 2))) if len(nl_tail) else 0.0

    valid_harmonic = harmonic >= 0.0
    ehs = 1000.0 * float(np.mean(harmonic[valid_harmonic])) if valid_harmonic.any() else 0.0

    return MovVector(
        avg_bw_ref=avg_bw_ref,
        avg_bw_tst=avg_bw_tst,
        nmr_tot_b=nmr_tot,
        win_mod_diff1_b=win_mod_diff1,
        adb_b=adb,
        ehs_b=ehs,
        avg_mod_diff1_b=avg_mod_diff1,
        avg_mod_diff2_b=avg_mod_diff2,
        rms_noise_loud_b=rms_noise_loud,
        mfpd_b=mfpd,
        rel_dist_frames_b=rel_dist,
    )
