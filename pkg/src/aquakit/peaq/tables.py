"""Constant tables for the basic-version perceptual model.

Everything here is generated from closed-form expressions at import time
(band edges, ear weighting, internal noise) or embedded as literals (the
grading network weights), so the model has no runtime file dependencies.
A checksum test freezes the generated values.
"""

import hashlib

import numpy as np

SAMPLE_RATE = 48000
FRAME_SIZE = 2048
HOP = FRAME_SIZE // 2
FRAME_RATE = SAMPLE_RATE / HOP  # 46.875 frames per second

N_BANDS = 109
DZ = 0.25  # band width in Bark
E_MIN = 1e-12  # floor for grouped band energies
POWER_FLOOR = 1e-12  # floor for scaled power spectrum bins

N_BINS = FRAME_SIZE // 2 + 1
BIN_FREQS = np.arange(N_BINS) * (SAMPLE_RATE / FRAME_SIZE)


def _bark(f):
    return 7.0 * np.arcsinh(np.asarray(f, dtype=np.float64) / 650.0)


def _bark_inv(z):
    return 650.0 * np.sinh(np.asarray(z, dtype=np.float64) / 7.0)


def _band_edges():
    # 109 bands of 0.25 Bark covering 80 Hz to 18 kHz on z = 7*asinh(f/650);
    # the top edge lands a hair above 18 kHz and is pinned back to it.
    z_low = _bark(80.0) + DZ * np.arange(N_BANDS)
    fl = _bark_inv(z_low)
    fc = _bark_inv(z_low + DZ / 2.0)
    fu = _bark_inv(z_low + DZ)
    fl[0] = 80.0
    fu[-1] = 18000.0
    return fl, fc, fu


FL, FC, FU = _band_edges()


def _grouping_matrix():
    # U[i, k]: fraction of DFT bin k's width-df cell overlapping band i.
    df = SAMPLE_RATE / FRAME_SIZE
    low = (np.arange(N_BINS) - 0.5) * df
    high = (np.arange(N_BINS) + 0.5) * df
    overlap = np.minimum(FU[:, None], high[None, :]) - np.maximum(FL[:, None], low[None, :])
    return np.maximum(overlap, 0.0) / df


GROUPING = _grouping_matrix()


def _ear_weighting():
    # Outer/middle ear magnitude-squared weighting; the DC bin is zeroed.
    w2 = np.zeros(N_BINS)
    f_khz = BIN_FREQS[1:] / 1000.0
    a_db = (
        -2.184 * f_khz ** -0.8
        + 6.5 * np.exp(-0.6 * (f_khz - 3.3) ** 2)
        - 0.001 * f_khz ** 3.6
    )
    w2[1:] = 10.0 ** (a_db / 10.0)
    return w2


EAR_WEIGHT = _ear_weighting()

# internal noise added to the pitch patterns
INTERNAL_NOISE = 10.0 ** (1.456 * (FC / 1000.0) ** -0.8 / 10.0)


def _mask_offsets():
    # masking offset: 3 dB up to 12 Bark (k*dz), 0.25 dB per Bark above
    k = np.arange(N_BANDS)
    m_db = np.where(k <= 12.0 / DZ, 3.0, 0.25 * k * DZ)
    return 10.0 ** (-m_db / 10.0)


MASK_OFFSET = _mask_offsets()


def smoothing_coefficients(tau_100: float, tau_min: float = 0.008) -> np.ndarray:
    """Per-band first-order filter coefficients a = exp(-1/(frame_rate*tau))."""
    tau = tau_min + (100.0 / FC) * (tau_100 - tau_min)
    return np.exp(-1.0 / (FRAME_RATE * tau))

# forward-masking smearing uses tau_100 = 30 ms, the modulation and
# pattern-adaptation filters use 50 ms
SMEAR_ALPHA = smoothing_coefficients(0.030)
MOD_ALPHA = smoothing_coefficients(0.050)

# loudness constants
LOUD_C = 1.07664
LOUD_E = 0.23
LOUD_E0 = 1e4
LOUD_THRESHOLD = 10.0 ** (3.64 * (FC / 1000.0) ** -0.8 / 10.0)
LOUD_INDEX = 10.0 ** (
    (-2.0 - 2.05 * np.arctan(FC / 4000.0) - 0.75 * np.arctan((FC / 1600.0) ** 2)) / 10.0
)
LOUD_SCALE = LOUD_C * (LOUD_THRESHOLD / (LOUD_INDEX * LOUD_E0)) ** LOUD_E

# grading network, basic version: 11 inputs, 3 hidden sigmoid nodes
MOV_SCALE_MIN = np.array([
    393.916656, 361.965332, -24.045116, 1.110661, -0.206623, 0.074318,
    1.113683, 0.950345, 0.029985, 0.000101, 0.0,
])
MOV_SCALE_MAX = np.array([
    921.0, 881.131226, 16.212030, 107.137772, 2.886017, 13.933351,
    63.257874, 1145.018555, 14.819740, 1.0, 1.0,
])
HIDDEN_WEIGHTS = np.array([
    [-0.502657, 0.436333, 1.219602],
    [4.307481, 3.246017, 1.123743],
    [4.984241, -2.211189, -0.192096],
    [0.051056, -1.762424, 4.331315],
    [2.321580, 1.789971, -0.754560],
    [-5.303901, -3.452257, -10.814982],
    [2.730991, -6.111805, 1.519223],
    [0.624950, -1.331523, -5.955151],
    [3.102889, 0.871260, -5.922878],
    [-1.051468, -0.939882, -0.142913],
    [-1.804679, -0.503610, -0.620456],
])
HIDDEN_BIAS = np.array([-2.518254, 0.654841, -2.207228])
OUTPUT_WEIGHTS = np.array([-3.817048, 4.107138, 4.629582])
OUTPUT_BIAS = -0.307594
ODG_MIN = -3.98
ODG_MAX = 0.22


def tables_digest() -> str:
    """SHA-256 over all embedded and generated tables.

    Generated values are rounded to 1e-6 of their unit before hashing so
    the digest is stable against last-bit libm differences.
    """
    h = hashlib.sha256()
    for arr in (
        FL, FC, FU, EAR_WEIGHT, INTERNAL_NOISE, MASK_OFFSET,
        SMEAR_ALPHA, MOD_ALPHA, LOUD_THRESHOLD, LOUD_INDEX, LOUD_SCALE,
        GROUPING.ravel(),
        MOV_SCALE_MIN, MOV_SCALE_MAX, HIDDEN_WEIGHTS.ravel(),
        HIDDEN_BIAS, OUTPUT_WEIGHTS,
        np.array([OUTPUT_BIAS, ODG_MIN, ODG_MAX, float(N_BANDS), DZ, E_MIN]),
    ):
        h.update(np.round(np.asarray(arr, dtype=np.float64), 6).tobytes())
    return h.hexdigest()
