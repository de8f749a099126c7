"""Checks on the generated constant tables of the perceptual model."""

import numpy as np
import pytest

import aquakit.peaq.tables as T


def bark(f):
    return 7.0 * np.arcsinh(np.asarray(f, dtype=np.float64) / 650.0)


class TestBandLayout:
    def test_band_count(self):
        assert T.N_BANDS == 109
        for arr in (T.FL, T.FC, T.FU):
            assert arr.shape == (109,)

    def test_edges(self):
        assert T.FL[0] == 80.0
        assert T.FU[-1] == 18000.0

    def test_ordering(self):
        assert np.all(T.FL < T.FC)
        assert np.all(T.FC < T.FU)
        assert np.all(np.diff(T.FC) > 0)

    def test_contiguous(self):
        # upper edge of one band is the lower edge of the next
        assert np.allclose(T.FU[:-1], T.FL[1:], rtol=1e-12)

    def test_quarter_bark_spacing(self):
        widths = bark(T.FU) - bark(T.FL)
        # all bands are 0.25 wide on the asinh scale; the last one is
        # clipped slightly narrower when its top edge is pinned to 18 kHz
        assert np.allclose(widths[:-1], 0.25, atol=1e-9)
        assert 0.2 < widths[-1] <= 0.25 + 1e-9

    def test_centers_on_scale(self):
        expected = bark(80.0) + 0.25 * np.arange(109) + 0.125
        assert np.allclose(bark(T.FC), expected, atol=1e-9)

    def test_frame_constants(self):
        assert T.SAMPLE_RATE == 48000
        assert T.FRAME_SIZE == 2048
        assert T.HOP == 1024
        assert T.FRAME_RATE == pytest.approx(46.875)
        assert T.N_BINS == 1025


class TestGrouping:
    def test_shape_and_range(self):
        assert T.GROUPING.shape == (109, 1025)
        assert np.all(T.GROUPING >= 0.0)
        assert np.all(T.GROUPING <= 1.0 + 1e-12)

    def test_every_band_covered(self):
        assert np.all(T.GROUPING.sum(axis=1) > 0.0)

    def test_bins_not_double_counted(self):
        # a bin cell can straddle two bands but never contribute more
        # than its full width in total
        assert np.all(T.GROUPING.sum(axis=0) <= 1.0 + 1e-9)

    def test_interior_bins_fully_covered(self):
        freqs = T.BIN_FREQS
        interior = (freqs - 0.5 * freqs[1] >= T.FL[0]) & (freqs + 0.5 * freqs[1] <= T.FU[-1])
        assert np.allclose(T.GROUPING.sum(axis=0)[interior], 1.0, atol=1e-9)


class TestEarWeight:
    def test_dc_zeroed(self):
        assert T.EAR_WEIGHT[0] == 0.0

    def test_matches_closed_form(self):
        f_khz = T.BIN_FREQS[1:] / 1000.0
        a_db = (
            -2.184 * f_khz ** -0.8
            + 6.5 * np.exp(-0.6 * (f_khz - 3.3) ** 2)
            - 0.001 * f_khz ** 3.6
        )
        assert np.allclose(T.EAR_WEIGHT[1:], 10.0 ** (a_db / 10.0), rtol=1e-12)

    def test_one_khz_value(self):
        k = int(round(1000.0 / (T.SAMPLE_RATE / T.FRAME_SIZE)))
        db = 10.0 * np.log10(T.EAR_WEIGHT[k])
        assert db == pytest.approx(-1.913, abs=0.02)

    def test_high_frequency_rolloff(self):
        def w(freq):
            return T.EAR_WEIGHT[int(round(freq / (T.SAMPLE_RATE / T.FRAME_SIZE)))]

        assert w(18000) < w(10000) < w(4000)


class TestInternalNoise:
    def test_matches_closed_form(self):
        expected = 10.0 ** (1.456 * (T.FC / 1000.0) ** -0.8 / 10.0)
        assert np.allclose(T.INTERNAL_NOISE, expected, rtol=1e-12)

    def test_strictly_decreasing(self):
        assert np.all(np.diff(T.INTERNAL_NOISE) < 0)

    def test_positive(self):
        assert np.all(T.INTERNAL_NOISE > 1.0)  # always above unity in power


class TestMaskOffset:
    def test_low_band_plateau(self):
        # 3 dB offset through 12 on the pitch scale
        assert T.MASK_OFFSET[16] == pytest.approx(10.0 ** -0.3)
        assert T.MASK_OFFSET[48] == pytest.approx(10.0 ** -0.3)

    def test_slope_above_knee(self):
        # 0.25 dB per unit pitch beyond the plateau
        assert T.MASK_OFFSET[80] == pytest.approx(10.0 ** -0.5)
        assert T.MASK_OFFSET[49] == pytest.approx(10.0 ** (-0.25 * 49 * 0.25 / 10.0))

    def test_monotone_after_knee(self):
        assert np.all(np.diff(T.MASK_OFFSET[48:]) < 0)


class TestSmoothing:
    def test_formula(self):
        tau = 0.008 + (100.0 / T.FC) * (0.030 - 0.008)
        assert np.allclose(T.SMEAR_ALPHA, np.exp(-1.0 / (T.FRAME_RATE * tau)), rtol=1e-12)

    def test_bounds(self):
        for alpha in (T.SMEAR_ALPHA, T.MOD_ALPHA):
            assert np.all(alpha > 0.0)
            assert np.all(alpha < 1.0)

    def test_faster_decay_at_high_frequency(self):
        assert np.all(np.diff(T.SMEAR_ALPHA) < 0)

    def test_modulation_filter_slower(self):
        # 50 ms reference constant vs 30 ms for the masking filter
        assert np.all(T.MOD_ALPHA > T.SMEAR_ALPHA)


class TestGradingNetwork:
    def test_shapes(self):
        assert T.MOV_SCALE_MIN.shape == (11,)
        assert T.MOV_SCALE_MAX.shape == (11,)
        assert T.HIDDEN_WEIGHTS.shape == (11, 3)
        assert T.HIDDEN_BIAS.shape == (3,)
        assert T.OUTPUT_WEIGHTS.shape == (3,)

    def test_scale_ranges_nonempty(self):
        assert np.all(T.MOV_SCALE_MAX > T.MOV_SCALE_MIN)

    def test_grade_range(self):
        assert T.ODG_MIN == pytest.approx(-3.98)
        assert T.ODG_MAX == pytest.approx(0.22)


def test_tables_frozen():
    # regenerate-and-diff guard: any change to the generated tables or
    # embedded weights must be deliberate and show up here
    assert T.tables_digest() == (
        "b7010c07c3e0d4ea268bbbce7958ab570dfe57c4ab1e55c060ac921ad52c3dfc"
    )
