"""Ear-model stage tests: spectra, band patterns, spreading, smearing."""

import numpy as np
import pytest

import aquakit.peaq.tables as T
from aquakit.errors import PeaqInputError
from aquakit.peaq.earmodel import (
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


def tone_frame(freq, amplitude=1.0, phase=0.0):
    n = np.arange(T.FRAME_SIZE)
    return amplitude * np.sin(2 * np.pi * freq * n / T.SAMPLE_RATE + phase)


class TestFrameSpectrum:
    def test_silence_hits_floor(self):
        spec = frame_spectrum(np.zeros(T.FRAME_SIZE))
        assert spec.shape == (T.N_BINS,)
        assert np.all(spec == T.POWER_FLOOR)

    def test_calibration_tone_level(self):
        # full-scale sine at the 1 kHz anchor peaks at the listening level
        spec = frame_spectrum(tone_frame(1000.0), level_db=92.0)
        peak_db = 10.0 * np.log10(spec.max())
        assert peak_db == pytest.approx(92.0, abs=0.5)

    def test_peak_bin_position(self):
        spec = frame_spectrum(tone_frame(1000.0))
        expected_bin = round(1000.0 / (T.SAMPLE_RATE / T.FRAME_SIZE))
        assert abs(int(np.argmax(spec)) - expected_bin) <= 1

    def test_level_scaling(self):
        frame = tone_frame(1000.0)
        hi = frame_spectrum(frame, level_db=92.0)
        lo = frame_spectrum(frame, level_db=80.0)
        assert hi.max() / lo.max() == pytest.approx(10.0 ** 1.2, rel=1e-9)

    def test_rejects_wrong_length(self):
        with pytest.raises(PeaqInputError):
            frame_spectrum(np.zeros(1024))

    def test_nonnegative(self):
        rng = np.random.default_rng(7)
        spec = frame_spectrum(rng.uniform(-1, 1, T.FRAME_SIZE))
        assert np.all(spec >= T.POWER_FLOOR)


class TestEarWeighting:
    def test_identity_input_returns_curve(self):
        assert np.array_equal(ear_weighting(np.ones(T.N_BINS)), T.EAR_WEIGHT)

    def test_linear(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 10, T.N_BINS)
        assert np.allclose(ear_weighting(2 * x), 2 * ear_weighting(x), rtol=1e-12)

    def test_rejects_wrong_shape(self):
        with pytest.raises(PeaqInputError):
            ear_weighting(np.ones(512))


class TestCriticalBandGrouping:
    def test_conserves_interior_energy(self):
        rng = np.random.default_rng(5)
        freqs = T.BIN_FREQS
        df = freqs[1]
        x = np.where(
            (freqs - 0.5 * df >= T.FL[0]) & (freqs + 0.5 * df <= T.FU[-1]),
            rng.uniform(0.1, 5.0, T.N_BINS),
            0.0,
        )
        grouped = critical_band_grouping(x)
        assert grouped.sum() == pytest.approx(x.sum(), rel=1e-6)

    def test_tone_lands_in_owning_band(self):
        # pick a bin wholly inside one band, put all power there
        row, col = 60, None
        for k in range(T.N_BINS):
            if T.GROUPING[row, k] > 0.999:
                col = k
                break
        assert col is not None
        x = np.zeros(T.N_BINS)
        x[col] = 42.0
        grouped = critical_band_grouping(x)
        assert int(np.argmax(grouped)) == row
        assert grouped[row] == pytest.approx(42.0, rel=1e-9)

    def test_silence_floored(self):
        grouped = critical_band_grouping(np.zeros(T.N_BINS))
        assert np.all(grouped == T.E_MIN)

    def test_rejects_wrong_shape(self):
        with pytest.raises(PeaqInputError):
            critical_band_grouping(np.zeros(109))


class TestInternalNoise:
    def test_zero_input_gives_noise_pattern(self):
        assert np.array_equal(add_internal_noise(np.zeros(T.N_BANDS)), T.INTERNAL_NOISE)

    def test_additive(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 100, T.N_BANDS)
        assert np.allclose(add_internal_noise(x), x + T.INTERNAL_NOISE, rtol=1e-15)


class TestSpreading:
    def test_zeros_stay_zero(self):
        out = spreading(np.zeros(T.N_BANDS))
        assert np.all(out == 0.0)
        assert not np.any(np.isnan(out))

    def test_rejects_wrong_shape(self):
        with pytest.raises(PeaqInputError):
            spreading(np.zeros(64))

    def test_masker_band_dominates(self):
        e = np.zeros(T.N_BANDS)
        e[60] = 1e6
        out = spreading(e)
        assert int(np.argmax(out)) == 60
        assert np.all(out > 0)

    def test_lower_skirt_slope(self):
        # fixed 27 dB per Bark toward low frequencies: 6.75 dB per band
        e = np.zeros(T.N_BANDS)
        e[60] = 1e6
        db = 10.0 * np.log10(spreading(e))
        steps = db[30:55] - db[31:56]
        assert np.all(np.abs(steps + 6.75) < 0.01)

    def test_upper_skirt_flattens_with_level(self):
        lo = np.zeros(T.N_BANDS)
        hi = np.zeros(T.N_BANDS)
        lo[40] = 10.0 ** 4
        hi[40] = 10.0 ** 8
        out_lo = spreading(lo)
        out_hi = spreading(hi)
        drop_lo = 10.0 * np.log10(out_lo[50] / out_lo[41])
        drop_hi = 10.0 * np.log10(out_hi[50] / out_hi[41])
        assert drop_hi > drop_lo
        # slope term 0.2*L dB per Bark: +40 dB level over 2.25 Bark = 18 dB
        assert drop_hi - drop_lo == pytest.approx(18.0, abs=0.01)


class TestTimeSmearing:
    def test_first_frame_passes_through(self):
        rng = np.random.default_rng(2)
        e = rng.uniform(0, 10, T.N_BANDS)
        assert np.array_equal(TimeSmearing().step(e), e)

    def test_constant_input_is_fixed_point(self):
        state = TimeSmearing()
        e = np.full(T.N_BANDS, 5.0)
        state.step(e)
        assert np.allclose(state.step(e), e, rtol=1e-14)
        assert np.allclose(state.step(e), e, rtol=1e-14)

    def test_release_decays_by_alpha(self):
        state = TimeSmearing()
        first = state.step(np.full(T.N_BANDS, 100.0))
        zero = np.zeros(T.N_BANDS)
        second = state.step(zero)
        third = state.step(zero)
        assert np.allclose(second, T.SMEAR_ALPHA * first, rtol=1e-12)
        assert np.allclose(third, T.SMEAR_ALPHA * second, rtol=1e-12)

    def test_output_never_below_input(self):
        rng = np.random.default_rng(9)
        state = TimeSmearing()
        for _ in range(50):
            e = rng.uniform(0, 1000, T.N_BANDS)
            assert np.all(state.step(e) >= e)

    def test_sequence_helper_matches_loop(self):
        rng = np.random.default_rng(4)
        seq = rng.uniform(0, 10, (20, T.N_BANDS))
        state = TimeSmearing()
        expected = np.stack([state.step(e) for e in seq])
        assert np.allclose(time_smearing(seq), expected, rtol=1e-15)


class TestMaskingThreshold:
    def test_applies_offset(self):
        e = np.ones(T.N_BANDS)
        m = masking_threshold(e)
        assert m[16] == pytest.approx(10.0 ** -0.3)
        assert m[80] == pytest.approx(10.0 ** -0.5)

    def test_rejects_wrong_shape(self):
        with pytest.raises(PeaqInputError):
            masking_threshold(np.ones(10))


class TestDataBoundary:
    def test_silence_has_no_boundary(self):
        assert data_boundary(np.zeros(48000), 200.0 / 32768.0) is None

    def test_threshold_is_strict(self):
        x = np.full(5, 0.1)
        assert data_boundary(x, 0.5) is None
        assert data_boundary(x, 0.49) == 0

    def test_leading_silence_skipped(self):
        x = np.zeros(200)
        x[100:] = 0.5
        # the first five-sample window reaching sample 100 starts at 96
        assert data_boundary(x, 200.0 / 32768.0) == 96

    def test_too_short(self):
        assert data_boundary(np.ones(4), 0.001) is None

    def test_sign_ignored(self):
        x = np.zeros(50)
        x[10:] = -0.9
        assert data_boundary(x, 0.1) == 6
