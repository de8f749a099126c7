"""End-to-end objective grading of a reference/test pair."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..audio_io import AudioBuffer, downmix_mono, resample
from ..errors import (
    ConfigError,
    LengthMismatchError,
    NoDataError,
    SampleRateMismatchError,
    SignalTooShortError,
    UnsupportedChannelCountError,
)
from . import tables as T
from .earmodel import (
    TimeSmearing,
    add_internal_noise,
    critical_band_grouping,
    data_boundary,
    ear_weighting,
    frame_spectrum,
    spreading,
)
from .movs import FrameFeatures, ModulationEnvelope, MovVector, compute_movs, total_loudness
from .neural import movs_to_odg

CHANNEL_POLICIES = ("mono_downmix", "error")


@dataclass
class PeaqConfig:
    """Grading parameters.

    listening_level: playback SPL in dB assumed for a full-scale sine.
    data_boundary_threshold: sum of five consecutive absolute sample
        values that marks the start of usable data.
    channel_policy: how to handle stereo input ("mono_downmix" folds to
        mono, "error" rejects).
    allow_resample: permit resampling non-48 kHz input instead of
        rejecting it.
    """

    listening_level: float = 92.0
    data_boundary_threshold: float = 200.0 / 32768.0
    channel_policy: str = "mono_downmix"
    allow_resample: bool = False

    def __post_init__(self):
        if not 60.0 <= self.listening_level <= 120.0:
            raise ConfigError(
                f"listening level {self.listening_level} outside [60, 120] dB"
            )
        if not self.data_boundary_threshold > 0.0:
            raise ConfigError("data boundary threshold must be positive")
        if self.channel_policy not in CHANNEL_POLICIES:
            raise ConfigError(
                f"unknown channel policy {self.channel_policy!r}; "
                f"expected one of {CHANNEL_POLICIES}"
            )


@dataclass
class PeaqResult:
    movs: MovVector
    di: float
    odg: float
    frames_processed: int
    warnings: list[str] = field(default_factory=list)


def _prepare(buf: AudioBuffer, config: PeaqConfig, warnings: list[str], role: str) -> AudioBuffer:
    if buf.n_channels > 1:
        if config.channel_policy == "error":
            raise UnsupportedChannelCountError(
                f"{role} signal has {buf.n_channels} channels and the "
                "channel policy forbids downmixing"
            )
        warnings.append(f"{role} signal downmixed to mono")
        buf = downmix_mono(buf)
    if buf.sample_rate != T.SAMPLE_RATE:
        if not config.allow_resample:
            raise SampleRateMismatchError(
                f"{role} signal is {buf.sample_rate} Hz; grading requires "
                f"{T.SAMPLE_RATE} Hz (pass allow_resample to convert)"
            )
        warnings.append(
            f"{role} signal resampled from {buf.sample_rate} Hz to {T.SAMPLE_RATE} Hz"
        )
        buf = resample(buf, T.SAMPLE_RATE)
    return buf


def _stream_features(samples: np.ndarray, offsets: np.ndarray, level: float) -> list[FrameFeatures]:
    smear = TimeSmearing()
    envelope = ModulationEnvelope()
    frames = []
    half = T.FRAME_SIZE // 2
    for start in offsets:
        frame = samples[start : start + T.FRAME_SIZE]
        power = frame_spectrum(frame, level)
        weighted = ear_weighting(power)
        banded = critical_band_grouping(weighted)
        pitch = add_internal_noise(banded)
        excitation = spreading(pitch)
        smeared = smear.step(excitation)
        modulation, mod_average = envelope.step(excitation)
        frames.append(FrameFeatures(
            power=power,
            weighted=weighted,
            excitation=excitation,
            smeared=smeared,
            modulation=modulation,
            mod_average=mod_average,
            total_loudness=total_loudness(smeared),
            tail_energy=float(np.sum(frame[half:] ** 2)),
        ))
    return frames


def _json_safe(value):
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    return value


def peaq_basic(
    ref: AudioBuffer,
    test: AudioBuffer,
    config: PeaqConfig | None = None,
    debug_dump: str | None = None,
) -> PeaqResult:
    """Grade a test signal against its reference.

    Both signals must share a sample rate and length. Inputs not at
    48 kHz are rejected unless the config permits resampling; stereo is
    folded to mono under the default channel policy. Processing starts at
    the data boundary and uses only complete frames.
    """
    if config is None:
        config = PeaqConfig()
    if ref.sample_rate != test.sample_rate:
        raise SampleRateMismatchError(
            f"sample rates differ: {ref.sample_rate} vs {test.sample_rate} Hz"
        )

    warnings: list[str] = []
    ref = _prepare(ref, config, warnings, "reference")
    test = _prepare(test, config, warnings, "test")

    if ref.n_samples != test.n_samples:
        raise LengthMismatchError(
            f"lengths differ: {ref.n_samples} vs {test.n_samples} samples"
        )
    n = ref.n_samples
    if n < T.FRAME_SIZE:
        raise SignalTooShortError(
            f"need at least {T.FRAME_SIZE} samples at {T.SAMPLE_RATE} Hz, got {n}"
        )

    x_ref = ref.channels[0]
    x_tst = test.channels[0]

    boundaries = [
        b
        for b in (
            data_boundary(x_ref, config.data_boundary_threshold),
            data_boundary(x_tst, config.data_boundary_threshold),
        )
        if b is not None
    ]
    if not boundaries:
        raise NoDataError("no signal exceeds the data boundary threshold")
    boundary = min(boundaries)

    first = 0 if boundary < T.FRAME_SIZE else (boundary - T.FRAME_SIZE) // T.HOP + 1
    start = first * T.HOP
    if start + T.FRAME_SIZE > n:
        raise NoDataError("no complete frame after the data boundary")
    offsets = np.arange(start, n - T.FRAME_SIZE + 1, T.HOP)

    level = config.listening_level
    ref_frames = _stream_features(x_ref, offsets, level)
    test_frames = _stream_features(x_tst, offsets, level)

    diagnostics: list | None = [] if debug_dump else None
    movs = compute_movs(ref_frames, test_frames, config, diagnostics=diagnostics)
    di, odg = movs_to_odg(movs)
    result = PeaqResult(
        movs=movs,
        di=di,
        odg=odg,
        frames_processed=len(offsets),
        warnings=warnings,
    )

    if debug_dump:
        dump = {
            "config": {
                "listening_level": config.listening_level,
                "data_boundary_threshold": config.data_boundary_threshold,
                "channel_policy": config.channel_policy,
                "allow_resample": config.allow_resample,
            },
            "sample_rate": T.SAMPLE_RATE,
            "first_frame_offset": int(start),
            "frames_processed": result.frames_processed,
            "frames": diagnostics,
            "movs": movs.as_dict(),
            "di": di,
            "odg": odg,
            "warnings": warnings,
        }
        with open(debug_dump, "w", encoding="utf-8") as handle:
            json.dump(_json_safe(dump), handle, indent=2, sort_keys=True)
            handle.write("\n")

    return result
