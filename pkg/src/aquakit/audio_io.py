"""Reading, writing, and conditioning of wav audio.

Decodes RIFF/WAVE files into float buffers, downmixes, resamples with a
Kaiser-windowed sinc kernel, and aligns reference/test pairs. All functions
are pure; buffers are treated as immutable once constructed.
"""

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    AquaKitWarning,
    LengthMismatchError,
    MalformedRiffError,
    SampleRateMismatchError,
    UnsupportedBitDepthError,
    UnsupportedChannelCountError,
    UnsupportedCodecError,
)

# wav format tags we understand
_TAG_PCM = 0x0001
_TAG_FLOAT = 0x0003
_TAG_EXTENSIBLE = 0xFFFE


@dataclass
class AudioBuffer:
    """Decoded PCM audio: per-channel sample vectors plus a sample rate.

    Samples are float64 with nominal range [-1.0, 1.0]. All channels have
    equal length and the channel count is at least one.
    """

    channels: list[np.ndarray]
    sample_rate: int
    source_path: str | None = None

    def __post_init__(self):
        if len(self.channels) < 1:
            raise ValueError("AudioBuffer needs at least one channel")
        if int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be positive")
        self.sample_rate = int(self.sample_rate)
        self.channels = [np.asarray(c, dtype=np.float64) for c in self.channels]
        lengths = {len(c) for c in self.channels}
        if len(lengths) > 1:
            raise ValueError("all channels must have equal length")

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def n_samples(self) -> int:
        return len(self.channels[0])

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return self.n_samples / self.sample_rate


def _parse_fmt(payload: bytes):
    if len(payload) < 16:
        raise MalformedRiffError("fmt chunk shorter than 16 bytes")
    tag, n_channels, sample_rate, _byte_rate, block_align, bits = struct.unpack(
        "<HHIIHH", payload[:16]
    )
    if tag == _TAG_EXTENSIBLE:
        # WAVE_FORMAT_EXTENSIBLE carries the real format tag in the first
        # two bytes of the SubFormat GUID.
        if len(payload) < 40:
            raise MalformedRiffError("extensible fmt chunk shorter than 40 bytes")
        tag = struct.unpack("<H", payload[24:26])[0]
    return tag, n_channels, sample_rate, block_align, bits


def _decode_samples(data: bytes, tag: int, bits: int) -> np.ndarray:
    """Decode interleaved sample bytes to float64 in [-1, 1)."""
    if tag == _TAG_FLOAT:
        if bits != 32:
            raise UnsupportedBitDepthError(
                f"float wav must be 32-bit, got {bits}-bit"
            )
        return np.frombuffer(data, dtype="<f4").astype(np.float64)
    if tag != _TAG_PCM:
        raise UnsupportedCodecError(f"unsupported wav compression code {tag}")
    if bits == 16:
        return np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    if bits == 24:
        raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        val = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        val = np.where(val >= 1 << 23, val - (1 << 24), val)
        return val.astype(np.float64) / float(1 << 23)
    if bits == 32:
        return np.frombuffer(data, dtype="<i4").astype(np.float64) / float(1 << 31)
    raise UnsupportedBitDepthError(f"unsupported PCM bit depth {bits}")


def read_wav(path) -> AudioBuffer:
    """Decode a RIFF/WAVE file into an AudioBuffer.

    Accepts 16/24/32-bit integer PCM and 32-bit float, 1 or 2 channels,
    including WAVE_FORMAT_EXTENSIBLE headers wrapping those formats.
    Integer samples are scaled by 1/2^(bits-1). Unknown chunks are skipped.

    Raises:
        FileNotFoundError: missing file.
        MalformedRiffError: broken container structure.
        UnsupportedCodecError: compression codes other than PCM/float.
        UnsupportedBitDepthError / UnsupportedChannelCountError: out of range.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[0:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise MalformedRiffError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        cid = blob[pos : pos + 4]
        (size,) = struct.unpack("<I", blob[pos + 4 : pos + 8])
        payload_end = pos + 8 + size
        if payload_end > len(blob):
            raise MalformedRiffError(f"{path}: chunk {cid!r} extends past end of file")
        payload = blob[pos + 8 : payload_end]
        if cid == b"fmt ":
            fmt = _parse_fmt(payload)
        elif cid == b"data":
            data = payload
        # chunks are word-aligned; odd sizes carry a pad byte
        pos = payload_end + (size & 1)

    if fmt is None:
        raise MalformedRiffError(f"{path}: missing fmt chunk")
    if data is None:
        raise MalformedRiffError(f"{path}: missing data chunk")

    tag, n_channels, sample_rate, block_align, bits = fmt
    if not 1 <= n_channels <= 2:
        raise UnsupportedChannelCountError(
            f"{path}: {n_channels} channels, only 1 or 2 supported"
        )
    if sample_rate <= 0:
        raise MalformedRiffError(f"{path}: non-positive sample rate")
    expected_align = n_channels * (bits // 8)
    if block_align != expected_align:
        raise MalformedRiffError(
            f"{path}: block align {block_align} does not match "
            f"{n_channels} channels at {bits} bits"
        )
    if len(data) % block_align != 0:
        raise MalformedRiffError(
            f"{path}: data chunk size {len(data)} is not a multiple of "
            f"the {block_align}-byte frame"
        )

    flat = _decode_samples(data, tag, bits)
    frames = flat.reshape(-1, n_channels)
    channels = [np.ascontiguousarray(frames[:, c]) for c in range(n_channels)]
    return AudioBuffer(channels=channels, sample_rate=sample_rate, source_path=str(path))


def write_wav(path, buf: AudioBuffer, bits: int = 16) -> None:
    """Encode an AudioBuffer as integer PCM (16-bit) or 32-bit float wav.

    16-bit samples are scaled by 32768 and rounded, so values decoded by
    read_wav round-trip bit-exactly.
    """
    if bits not in (16, 32):
        raise UnsupportedBitDepthError(f"write_wav supports 16 or 32 bits, got {bits}")
    frames = np.stack(buf.channels, axis=1)
    if bits == 16:
        tag = _TAG_PCM
        ints = np.clip(np.round(frames * 32768.0), -32768, 32767).astype("<i2")
        payload = ints.tobytes()
    else:
        tag = _TAG_FLOAT
        payload = frames.astype("<f4").tobytes()
    n_channels = buf.n_channels
    block_align = n_channels * (bits // 8)
    byte_rate = buf.sample_rate * block_align
    fmt = struct.pack(
        "<HHIIHH", tag, n_channels, buf.sample_rate, byte_rate, block_align, bits
    )
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", len(body)) + body)


def downmix_mono(buf: AudioBuffer) -> AudioBuffer:
    """Average all channels into one; mono input is returned unchanged."""
    if buf.n_channels == 1:
        return buf
    mixed = np.mean(np.stack(buf.channels, axis=0), axis=0)
    return AudioBuffer([mixed], buf.sample_rate, buf.source_path)


def _kaiser(u: np.ndarray, half_width: float, beta: float) -> np.ndarray:
    """Kaiser window evaluated at offsets u, zero outside [-half_width, half_width]."""
    x = u / half_width
    inside = np.abs(x) <= 1.0
    w = np.zeros_like(u)
    w[inside] = np.i0(beta * np.sqrt(1.0 - x[inside] ** 2)) / np.i0(beta)
    return w


def _resample_channel(
    x: np.ndarray, src: int, dst: int, taps: int, beta: float
) -> np.ndarray:
    n_out = len(x) * dst / src
    # round half up so the documented length formula holds exactly
    n_out = int(np.floor(n_out + 0.5))
    if n_out == 0:
        return np.zeros(0)
    # anti-aliasing cutoff relative to the source Nyquist
    fc = min(1.0, dst / src)
    half_width = taps / fc
    k_max = int(np.ceil(half_width))
    offsets = np.arange(-k_max, k_max + 1)
    padded = np.concatenate([np.zeros(k_max), x, np.zeros(k_max + 1)])
    out = np.empty(n_out)
    step = src / dst
    chunk = 2048
    for start in range(0, n_out, chunk):
        m = np.arange(start, min(start + chunk, n_out))
        pos = m * step
        base = np.floor(pos).astype(np.int64)
        u = base[:, None] + offsets[None, :] - pos[:, None]
        kernel = fc * np.sinc(fc * u) * _kaiser(u, half_width, beta)
        idx = base[:, None] + offsets[None, :] + k_max
        out[m] = np.sum(padded[idx] * kernel, axis=1)
    return out


def resample(buf: AudioBuffer, target_rate: int, taps: int = 64, beta: float = 8.6) -> AudioBuffer:
    """Windowed-sinc sample-rate conversion.

    Uses a Kaiser-windowed sinc kernel (beta 8.6, roughly -80 dB stopband)
    with `taps` zero crossings per side, stretched by the decimation factor
    when downsampling. Output length is round(n * target_rate / source_rate)
    per channel. Converting to the current rate returns an identical buffer.

    Args:
        buf: input audio.
        target_rate: desired rate in Hz, > 0.
        taps: sinc zero crossings kept on each side of the kernel center.
        beta: Kaiser window shape parameter.
    """
    if int(target_rate) <= 0:
        raise ValueError("target_rate must be positive")
    target_rate = int(target_rate)
    if target_rate == buf.sample_rate:
        return AudioBuffer(
            [c.copy() for c in buf.channels], buf.sample_rate, buf.source_path
        )
    channels = [
        _resample_channel(c, buf.sample_rate, target_rate, taps, beta)
        for c in buf.channels
    ]
    return AudioBuffer(channels, target_rate, buf.source_path)


def align_pair(
    ref: AudioBuffer,
    test: AudioBuffer,
    policy: str = "strict",
    warn: list | None = None,
) -> tuple[AudioBuffer, AudioBuffer]:
    """Validate and align a reference/test pair.

    strict: lengths must match exactly. truncate: both buffers are cut to
    the shorter length and a warning is recorded. Sample rates must always
    match. Warnings go to `warn` when a list is passed, otherwise through
    the warnings module.
    """
    if policy not in ("strict", "truncate"):
        raise ValueError(f"unknown align policy {policy!r}")
    if ref.sample_rate != test.sample_rate:
        raise SampleRateMismatchError(
            f"sample rates differ: {ref.sample_rate} vs {test.sample_rate}"
        )
    if ref.n_samples == test.n_samples:
        return ref, test
    if policy == "strict":
        raise LengthMismatchError(
            f"lengths differ under strict alignment: "
            f"{ref.n_samples} vs {test.n_samples}"
        )
    n = min(ref.n_samples, test.n_samples)
    message = (
        f"length mismatch ({ref.n_samples} vs {test.n_samples}): "
        f"truncated both to {n} samples"
    )
    if warn is not None:
        warn.append(message)
    else:
        warnings.warn(message, AquaKitWarning)
    ref_cut = AudioBuffer([c[:n] for c in ref.channels], ref.sample_rate, ref.source_path)
    test_cut = AudioBuffer(
        [c[:n] for c in test.channels], test.sample_rate, test.source_path
    )
    return ref_cut, test_cut
