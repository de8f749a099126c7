"""Embedding ingestion and distribution distances.

Loads embedding sets from CSV or npy files, extracts a deterministic
log-mel baseline embedding from audio, fits Gaussians, and computes the
Frechet audio distance and polynomial-kernel MMD^2 between sets.
"""

import ast
import csv
import struct
from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer
from .errors import (
    DimensionMismatchError,
    EmbeddingFormatError,
    EmbeddingInputError,
    InsufficientSamplesError,
    NotPsdError,
    NotSymmetricError,
)
from .spectral import mel_filterbank, mel_spectrogram, stft

_NPY_MAGIC = b"\x93NUMPY"


@dataclass
class EmbeddingSet:
    """An n x d matrix of embedding vectors, one row per audio window."""

    vectors: np.ndarray
    label: str | None = None

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise EmbeddingFormatError("embedding set must be a 2-D matrix")
        if self.vectors.shape[0] < 1 or self.vectors.shape[1] < 1:
            raise EmbeddingFormatError("embedding set must be non-empty")

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class GaussianStats:
    """Fitted mean and covariance of an embedding cloud."""

    mean: np.ndarray
    cov: np.ndarray
    n: int

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).ravel()
        self.cov = np.asarray(self.cov, dtype=np.float64)
        d = len(self.mean)
        if self.cov.shape != (d, d):
            raise DimensionMismatchError(
                f"covariance shape {self.cov.shape} does not match dim {d}"
            )
        if np.max(np.abs(self.cov - self.cov.T)) > 1e-9:
            raise NotSymmetricError("covariance must be symmetric within 1e-9")

    @property
    def dim(self) -> int:
        return len(self.mean)


def _load_csv(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise EmbeddingFormatError(f"{path}: row {i}: {exc}") from None
            if len(rows[-1]) != len(rows[0]):
                raise EmbeddingFormatError(
                    f"{path}: ragged row {i}: {len(rows[-1])} values, expected {len(rows[0])}"
                )
    if not rows:
        raise EmbeddingFormatError(f"{path}: no rows")
    return np.asarray(rows, dtype=np.float64)


def _load_npy(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 10 or blob[:6] != _NPY_MAGIC:
        raise EmbeddingFormatError(f"{path}: missing npy magic bytes")
    major, minor = blob[6], blob[7]
    if (major, minor) != (1, 0):
        raise EmbeddingFormatError(f"{path}: unsupported npy version {major}.{minor}")
    (header_len,) = struct.unpack("<H", blob[8:10])
    header_end = 10 + header_len
    if len(blob) < header_end:
        raise EmbeddingFormatError(f"{path}: truncated npy header")
    try:
        header = ast.literal_eval(blob[10:header_end].decode("ascii"))
    except (ValueError, SyntaxError, UnicodeDecodeError):
        raise EmbeddingFormatError(f"{path}: unparseable npy header") from None
    descr = header.get("descr")
    if descr not in ("<f4", "<f8"):
        raise EmbeddingFormatError(
            f"{path}: unsupported dtype {descr!r}, need little-endian float32/float64"
        )
    if header.get("fortran_order"):
        raise EmbeddingFormatError(f"{path}: fortran_order arrays not supported")
    shape = header.get("shape")
    if not isinstance(shape, tuple) or len(shape) != 2:
        raise EmbeddingFormatError(f"{path}: need a 2-D array, got shape {shape}")
    itemsize = 4 if descr == "<f4" else 8
    expected = shape[0] * shape[1] * itemsize
    data = blob[header_end:]
    if len(data) != expected:
        raise EmbeddingFormatError(
            f"{path}: payload is {len(data)} bytes, expected {expected}"
        )
    return np.frombuffer(data, dtype=descr).reshape(shape).astype(np.float64)


def load_embeddings(path, format: str = "csv") -> EmbeddingSet:
    """Load an embedding set from a CSV or npy (v1.0 container) file.

    CSV: one vector per row, no header, decimal floats, rectangular.
    npy: little-endian float32/float64, C order, 2-D.
    """
    if format == "csv":
        vectors = _load_csv(path)
    elif format == "npy":
        vectors = _load_npy(path)
    else:
        raise EmbeddingFormatError(f"unknown embedding format {format!r}")
    return EmbeddingSet(vectors=vectors, label=str(path))


def baseline_embedding(
    buf: AudioBuffer,
    frame_size: int = 2048,
    hop: int = 512,
    n_mels: int = 64,
    window_seconds: float = 1.0,
    window_hop_seconds: float = 0.5,
) -> EmbeddingSet:
    """Deterministic log-mel statistics embedding.

    Per 1 s window (hop 0.5 s): the mean and standard deviation of the
    window's log-mel frames are concatenated into one 128-dimensional
    vector. Fully specified so two runs produce bit-identical sets.

    Raises:
        EmbeddingInputError: non-mono input or audio shorter than one window.
    """
    if buf.n_channels != 1:
        raise EmbeddingInputError("baseline embedding expects mono audio; downmix first")
    window = int(round(buf.sample_rate * window_seconds))
    window_hop = int(round(buf.sample_rate * window_hop_seconds))
    if window < frame_size:
        raise EmbeddingInputError(
            f"analysis window ({window} samples) shorter than one frame ({frame_size})"
        )
    samples = buf.channels[0]
    if len(samples) < window:
        raise EmbeddingInputError(
            f"audio is {len(samples)} samples, need at least one {window}-sample window"
        )
    fb = mel_filterbank(buf.sample_rate, frame_size, n_mels=n_mels)
    vectors = []
    for start in range(0, len(samples) - window + 1, window_hop):
        chunk = samples[start : start + window]
        logmel = mel_spectrogram(
            stft(chunk, buf.sample_rate, frame_size, hop).power(), fb, log=True
        )
        vectors.append(
            np.concatenate([logmel.mean(axis=0), logmel.std(axis=0)])
        )
    return EmbeddingSet(vectors=np.asarray(vectors), label=buf.source_path)


def estimate_gaussian(embeddings: EmbeddingSet) -> GaussianStats:
    """Fit mean and unbiased covariance (n-1 divisor) to an embedding set."""
    if embeddings.n < 2:
        raise InsufficientSamplesError(
            f"need at least 2 vectors to fit a covariance, got {embeddings.n}"
        )
    x = embeddings.vectors
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (embeddings.n - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianStats(mean=mean, cov=cov, n=embeddings.n)


def sqrt_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric square root of a positive semidefinite matrix.

    Eigendecomposition with negative eigenvalues clamped to zero. Inputs
    must be symmetric within 1e-9; eigenvalues below a -1e-6 gate
    (relative to the largest magnitude) raise NotPsdError.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSymmetricError("sqrt_psd needs a square matrix")
    if np.max(np.abs(m - m.T)) > 1e-9:
        raise NotSymmetricError("matrix is not symmetric within 1e-9")
    eigval, eigvec = np.linalg.eigh(m)
    gate = -1e-6 * max(1.0, float(np.max(np.abs(eigval))))
    if np.any(eigval < gate):
        raise NotPsdError(f"eigenvalue {eigval.min():.3e} below the PSD gate")
    root = eigvec @ np.diag(np.sqrt(np.clip(eigval, 0.0, None))) @ eigvec.T
    return (root + root.T) / 2.0


def frechet_audio_distance(
    r: GaussianStats, t: GaussianStats, eps: float | None = None
) -> float:
    """Frechet distance between two Gaussians over embeddings.

    ||mu_r - mu_t||^2 + Tr(C_r + C_t - 2*(C_r C_t)^{1/2}), with the cross
    term computed as sqrt_psd(S C_t S) for S = sqrt_psd(C_r) so all
    numerics stay inside real symmetric eigensolves. Tiny negative totals
    from rounding are clamped to 0. When eps is given, eps*I is added to
    both covariances first.
    """
    if r.dim != t.dim:
        raise DimensionMismatchError(f"dimension mismatch: {r.dim} vs {t.dim}")
    cov_r = r.cov
    cov_t = t.cov
    if eps is not None:
        cov_r = cov_r + eps * np.eye(r.dim)
        cov_t = cov_t + eps * np.eye(t.dim)
    s = sqrt_psd(cov_r)
    inner = s @ cov_t @ s
    inner = (inner + inner.T) / 2.0
    cross = sqrt_psd(inner)
    diff = r.mean - t.mean
    value = float(diff @ diff + np.trace(cov_r) + np.trace(cov_t) - 2.0 * np.trace(cross))
    return max(value, 0.0)


def _poly_kernel(a: np.ndarray, b: np.ndarray, degree: int, gamma: float, coef: float):
    return (gamma * (a @ b.T) + coef) ** degree


def kernel_distance_mmd2(
    x: EmbeddingSet,
    y: EmbeddingSet,
    degree: int = 3,
    gamma: float | None = None,
    coef: float = 1.0,
    estimator: str = "biased",
) -> float:
    """MMD^2 between two embedding sets under a polynomial kernel.

    k(a, b) = (gamma * <a, b> + coef)^degree with gamma defaulting to 1/d.
    The biased estimator uses full within-set means; the unbiased one
    excludes the diagonals (n(n-1) divisor) and needs >= 2 vectors per set.
    """
    if x.dim != y.dim:
        raise DimensionMismatchError(f"dimension mismatch: {x.dim} vs {y.dim}")
    if estimator not in ("biased", "unbiased"):
        raise ValueError(f"unknown estimator {estimator!r}")
    if gamma is None:
        gamma = 1.0 / x.dim
    kxx = _poly_kernel(x.vectors, x.vectors, degree, gamma, coef)
    kyy = _poly_kernel(y.vectors, y.vectors, degree, gamma, coef)
    kxy = _poly_kernel(x.vectors, y.vectors, degree, gamma, coef)
    nx, ny = x.n, y.n
    if estimator == "biased":
        return float(kxx.mean() + kyy.mean() - 2.0 * kxy.mean())
    if nx < 2 or ny < 2:
        raise InsufficientSamplesError(
            "unbiased estimator needs at least 2 vectors per set"
        )
    term_x = (kxx.sum() - np.trace(kxx)) / (nx * (nx - 1))
    term_y = (kyy.sum() - np.trace(kyy)) / (ny * (ny - 1))
    return float(term_x + term_y - 2.0 * kxy.mean())
