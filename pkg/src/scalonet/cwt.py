"""Continuous wavelet transform with an analytic Morlet mother wavelet.

Two paths compute the same quantity:

* ``cwt_direct`` is the O(scales * n^2) quadrature reference: for each
  (a, b) it sums f[t] * (1/a) * conj(psi((t-b)/a)) * dt over every sample.
* ``cwt_fast`` evaluates the identical sums per scale through a
  zero-padded FFT, so both paths share the zero-extension boundary
  policy and agree to floating-point roundoff.

Scales are measured in samples. The printed normalization is 1/a; a
switch exposes the conventional 1/sqrt(a).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from scalonet import kernels
from scalonet.dataset import Signal
from scalonet.errors import DataError

NORM_L1 = "1/a"
NORM_L2 = "1/sqrt(a)"


@dataclass(frozen=True)
class Wavelet:
    """Analytic Morlet: psi(u) = pi^(-1/4) * exp(i*omega0*u) * exp(-u^2/2)."""

    omega0: float = 6.0

    def __post_init__(self):
        if self.omega0 < 5.0:
            raise DataError("omega0 must be >= 5 for the analytic Morlet approximation")


def wavelet_eval(t, w: Wavelet = Wavelet()):
    """Evaluate psi at (array of) dimensionless time t."""
    t = np.asarray(t, dtype=np.float64)
    return np.pi ** -0.25 * np.exp(1j * w.omega0 * t) * np.exp(-0.5 * t * t)


@dataclass(frozen=True)
class ScaleGrid:
    """Log-spaced scales with a fixed ratio of 2^(1/voices) between neighbors."""

    scales: np.ndarray
    voices_per_octave: int

    def __post_init__(self):
        object.__setattr__(self, "scales", np.asarray(self.scales, dtype=np.float64))
        s = self.scales
        if s.ndim != 1 or s.size == 0 or np.any(s <= 0):
            raise DataError("scales must be a non-empty positive sequence")
        if s.size > 1:
            ratios = s[1:] / s[:-1]
            target = 2.0 ** (1.0 / self.voices_per_octave)
            if np.any(ratios <= 1.0) or np.any(np.abs(ratios - target) > 1e-12):
                raise DataError("scale ratios must equal 2^(1/voices) and increase")

    def __len__(self):
        return self.scales.size

    @property
    def min_scale(self) -> float:
        return float(self.scales[0])

    @property
    def max_scale(self) -> float:
        return float(self.scales[-1])

    @classmethod
    def from_range(cls, min_scale: float, max_scale: float, voices: int) -> "ScaleGrid":
        if voices < 1:
            raise DataError("voices must be >= 1")
        if not 0 < min_scale <= max_scale:
            raise DataError("need 0 < min_scale <= max_scale")
        count = int(np.floor(voices * np.log2(max_scale / min_scale) + 1e-9)) + 1
        return cls.from_count(min_scale, count, voices)

    @classmethod
    def from_count(cls, min_scale: float, count: int, voices: int) -> "ScaleGrid":
        k = np.arange(count, dtype=np.float64)
        return cls(min_scale * 2.0 ** (k / voices), voices)


def default_scales(n: int, fs: float, voices: int = 12) -> ScaleGrid:
    """Default grid: [2, n/8] samples, log-spaced at 2^(1/voices)."""
    if n < 64:
        raise DataError(f"n too short for a scale grid: {n} < 64")
    if voices < 1:
        raise DataError("voices must be >= 1")
    return ScaleGrid.from_range(2.0, n / 8.0, voices)


@dataclass
class CwtCoefficients:
    """C(a, b): rows follow the scale grid, columns the analyzed positions.

    With col_stride == 1 there is one column per sample; a render-time
    decimation may keep every col_stride-th position instead.
    """

    values: np.ndarray
    scales: ScaleGrid
    fs: float
    col_stride: int = 1
    n_samples: int = field(default=0)

    def __post_init__(self):
        if self.n_samples == 0:
            self.n_samples = self.values.shape[1] * self.col_stride
        if self.values.ndim != 2 or self.values.shape[0] != len(self.scales):
            raise DataError("coefficient rows must match the scale grid")
        expected = -(-self.n_samples // self.col_stride)
        if self.values.shape[1] != expected:
            raise DataError("coefficient columns must cover the analyzed positions")
        if not np.all(np.isfinite(self.values)):
            raise DataError("coefficients contain non-finite entries")


def _norm_factors(scales: np.ndarray, dt: float, norm: str) -> np.ndarray:
    if norm == NORM_L1:
        return dt / scales
    if norm == NORM_L2:
        return dt / np.sqrt(scales)
    raise DataError(f"unknown normalization {norm!r}")


def cwt_direct(s: Signal, grid: ScaleGrid, w: Wavelet = Wavelet(), norm: str = NORM_L1) -> CwtCoefficients:
    """Reference quadrature over the zero-extended signal."""
    f = np.asarray(s.samples, dtype=np.float64)
    if f.size < 2:
        raise DataError("signal too short for a transform")
    factors = _norm_factors(grid.scales, 1.0 / s.fs, norm)
    values = kernels.cwt_direct_rows(f, grid.scales, factors, w.omega0, f.size)
    return CwtCoefficients(values, grid, s.fs)


def _fft_length(minimum: int) -> int:
    """Smallest 7-smooth integer >= minimum (keeps pocketfft on fast radices)."""
    n = int(minimum)
    while True:
        m = n
        for p in (2, 3, 5, 7):
            while m % p == 0:
                m //= p
        if m == 1:
            return n
        n += 1


def _scale_spectrum(a: float, omega: np.ndarray, factor: float, omega0: float) -> np.ndarray:
    """DTFT of the sampled, normalized wavelet at scale a.

    The sampled sequence h[m] = factor * psi(m/a) has spectrum
    factor * a * psihat(a*w) periodized over 2*pi; the alias sum matters
    near the smallest scales where the passband sits close to Nyquist.
    """
    coef = factor * a * (np.pi ** -0.25) * np.sqrt(2.0 * np.pi)
    acc = np.zeros_like(omega)
    for k in range(-2, 3):
        xi = a * (omega + 2.0 * np.pi * k) - omega0
        acc += np.exp(-0.5 * xi * xi)
    return coef * acc


def cwt_fast(
    s: Signal,
    grid: ScaleGrid,
    w: Wavelet = Wavelet(),
    norm: str = NORM_L1,
    col_stride: int = 1,
) -> CwtCoefficients:
    """Per-scale frequency-domain evaluation of the same zero-extended sums.

    The FFT length is padded past the largest wavelet support so no
    circular wrap reaches the analyzed window.
    """
    f = np.asarray(s.samples, dtype=np.float64)
    n = f.size
    if n < 2:
        raise DataError("signal too short for a transform")
    if col_stride < 1:
        raise DataError("col_stride must be >= 1")
    factors = _norm_factors(grid.scales, 1.0 / s.fs, norm)
    pad = int(np.ceil(8.0 * grid.max_scale))
    length = _fft_length(n + pad)
    spectrum = np.fft.fft(f, length)
    omega = 2.0 * np.pi * np.fft.fftfreq(length)
    n_cols = -(-n // col_stride)
    values = np.empty((len(grid), n_cols), dtype=np.complex128)
    for si, a in enumerate(grid.scales):
        h = _scale_spectrum(float(a), omega, float(factors[si]), w.omega0)
        row = np.fft.ifft(spectrum * h)
        values[si] = row[: n : col_stride]
    return CwtCoefficients(values, grid, s.fs, col_stride=col_stride, n_samples=n)


def magnitude(c: CwtCoefficients) -> np.ndarray:
    """Element-wise |C(a, b)|."""
    return np.abs(c.values)


_DUMP_HEADER = struct.Struct("<IId")


def write_coefficients(c: CwtCoefficients, path):
    """Debug dump: header (num_scales u32, num_cols u32, fs f64), then
    row-major interleaved real/imag float64 little-endian."""
    data = np.ascontiguousarray(c.values.astype("<c16"))
    header = _DUMP_HEADER.pack(c.values.shape[0], c.values.shape[1], c.fs)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_coefficients(path):
    """Read a debug dump back as (values, fs)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _DUMP_HEADER.size:
        raise DataError(f"coefficient dump {path} is truncated")
    rows, cols, fs = _DUMP_HEADER.unpack_from(raw)
    expected = _DUMP_HEADER.size + rows * cols * 16
    if len(raw) != expected:
        raise DataError(f"coefficient dump {path} has wrong size")
    values = np.frombuffer(raw, dtype="<c16", offset=_DUMP_HEADER.size).reshape(rows, cols)
    return values.copy(), fs
