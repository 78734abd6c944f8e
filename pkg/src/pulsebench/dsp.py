"""Waveform postprocessing: detrending, zero-phase bandpass, spectra, HR extraction.

Every recovered pulse waveform and every gold-standard label goes through the
same chain here (detrend -> bandpass -> spectral peak), so predicted and
reference heart rates are always computed by identical code.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import signal as _signal
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .errors import EmptyBand, InvalidBand, TooShort

DEFAULT_LOW_HZ = 0.75
DEFAULT_HIGH_HZ = 2.5
DEFAULT_ORDER = 2
DEFAULT_PAD_FACTOR = 8
DEFAULT_DETREND_LAMBDA = 100.0

# HR search band is locked to the filter band: 0.75 Hz = 45 BPM, 2.5 Hz = 150 BPM.
BAND_LOW_BPM = 45.0
BAND_HIGH_BPM = 150.0


@dataclass(frozen=True)
class PostprocessConfig:
    """Settings for the shared postprocessing chain.

    Field names mirror the config keys: filter.low_hz, filter.high_hz,
    filter.order, detrend.enabled, detrend.lambda, hr.pad_factor.
    """
    low_hz: float = DEFAULT_LOW_HZ
    high_hz: float = DEFAULT_HIGH_HZ
    order: int = DEFAULT_ORDER
    detrend_enabled: bool = True
    detrend_lambda: float = DEFAULT_DETREND_LAMBDA
    pad_factor: int = DEFAULT_PAD_FACTOR


@dataclass(frozen=True)
class BiquadCascade:
    """Cascaded second-order sections of a discretized bandpass filter.

    Each section is (b0, b1, b2, a1, a2) with a0 normalized to 1.  Sections
    are validated at construction: all poles strictly inside the unit circle
    and gain at the geometric center frequency within [0.7, 1.0].
    """
    sections: tuple
    order: int
    low_hz: float
    high_hz: float
    fs: float

    def __post_init__(self):
        for b0, b1, b2, a1, a2 in self.sections:
            poles = np.roots([1.0, a1, a2])
            if np.any(np.abs(poles) >= 1.0):
                raise InvalidBand(
                    f"unstable section for band ({self.low_hz}, {self.high_hz}) at fs={self.fs}")
        center = float(np.sqrt(self.low_hz * self.high_hz))
        g = self.magnitude(center)
        if not (0.7 <= g <= 1.0 + 1e-9):
            raise InvalidBand(f"center gain {g:.4f} outside [0.7, 1.0]")

    @property
    def sos(self) -> np.ndarray:
        """Sections in scipy's (n, 6) second-order-section layout."""
        return np.array([[b0, b1, b2, 1.0, a1, a2]
                         for b0, b1, b2, a1, a2 in self.sections])

    def magnitude(self, freq_hz: float) -> float:
        """|H| at freq_hz, evaluated directly on the unit circle."""
        z = np.exp(2j * np.pi * freq_hz / self.fs)
        h = 1.0 + 0.0j
        for b0, b1, b2, a1, a2 in self.sections:
            h *= (b0 + b1 / z + b2 / z ** 2) / (1.0 + a1 / z + a2 / z ** 2)
        return float(np.abs(h))


@dataclass(frozen=True)
class Spectrum:
    """One-sided power spectrum; freqs[k] = k * fs / nfft."""
    freqs: np.ndarray
    power: np.ndarray
    nfft: int
    fs: float

    @property
    def resolution_hz(self) -> float:
        return self.fs / self.nfft


@dataclass(frozen=True)
class HrEstimate:
    """Heart rate in beats/min located inside the search band."""
    bpm: float
    band_low_bpm: float = BAND_LOW_BPM
    band_high_bpm: float = BAND_HIGH_BPM
    method: str | None = None
    source: str = "prediction"


@lru_cache(maxsize=64)
def design_bandpass(low_hz: float = DEFAULT_LOW_HZ, high_hz: float = DEFAULT_HIGH_HZ,
                    order: int = DEFAULT_ORDER, fs: float = 30.0) -> BiquadCascade:
    """Design a Butterworth bandpass as cascaded biquads.

    An analog prototype of the given order is bandpass-transformed (transfer
    order 2*order) and discretized by the bilinear transform with frequency
    prewarping.  Results are cached per (low, high, order, fs).
    """
    if not (0.0 < low_hz < high_hz < fs / 2.0):
        raise InvalidBand(
            f"need 0 < low < high < fs/2, got ({low_hz}, {high_hz}) at fs={fs}")
    if order < 1:
        raise InvalidBand(f"order must be >= 1, got {order}")
    sos = _signal.butter(order, [low_hz, high_hz], btype="bandpass",
                         output="sos", fs=fs)
    sections = tuple((float(b0 / a0), float(b1 / a0), float(b2 / a0),
                      float(a1 / a0), float(a2 / a0))
                     for b0, b1, b2, a0, a1, a2 in sos)
    return BiquadCascade(sections=sections, order=order,
                         low_hz=low_hz, high_hz=high_hz, fs=fs)


def filtfilt(cascade: BiquadCascade, x: np.ndarray) -> np.ndarray:
    """Zero-phase application: forward pass, reverse, forward pass, reverse.

    Edges are handled by odd-reflection padding of length 3 * (2 * order).
    Output length equals input length.
    """
    x = np.asarray(x, dtype=np.float64)
    padlen = 3 * (2 * cascade.order)
    if x.shape[0] <= padlen:
        raise TooShort(f"need more than {padlen} samples, got {x.shape[0]}")
    return _signal.sosfiltfilt(cascade.sos, x, padtype="odd", padlen=padlen)


def detrend(x: np.ndarray, lam: float = DEFAULT_DETREND_LAMBDA) -> np.ndarray:
    """Remove the smoothness-priors trend (Tarvainen et al. 2002).

    The trend solves (I + lam^2 * D2' D2) trend = x with D2 the (N-2) x N
    second-difference operator; the detrended signal is x - trend.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n < 3:
        raise TooShort(f"need at least 3 samples, got {n}")
    ones = np.ones(n)
    d2 = sparse.spdiags([ones, -2.0 * ones, ones], [0, 1, 2], n - 2, n)
    a = (sparse.eye(n) + (lam ** 2) * (d2.T @ d2)).tocsc()
    trend = spsolve(a, x)
    return x - trend


def periodogram(x: np.ndarray, fs: float,
                pad_factor: int = DEFAULT_PAD_FACTOR) -> Spectrum:
    """Zero-padded FFT power spectrum of the mean-removed signal.

    nfft is the next power of two >= pad_factor * N; power[k] = |X[k]|^2 for
    k <= nfft/2.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n < 8:
        raise TooShort(f"need at least 8 samples, got {n}")
    nfft = 1
    while nfft < pad_factor * n:
        nfft *= 2
    spec = np.fft.rfft(x - x.mean(), nfft)
    power = np.abs(spec) ** 2
    freqs = np.arange(power.shape[0]) * fs / nfft
    return Spectrum(freqs=freqs, power=power, nfft=nfft, fs=fs)


def estimate_hr(x: np.ndarray, fs: float,
                band_hz: tuple = (DEFAULT_LOW_HZ, DEFAULT_HIGH_HZ),
                pad_factor: int = DEFAULT_PAD_FACTOR,
                method: str | None = None,
                source: str = "prediction") -> HrEstimate:
    """Heart rate = 60 * argmax of spectral power inside the search band."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 8 * fs:
        raise TooShort(f"need at least {int(np.ceil(8 * fs))} samples "
                       f"(8 s at fs={fs}), got {x.shape[0]}")
    spec = periodogram(x, fs, pad_factor)
    mask = (spec.freqs >= band_hz[0]) & (spec.freqs <= band_hz[1])
    if not np.any(mask):
        raise EmptyBand(f"no spectral bin inside {band_hz} Hz")
    band_freqs = spec.freqs[mask]
    band_power = spec.power[mask]
    bpm = 60.0 * float(band_freqs[np.argmax(band_power)])
    return HrEstimate(bpm=bpm, band_low_bpm=60.0 * band_hz[0],
                      band_high_bpm=60.0 * band_hz[1],
                      method=method, source=source)


def hr_from_waveform(x: np.ndarray, fs: float,
                     config: PostprocessConfig = PostprocessConfig(),
                     method: str | None = None,
                     source: str = "prediction") -> HrEstimate:
    """The canonical chain: detrend (if enabled) -> bandpass -> estimate_hr.

    Predictions and gold-standard labels both come through here, which keeps
    the two heart-rate procedures bit-for-bit identical.
    """
    y = np.asarray(x, dtype=np.float64)
    if config.detrend_enabled:
        y = detrend(y, config.detrend_lambda)
    cascade = design_bandpass(config.low_hz, config.high_hz, config.order, fs)
    y = filtfilt(cascade, y)
    return estimate_hr(y, fs, band_hz=(config.low_hz, config.high_hz),
                       pad_factor=config.pad_factor, method=method, source=source)
