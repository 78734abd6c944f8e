"""Unsupervised blood-volume-pulse recovery from spatially averaged RGB traces.

Six classic methods, each mapping an RgbTrace to a BvpSignal of the same
length: Green (Verkruysse et al. 2008), ICA (Poh et al. 2010, with JADE as
the separator), CHROM (de Haan & Jeanne 2013), POS (Wang et al. 2017),
PBV (de Haan & van Leest 2014) and LGI (Pilz et al. 2018).  All methods
normalize by channel means and standardize their output, so they are
invariant to uniform trace scaling.
"""

from dataclasses import dataclass

import numpy as np

from . import dsp
from .errors import DegenerateInput, TooShort, WindowTooLong
from .ingestion import RgbTrace, standardize
from .jade import jade_separate

METHOD_ORDER = ("green", "ica", "chrom", "pos", "pbv", "lgi")

# Relative threshold below which a residual is numerical round-off of an
# exact cancellation and must not be standardized up to unit variance.
_ZERO_REL = 1e-10


@dataclass(frozen=True)
class BvpSignal:
    """Recovered pulse waveform, one sample per input frame."""
    samples: np.ndarray
    fps: float
    method: str
    flags: tuple = ()

    def __post_init__(self):
        if not np.all(np.isfinite(self.samples)):
            raise DegenerateInput(f"{self.method}: non-finite output samples")


@dataclass(frozen=True)
class PbvSignature:
    """Relative R, G, B pulsatile amplitudes, unit norm, nonnegative."""
    vector: tuple

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64)
        if v.shape != (3,):
            raise DegenerateInput(f"signature must have 3 components, got {v.shape}")
        if np.any(v < 0):
            raise DegenerateInput(f"signature components must be >= 0: {v}")
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise DegenerateInput(f"signature must have unit norm: {v}")

    @classmethod
    def from_components(cls, r: float, g: float, b: float) -> "PbvSignature":
        v = np.array([r, g, b], dtype=np.float64)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise DegenerateInput("signature cannot be the zero vector")
        v = v / norm
        return cls(vector=(float(v[0]), float(v[1]), float(v[2])))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vector, dtype=np.float64)


# Typical relative pulsatile amplitudes of skin under white light
# (de Haan & van Leest 2014), normalized to unit norm.
SKIN_PULSE_SIGNATURE = PbvSignature.from_components(0.33, 0.77, 0.53)


@dataclass(frozen=True)
class PosConstants:
    """Projection rows orthogonal to (1, 1, 1) and the sliding-window span."""
    projection: tuple = ((0.0, 1.0, -1.0), (-2.0, 1.0, 1.0))
    window_seconds: float = 1.6

    def projection_matrix(self) -> np.ndarray:
        return np.asarray(self.projection, dtype=np.float64)


POS_CONSTANTS = PosConstants()


def green_bvp(trace: RgbTrace) -> BvpSignal:
    """Standardized green channel as the pulse proxy."""
    if trace.n < 2:
        raise TooShort(f"need at least 2 samples, got {trace.n}")
    return BvpSignal(samples=standardize(trace.g), fps=trace.fps, method="green")


def chrom_bvp(trace: RgbTrace, fs: float | None = None) -> BvpSignal:
    """Chrominance combination X = 3Rn - 2Gn, Y = 1.5Rn + Gn - 1.5Bn.

    Both components are bandpass-filtered, then combined as X - alpha * Y
    with alpha the ratio of their standard deviations, which cancels
    luminance variation common to all channels.
    """
    if fs is None:
        fs = trace.fps
    if trace.n < 3 * fs:
        raise TooShort(f"need at least {int(np.ceil(3 * fs))} samples, got {trace.n}")
    means = [trace.r.mean(), trace.g.mean(), trace.b.mean()]
    if any(m == 0 for m in means):
        raise DegenerateInput("a channel mean is zero")
    rn = trace.r / means[0]
    gn = trace.g / means[1]
    bn = trace.b / means[2]
    x = 3.0 * rn - 2.0 * gn
    y = 1.5 * rn + gn - 1.5 * bn
    cascade = dsp.design_bandpass(fs=fs)
    xf = dsp.filtfilt(cascade, x)
    yf = dsp.filtfilt(cascade, y)
    sy = yf.std()
    if sy == 0:
        return BvpSignal(samples=np.zeros(trace.n), fps=trace.fps,
                         method="chrom", flags=("zero_denominator",))
    s = xf - (xf.std() / sy) * yf
    # X, Y are in mean-normalized units (channel scale 1), so a combined std
    # below _ZERO_REL is round-off of an exact cancellation, not pulse.
    if s.std() <= _ZERO_REL:
        return BvpSignal(samples=np.zeros(trace.n), fps=trace.fps,
                         method="chrom", flags=("degenerate",))
    return BvpSignal(samples=standardize(s), fps=trace.fps, method="chrom")


def pos_bvp(trace: RgbTrace, fs: float | None = None) -> BvpSignal:
    """Plane-orthogonal-to-skin projection with 1.6 s sliding windows.

    Each unit-stride window is mean-normalized per channel, projected by
    [[0, 1, -1], [-2, 1, 1]], adaptively combined, mean-centered and
    overlap-added into the output, which is standardized at the end.
    """
    if fs is None:
        fs = trace.fps
    n = trace.n
    win = int(np.ceil(POS_CONSTANTS.window_seconds * fs))
    if win > n:
        raise WindowTooLong(f"window of {win} samples exceeds trace length {n}")
    X = trace.as_matrix()
    P = POS_CONSTANTS.projection_matrix()
    out = np.zeros(n)
    for end in range(win, n + 1):
        start = end - win
        window = X[:, start:end]
        mu = window.mean(axis=1, keepdims=True)
        cn = np.divide(window, mu, out=np.ones_like(window), where=mu != 0)
        s = P @ cn
        s2_std = s[1].std()
        if s2_std == 0:
            h = s[0]
        else:
            h = s[0] + (s[0].std() / s2_std) * s[1]
        out[start:end] += h - h.mean()
    # accumulations are in window-normalized units; below _ZERO_REL the
    # signal is round-off of an exact cancellation (constant or luminance input)
    if out.std() <= _ZERO_REL:
        return BvpSignal(samples=np.zeros(n), fps=trace.fps,
                         method="pos", flags=("degenerate",))
    return BvpSignal(samples=standardize(out), fps=trace.fps, method="pos")


def pbv_bvp(trace: RgbTrace, signature: PbvSignature | None = None) -> BvpSignal:
    """Signature-directed inversion of the normalized trace.

    With Cn the mean-normalized zero-mean channels and p the pulsatile
    color signature (derived from the data when not provided), solves
    (Cn Cn') w = p and returns the standardized w' Cn, which suppresses
    variation not matching the signature.
    """
    if trace.n < 3:
        raise TooShort(f"need at least 3 samples, got {trace.n}")
    X = trace.as_matrix()
    mu = X.mean(axis=1, keepdims=True)
    cn = np.divide(X, mu, out=np.zeros_like(X), where=mu != 0) - 1.0
    q = cn @ cn.T
    # rows of cn are in mean-normalized units; an RMS below _ZERO_REL means
    # a constant trace (round-off only), the fully singular case
    if np.sqrt(np.trace(q) / cn.size) <= _ZERO_REL:
        return BvpSignal(samples=np.zeros(trace.n), fps=trace.fps,
                         method="pbv", flags=("singular_covariance",))
    flags = ()
    if signature is None:
        p = cn.std(axis=1)
        p = p / np.linalg.norm(p)
    else:
        p = signature.as_array()
    if np.linalg.cond(q) > 1e12:
        q = q + (1e-9 * np.trace(q) / 3.0) * np.eye(3)
        flags = ("ridge_regularized",)
    w = np.linalg.solve(q, p)
    return BvpSignal(samples=standardize(w @ cn), fps=trace.fps,
                     method="pbv", flags=flags)


def lgi_bvp(trace: RgbTrace) -> BvpSignal:
    """Local group invariance: project out the dominant color direction.

    With u the first left singular vector of the raw 3 x N trace matrix,
    P = I - u u' removes the dominant direction (baseline color and any
    common-mode motion along it); the green row of P X is the pulse.
    """
    if trace.n < 3:
        raise TooShort(f"need at least 3 samples, got {trace.n}")
    X = trace.as_matrix()
    U, _, _ = np.linalg.svd(X, full_matrices=False)
    u = U[:, 0:1]
    F = (np.eye(3) - u @ u.T) @ X
    scale = np.sqrt((X ** 2).mean())
    if scale == 0 or np.sqrt((F[1] ** 2).mean()) <= _ZERO_REL * scale:
        # rank-1 input: the projector annihilates it exactly
        return BvpSignal(samples=np.zeros(trace.n), fps=trace.fps,
                         method="lgi", flags=("rank_deficient",))
    return BvpSignal(samples=standardize(F[1]), fps=trace.fps, method="lgi")


def ica_bvp(trace: RgbTrace, fs: float | None = None) -> BvpSignal:
    """JADE separation of the standardized channels, pulse picked by spectrum.

    The source with the largest periodogram peak inside 0.75-2.5 Hz is the
    pulse; its sign is fixed to correlate nonnegatively with the green
    channel.  Rank-deficient input (e.g. identical channels) falls back to
    the green method, flagged.
    """
    if fs is None:
        fs = trace.fps
    if trace.n < 5 * fs:
        raise TooShort(f"need at least {int(np.ceil(5 * fs))} samples, got {trace.n}")
    X = np.vstack([standardize(trace.r), standardize(trace.g), standardize(trace.b)])
    cov = X @ X.T / trace.n
    evals = np.linalg.eigvalsh(cov)
    if evals[-1] <= 0 or evals[0] < 1e-12 * evals[-1]:
        green = green_bvp(trace)
        return BvpSignal(samples=green.samples, fps=trace.fps,
                         method="ica", flags=("rank_deficient_fallback",))
    sources, _ = jade_separate(X)
    best = None
    best_peak = -np.inf
    for source in sources:
        spec = dsp.periodogram(source, fs)
        mask = (spec.freqs >= dsp.DEFAULT_LOW_HZ) & (spec.freqs <= dsp.DEFAULT_HIGH_HZ)
        peak = spec.power[mask].max() if np.any(mask) else -np.inf
        if peak > best_peak:
            best_peak = peak
            best = source
    out = standardize(best)
    green = X[1]
    if green.std() > 0 and out.std() > 0 and np.dot(out - out.mean(), green) < 0:
        out = -out
    return BvpSignal(samples=out, fps=trace.fps, method="ica")


_METHOD_FUNCS = {
    "green": lambda trace, signature=None: green_bvp(trace),
    "ica": lambda trace, signature=None: ica_bvp(trace),
    "chrom": lambda trace, signature=None: chrom_bvp(trace),
    "pos": lambda trace, signature=None: pos_bvp(trace),
    "pbv": lambda trace, signature=None: pbv_bvp(trace, signature),
    "lgi": lambda trace, signature=None: lgi_bvp(trace),
}


def recover_bvp(trace: RgbTrace, method: str,
                signature: PbvSignature | None = None) -> BvpSignal:
    """Dispatch by method name; `signature` only affects the pbv method."""
    if method not in _METHOD_FUNCS:
        raise DegenerateInput(
            f"unknown method {method!r}; choose from {METHOD_ORDER}")
    return _METHOD_FUNCS[method](trace, signature=signature)
