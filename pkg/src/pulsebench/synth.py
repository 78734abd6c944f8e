"""Synthetic recordings with known ground-truth pulse.

The pixel model is multiplicative around a per-channel baseline:

    value_c(t) = baseline_c * (1 + pulse_amplitude * signature_c * p(t)
                                 + illum_amplitude * m(t))

with p a unit-amplitude pulse waveform at the configured heart rate and m a
low-frequency common-mode sinusoid.  Full videos add independent per-pixel
Gaussian noise on top and clip to [0, 1].  Everything is deterministic given
the seed: noise uses the counter-based Philox generator, and the noise of
frame k is drawn from the substream keyed seed XOR k, so frames can be
generated independently and in parallel.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid
from .ingestion import FrameSequence, RecordingManifest, RgbTrace, write_frames_bin
from .methods import SKIN_PULSE_SIGNATURE, PbvSignature

PULSE_SHAPES = ("sine", "harmonic")
# second-harmonic weight and phase of the asymmetric pulse shape
_HARMONIC_WEIGHT = 0.35
_HARMONIC_PHASE = 1.2


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of one synthetic recording."""
    seed: int = 0
    duration_s: float = 20.0
    fps: float = 30.0
    hr_bpm: float | tuple = 72.0  # scalar, or (start, end) for a linear ramp
    pulse_signature: PbvSignature = SKIN_PULSE_SIGNATURE
    pulse_amplitude: float = 0.005
    baseline_rgb: tuple = (0.6, 0.45, 0.35)
    illum_amplitude: float = 0.0
    illum_freq_hz: float = 0.3
    noise_std: float = 0.0
    frame_size: tuple = (64, 64)
    pulse_shape: str = "sine"

    def hr_endpoints(self) -> tuple:
        if isinstance(self.hr_bpm, (int, float)):
            return (float(self.hr_bpm), float(self.hr_bpm))
        start, end = self.hr_bpm
        return (float(start), float(end))

    def validate(self) -> None:
        start, end = self.hr_endpoints()
        for hr in (start, end):
            if not 45.0 <= hr <= 150.0:
                raise ConfigInvalid(f"hr_bpm {hr} outside [45, 150]")
        if self.fps < 15.0:
            raise ConfigInvalid(f"fps {self.fps} below 15")
        if self.duration_s < 8.0:
            raise ConfigInvalid(f"duration_s {self.duration_s} below 8")
        if not 0.0 < self.illum_freq_hz < self.fps / 2.0:
            raise ConfigInvalid(
                f"illum_freq_hz {self.illum_freq_hz} outside (0, fps/2)")
        if self.noise_std < 0.0:
            raise ConfigInvalid(f"noise_std {self.noise_std} negative")
        if self.pulse_shape not in PULSE_SHAPES:
            raise ConfigInvalid(f"pulse_shape must be one of {PULSE_SHAPES}")
        h, w = self.frame_size
        if h < 1 or w < 1:
            raise ConfigInvalid(f"frame_size {self.frame_size} not positive")
        sig = self.pulse_signature.as_array()
        for c, base in enumerate(self.baseline_rgb):
            if not 0.0 < base < 1.0:
                raise ConfigInvalid(f"baseline_rgb[{c}] = {base} outside (0, 1)")
            swing = self.pulse_amplitude * sig[c] + self.illum_amplitude
            if base * (1.0 + swing) > 1.0 or base * (1.0 - swing) < 0.0:
                raise ConfigInvalid(
                    f"channel {c}: amplitudes push pixels outside [0, 1]")


def _pulse_waveform(config: SynthConfig, t: np.ndarray) -> np.ndarray:
    """Unit-amplitude pulse at the configured (possibly ramped) heart rate."""
    start, end = config.hr_endpoints()
    f0, f1 = start / 60.0, end / 60.0
    total = t[-1] if len(t) > 1 and t[-1] > 0 else 1.0
    phase = 2.0 * np.pi * (f0 * t + (f1 - f0) * t ** 2 / (2.0 * total))
    if config.pulse_shape == "sine":
        p = np.sin(phase)
    else:
        p = np.sin(phase) + _HARMONIC_WEIGHT * np.sin(2.0 * phase + _HARMONIC_PHASE)
    peak = np.abs(p).max()
    return p / peak if peak > 0 else p


def synth_trace(config: SynthConfig):
    """Generate (RgbTrace, ground-truth PPG, true HR in BPM), noiseless."""
    config.validate()
    n = int(round(config.duration_s * config.fps))
    t = np.arange(n) / config.fps
    p = _pulse_waveform(config, t)
    m = np.sin(2.0 * np.pi * config.illum_freq_hz * t)
    sig = config.pulse_signature.as_array()
    channels = []
    for c, base in enumerate(config.baseline_rgb):
        channels.append(base * (1.0 + config.pulse_amplitude * sig[c] * p
                                + config.illum_amplitude * m))
    trace = RgbTrace(r=channels[0], g=channels[1], b=channels[2], fps=config.fps)
    start, end = config.hr_endpoints()
    return trace, p, (start + end) / 2.0


def synth_video(config: SynthConfig) -> FrameSequence:
    """Full frame sequence: the trace model per pixel plus per-pixel noise."""
    config.validate()
    trace, _, _ = synth_trace(config)
    h, w = config.frame_size
    n = trace.n
    clean = np.stack([trace.r, trace.g, trace.b], axis=-1)  # (n, 3)
    data = np.broadcast_to(clean[:, None, None, :], (n, h, w, 3)).astype(np.float32)
    if config.noise_std > 0:
        data = data.copy()
        for k in range(n):
            rng = np.random.Generator(np.random.Philox(key=config.seed ^ k))
            data[k] += rng.normal(0.0, config.noise_std, (h, w, 3)).astype(np.float32)
        np.clip(data, 0.0, 1.0, out=data)
    else:
        data = np.array(data)
    return FrameSequence(data=data, fps=config.fps)


def write_recording(config: SynthConfig, directory, recording_id: str) -> Path:
    """Emit frames.bin + labels.csv + manifest.json; returns the manifest path.

    The layout is the generic on-disk recording format, so synthetic data
    loads through the same path as real recordings.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    frames = synth_video(config)
    _, ppg, _ = synth_trace(config)

    frames_path = directory / "frames.bin"
    write_frames_bin(frames_path, frames.data)

    labels_path = directory / "labels.csv"
    with open(labels_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["ppg"])
        for v in ppg:
            writer.writerow([f"{v:.17g}"])  # round-trips float64 exactly

    manifest = RecordingManifest(id=recording_id, frames_path=frames_path,
                                 labels_path=labels_path, fps=config.fps,
                                 label_rate=config.fps, dataset_kind="synthetic")
    manifest_path = directory / "manifest.json"
    manifest.to_json_file(manifest_path)
    return manifest_path
