"""Recording ingestion: manifests, frame/label loading, traces, chunks, cache.

A recording is described by a small JSON manifest pointing at a frame source
(a directory of numbered PNGs or a raw ``frames.bin`` tensor) and a label
file whose layout depends on the dataset kind.  Frames are reduced to
spatially averaged RGB traces for the recovery methods, and to 6-channel
chunk tensors (3 difference-normalized + 3 standardized channels) for the
binary cache.
"""

import json
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (BadMagic, ConfigInvalid, CorruptFrame, EmptyRoi,
                     InsufficientCoverage, LabelParseError, MissingPath,
                     RateMismatch, RoiOutOfBounds, TooShort, TruncatedFile,
                     VersionMismatch)

DATASET_KINDS = ("ubfc", "pure", "scamps", "generic", "synthetic")
DEFAULT_CHUNK_LEN = 180

FRAMES_MAGIC = b"RPGF"
CHUNK_MAGIC = b"RPGC"
LABELS_MAGIC = b"RPGL"
FORMAT_VERSION = 1

MANIFEST_KEYS = {"id", "frames_path", "labels_path", "fps", "label_rate",
                 "dataset_kind", "roi"}


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecordingManifest:
    """One recording: where its frames and labels live and at what rates."""
    id: str
    frames_path: Path
    labels_path: Path
    fps: float
    label_rate: float
    dataset_kind: str = "generic"
    roi: tuple | None = None  # (x, y, w, h) in pixels

    def __post_init__(self):
        if not (self.fps > 0 and self.label_rate > 0):
            raise RateMismatch(
                f"fps and label_rate must be positive, got fps={self.fps}, "
                f"label_rate={self.label_rate}")
        if self.dataset_kind not in DATASET_KINDS:
            raise ConfigInvalid(f"unknown dataset_kind {self.dataset_kind!r}")
        if self.roi is not None:
            x, y, w, h = self.roi
            if w <= 0 or h <= 0:
                raise EmptyRoi(f"roi {self.roi} has zero area")
            if x < 0 or y < 0:
                raise RoiOutOfBounds(f"roi {self.roi} has negative origin")

    @classmethod
    def from_json_file(cls, path) -> "RecordingManifest":
        path = Path(path)
        if not path.exists():
            raise MissingPath(str(path))
        doc = json.loads(path.read_text())
        unknown = set(doc) - MANIFEST_KEYS
        if unknown:
            raise ConfigInvalid(f"unknown manifest keys {sorted(unknown)} in {path}")
        missing = (MANIFEST_KEYS - {"roi"}) - set(doc)
        if missing:
            raise ConfigInvalid(f"manifest {path} is missing keys {sorted(missing)}")
        roi = doc.get("roi")
        if roi is not None:
            roi = (int(roi["x"]), int(roi["y"]), int(roi["w"]), int(roi["h"]))
        base = path.parent
        return cls(id=str(doc["id"]),
                   frames_path=(base / doc["frames_path"]).resolve(),
                   labels_path=(base / doc["labels_path"]).resolve(),
                   fps=float(doc["fps"]), label_rate=float(doc["label_rate"]),
                   dataset_kind=str(doc["dataset_kind"]), roi=roi)

    def to_json_file(self, path) -> None:
        """Write the manifest; frame/label paths are stored relative to it."""
        path = Path(path)
        doc = {"id": self.id,
               "frames_path": _relative_or_absolute(self.frames_path, path.parent),
               "labels_path": _relative_or_absolute(self.labels_path, path.parent),
               "fps": self.fps, "label_rate": self.label_rate,
               "dataset_kind": self.dataset_kind}
        if self.roi is not None:
            x, y, w, h = self.roi
            doc["roi"] = {"x": x, "y": y, "w": w, "h": h}
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _relative_or_absolute(target: Path, base: Path) -> str:
    try:
        return str(Path(target).resolve().relative_to(Path(base).resolve()))
    except ValueError:
        return str(Path(target).resolve())


@dataclass(frozen=True)
class FrameSequence:
    """N x H x W x 3 array of color intensities in [0, 1]."""
    data: np.ndarray
    fps: float

    def __post_init__(self):
        if self.data.ndim != 4 or self.data.shape[-1] != 3:
            raise ConfigInvalid(f"frames must be (N, H, W, 3), got {self.data.shape}")
        if self.data.shape[0] < 2:
            raise TooShort("need at least 2 frames")
        if not self.fps > 0:
            raise RateMismatch(f"fps must be positive, got {self.fps}")

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class LabelSeries:
    """Gold-standard PPG samples at their native rate."""
    samples: np.ndarray
    rate: float

    def __post_init__(self):
        if self.samples.ndim != 1 or self.samples.shape[0] < 2:
            raise TooShort("need at least 2 label samples")
        if not self.rate > 0:
            raise RateMismatch(f"label rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class RgbTrace:
    """Per-frame spatial means of the three color channels."""
    r: np.ndarray
    g: np.ndarray
    b: np.ndarray
    fps: float

    def __post_init__(self):
        if not (len(self.r) == len(self.g) == len(self.b)):
            raise ConfigInvalid("channel traces differ in length")
        for name, chan in (("r", self.r), ("g", self.g), ("b", self.b)):
            if not np.all(np.isfinite(chan)):
                raise ConfigInvalid(f"non-finite values in {name} trace")
        if not self.fps > 0:
            raise RateMismatch(f"fps must be positive, got {self.fps}")

    @property
    def n(self) -> int:
        return len(self.g)

    def as_matrix(self) -> np.ndarray:
        """Channels stacked as a 3 x N matrix (rows r, g, b)."""
        return np.vstack([self.r, self.g, self.b])


@dataclass(frozen=True)
class VideoChunk:
    """Fixed-length 6-channel tensor: channels 0-2 difference-normalized,
    channels 3-5 standardized, both along time within the chunk."""
    data: np.ndarray
    source_id: str = ""
    chunk_index: int = 0

    def __post_init__(self):
        if self.data.ndim != 4 or self.data.shape[-1] != 6:
            raise ConfigInvalid(f"chunk must be (L, H, W, 6), got {self.data.shape}")
        if self.data.dtype != np.float32:
            raise ConfigInvalid(f"chunk payload must be float32, got {self.data.dtype}")

    @property
    def chunk_len(self) -> int:
        return self.data.shape[0]


# ---------------------------------------------------------------------------
# normalization primitives
# ---------------------------------------------------------------------------

def standardize(x: np.ndarray) -> np.ndarray:
    """(x - mean) / population std along the leading axis; zeros if std is 0.

    A std at the double-precision noise floor of the mean (constant input
    whose float mean does not round exactly) counts as zero.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 1:
        raise TooShort("cannot standardize an empty sequence")
    mean = x.mean(axis=0, keepdims=True)
    std = x.std(axis=0, keepdims=True)
    return np.divide(x - mean, std, out=np.zeros_like(x),
                     where=std > 1e-12 * np.abs(mean))


def diff_normalize(x: np.ndarray) -> np.ndarray:
    """Ratio of consecutive differences, std-normalized, length-preserving.

    d[k] = (x[k+1] - x[k]) / (x[k+1] + x[k]) with zero denominators mapped
    to 0, a trailing zero to preserve length, and the whole sequence divided
    by its population std along the leading axis (zeros if the std is 0).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 2:
        raise TooShort("need at least 2 samples to difference")
    num = x[1:] - x[:-1]
    den = x[1:] + x[:-1]
    d = np.divide(num, den, out=np.zeros_like(num), where=den != 0)
    d = np.concatenate([d, np.zeros_like(x[:1])], axis=0)
    std = d.std(axis=0, keepdims=True)
    return np.divide(d, std, out=np.zeros_like(d), where=std != 0)


def spatial_average(frames: FrameSequence, roi: tuple | None = None) -> RgbTrace:
    """Reduce each frame to its mean R, G, B over the region of interest."""
    n, height, width, _ = frames.data.shape
    if roi is None:
        block = frames.data
    else:
        x, y, w, h = roi
        if w <= 0 or h <= 0:
            raise EmptyRoi(f"roi {roi} has zero area")
        if x < 0 or y < 0 or x + w > width or y + h > height:
            raise RoiOutOfBounds(f"roi {roi} outside {width}x{height} frame")
        block = frames.data[:, y:y + h, x:x + w, :]
    means = block.mean(axis=(1, 2), dtype=np.float64)
    return RgbTrace(r=means[:, 0], g=means[:, 1], b=means[:, 2], fps=frames.fps)


def align_labels(labels: LabelSeries, fps: float, n_frames: int) -> np.ndarray:
    """Linearly interpolate label samples onto frame timestamps k / fps."""
    needed = n_frames / fps
    have = labels.samples.shape[0] / labels.rate
    if have < 0.95 * needed:
        raise InsufficientCoverage(
            f"labels span {have:.2f} s but frames need {needed:.2f} s")
    t_frames = np.arange(n_frames) / fps
    t_labels = np.arange(labels.samples.shape[0]) / labels.rate
    return np.interp(t_frames, t_labels, labels.samples)


def make_chunks(frames: FrameSequence, chunk_len: int = DEFAULT_CHUNK_LEN,
                source_id: str = "") -> list:
    """Split into floor(N / chunk_len) non-overlapping 6-channel chunks.

    The trailing remainder shorter than chunk_len is dropped.  Channels 0-2
    are per-pixel diff_normalize along time, channels 3-5 per-pixel
    standardize along time, both computed within the chunk.
    """
    if chunk_len < 2:
        raise ConfigInvalid(f"chunk_len must be >= 2, got {chunk_len}")
    n = frames.n_frames
    chunks = []
    for k in range(n // chunk_len):
        raw = frames.data[k * chunk_len:(k + 1) * chunk_len].astype(np.float64)
        data = np.concatenate([diff_normalize(raw), standardize(raw)], axis=-1)
        chunks.append(VideoChunk(data=data.astype(np.float32),
                                 source_id=source_id, chunk_index=k))
    return chunks


# ---------------------------------------------------------------------------
# frame sources
# ---------------------------------------------------------------------------

def write_frames_bin(path, data: np.ndarray) -> None:
    """Write an (N, H, W, 3) float array as a little-endian frames.bin."""
    data = np.ascontiguousarray(data, dtype="<f4")
    n, h, w, c = data.shape
    if c != 3:
        raise ConfigInvalid(f"expected 3 channels, got {c}")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIIII", FRAMES_MAGIC, FORMAT_VERSION, n, h, w))
        fh.write(data.tobytes())


def read_frames_bin(path) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    header = struct.calcsize("<4sIIII")
    if len(raw) < header:
        raise TruncatedFile(f"{path}: shorter than header")
    magic, version, n, h, w = struct.unpack_from("<4sIIII", raw)
    if magic != FRAMES_MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: version {version}")
    expected = header + n * h * w * 3 * 4
    if len(raw) != expected:
        raise TruncatedFile(f"{path}: {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=header).reshape(n, h, w, 3)
    return np.array(data)  # own, writable copy


_PNG_INDEX = re.compile(r"(\d+)")


def _load_png_dir(path: Path) -> np.ndarray:
    from PIL import Image

    files = sorted(path.glob("*.png"),
                   key=lambda p: int(_PNG_INDEX.search(p.stem).group(1))
                   if _PNG_INDEX.search(p.stem) else 0)
    if not files:
        raise MissingPath(f"no PNG frames in {path}")
    frames = []
    shape = None
    for idx, f in enumerate(files):
        try:
            with Image.open(f) as img:
                arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
        except Exception as exc:  # Pillow raises various decode errors
            raise CorruptFrame(idx, f"{f.name}: {exc}") from exc
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise CorruptFrame(idx, f"{f.name}: shape {arr.shape} != {shape}")
        frames.append(arr)
    return np.stack(frames)


def _validate_frame_values(data: np.ndarray) -> None:
    for idx in range(data.shape[0]):
        frame = data[idx]
        if not np.all(np.isfinite(frame)):
            raise CorruptFrame(idx, "non-finite pixel values")
        if frame.min() < -1e-6 or frame.max() > 1.0 + 1e-6:
            raise CorruptFrame(idx, "pixel values outside [0, 1]")


# ---------------------------------------------------------------------------
# label sources, one parser per dataset kind
# ---------------------------------------------------------------------------

def _parse_label_csv(path: Path) -> np.ndarray:
    """Single-column CSV; an optional non-numeric header line is skipped."""
    values = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                values.append(float(text))
            except ValueError:
                if line_no == 1:  # header
                    continue
                raise LabelParseError(line_no, f"not a number: {text!r}")
    if not values:
        raise LabelParseError(1, "no label samples found")
    return np.array(values, dtype=np.float64)


def _parse_label_ubfc(path: Path) -> np.ndarray:
    """UBFC-style ground-truth text: whitespace rows, first row is the PPG."""
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                return np.array([float(v) for v in text.split()], dtype=np.float64)
            except ValueError as exc:
                raise LabelParseError(line_no, str(exc)) from exc
    raise LabelParseError(1, "empty ground-truth file")


def _parse_label_pure(path: Path, declared_rate: float) -> np.ndarray:
    """PURE-style JSON package: entries with ns timestamps and waveform values.

    The timestamps imply a sample rate; if it disagrees with the declared
    label_rate by more than 1% the manifest is wrong and loading fails.
    """
    try:
        doc = json.loads(path.read_text())
        entries = doc["/FullPackage"]
        values = np.array([e["Value"]["waveform"] for e in entries], dtype=np.float64)
        stamps = np.array([e["Timestamp"] for e in entries], dtype=np.float64)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise LabelParseError(1, f"not a PURE label package: {exc}") from exc
    if values.shape[0] >= 2:
        dt = np.median(np.diff(stamps)) * 1e-9
        if dt <= 0:
            raise LabelParseError(1, "non-increasing timestamps")
        implied = 1.0 / dt
        if abs(implied - declared_rate) > 0.01 * declared_rate:
            raise RateMismatch(
                f"label timestamps imply {implied:.2f} Hz but manifest "
                f"declares {declared_rate:.2f} Hz")
    return values


def load_recording(manifest: RecordingManifest):
    """Load one recording as (FrameSequence, LabelSeries) at native rates."""
    frames_path = Path(manifest.frames_path)
    labels_path = Path(manifest.labels_path)
    if not frames_path.exists():
        raise MissingPath(str(frames_path))
    if not labels_path.exists():
        raise MissingPath(str(labels_path))

    if frames_path.is_dir():
        data = _load_png_dir(frames_path)
    else:
        data = read_frames_bin(frames_path)
    _validate_frame_values(data)
    frames = FrameSequence(data=data.astype(np.float32), fps=manifest.fps)

    if manifest.dataset_kind == "ubfc":
        samples = _parse_label_ubfc(labels_path)
    elif manifest.dataset_kind == "pure":
        samples = _parse_label_pure(labels_path, manifest.label_rate)
    else:  # scamps, generic, synthetic
        samples = _parse_label_csv(labels_path)
    labels = LabelSeries(samples=samples, rate=manifest.label_rate)
    return frames, labels


# ---------------------------------------------------------------------------
# chunk cache
# ---------------------------------------------------------------------------

def write_chunk_cache(chunks: list, labels: list, directory) -> list:
    """Write chunk_<k>.rpc / labels_<k>.rpl pairs; returns the paths written.

    One writer per directory: callers must not share an output directory
    between concurrent writers.
    """
    if len(chunks) != len(labels):
        raise ConfigInvalid(
            f"{len(chunks)} chunks but {len(labels)} label segments")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for chunk, lab in zip(chunks, labels):
        k = chunk.chunk_index
        chunk_len, h, w, c = chunk.data.shape
        cpath = directory / f"chunk_{k}.rpc"
        with open(cpath, "wb") as fh:
            fh.write(struct.pack("<4sIIIII", CHUNK_MAGIC, FORMAT_VERSION,
                                 chunk_len, h, w, c))
            fh.write(np.ascontiguousarray(chunk.data, dtype="<f4").tobytes())
        lab32 = np.ascontiguousarray(lab, dtype="<f4")
        lpath = directory / f"labels_{k}.rpl"
        with open(lpath, "wb") as fh:
            fh.write(struct.pack("<4sII", LABELS_MAGIC, FORMAT_VERSION,
                                 lab32.shape[0]))
            fh.write(lab32.tobytes())
        paths.extend([cpath, lpath])
    return paths


def _read_chunk_file(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    header = struct.calcsize("<4sIIIII")
    if len(raw) < header:
        raise TruncatedFile(f"{path}: shorter than header")
    magic, version, chunk_len, h, w, c = struct.unpack_from("<4sIIIII", raw)
    if magic != CHUNK_MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: version {version}")
    expected = header + chunk_len * h * w * c * 4
    if len(raw) != expected:
        raise TruncatedFile(f"{path}: {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=header)
    return np.array(data).reshape(chunk_len, h, w, c)


def _read_labels_file(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    header = struct.calcsize("<4sII")
    if len(raw) < header:
        raise TruncatedFile(f"{path}: shorter than header")
    magic, version, length = struct.unpack_from("<4sII", raw)
    if magic != LABELS_MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: version {version}")
    expected = header + length * 4
    if len(raw) != expected:
        raise TruncatedFile(f"{path}: {len(raw)} bytes, expected {expected}")
    return np.array(np.frombuffer(raw, dtype="<f4", offset=header))


def read_chunk_cache(directory, source_id: str | None = None):
    """Read back (chunks, labels) written by write_chunk_cache, ordered by k."""
    directory = Path(directory)
    if not directory.is_dir():
        raise MissingPath(str(directory))
    if source_id is None:
        source_id = directory.name
    indexed = []
    for path in directory.glob("chunk_*.rpc"):
        match = re.fullmatch(r"chunk_(\d+)\.rpc", path.name)
        if match:
            indexed.append((int(match.group(1)), path))
    chunks, labels = [], []
    for k, cpath in sorted(indexed):
        chunks.append(VideoChunk(data=_read_chunk_file(cpath),
                                 source_id=source_id, chunk_index=k))
        lpath = directory / f"labels_{k}.rpl"
        if not lpath.exists():
            raise MissingPath(str(lpath))
        labels.append(_read_labels_file(lpath))
    return chunks, labels
