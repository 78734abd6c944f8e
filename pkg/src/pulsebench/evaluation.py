"""Benchmark metrics: per-video HR pairs aggregated into MAE/RMSE/MAPE/Pearson.

Gold-standard heart rate is computed from the aligned label waveform with
the exact same postprocessing chain as predictions (see dsp.hr_from_waveform),
so labels and predictions can never disagree because of procedure drift.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .dsp import HrEstimate, PostprocessConfig, hr_from_waveform
from .errors import ConfigInvalid, ParseError
from .methods import METHOD_ORDER

RESULTS_HEADER = ("video_id", "method", "hr_pred_bpm", "hr_label_bpm")
REPORT_HEADER = ("method", "n_videos", "mae_bpm", "rmse_bpm", "mape_pct", "pearson")
EXCLUSION_HEADER = ("video_id", "stage", "error")


@dataclass(frozen=True)
class VideoResult:
    """One (prediction, gold standard) HR pair for one video and method."""
    video_id: str
    method: str
    hr_pred: float
    hr_label: float


@dataclass(frozen=True)
class MetricsReport:
    method: str
    n_videos: int
    mae: float
    rmse: float
    mape: float
    pearson: float  # NaN when undefined (constant labels or n < 2)


def label_hr(aligned_labels: np.ndarray, fs: float,
             config: PostprocessConfig = PostprocessConfig()) -> HrEstimate:
    """Gold-standard HR through the canonical prediction chain."""
    return hr_from_waveform(aligned_labels, fs, config, source="label")


def compute_metrics(results: list) -> MetricsReport:
    """Aggregate one method's per-video results.

    MAE = mean |e|, RMSE = sqrt(mean e^2), MAPE = 100 * mean(|e| / label),
    pearson = sample correlation of (pred, label) across videos, with
    e = pred - label.  Pearson is NaN when it is undefined.
    """
    if not results:
        raise ConfigInvalid("cannot compute metrics over zero videos")
    methods = {r.method for r in results}
    if len(methods) != 1:
        raise ConfigInvalid(f"results mix methods {sorted(methods)}")
    preds = np.array([r.hr_pred for r in results], dtype=np.float64)
    labels = np.array([r.hr_label for r in results], dtype=np.float64)
    errors = preds - labels
    mae = float(np.mean(np.abs(errors)))
    rmse = float(np.sqrt(np.mean(errors ** 2)))
    mape = float(100.0 * np.mean(np.abs(errors) / labels))
    if len(results) < 2 or preds.std() == 0 or labels.std() == 0:
        pearson = float("nan")
    else:
        pearson = float(np.corrcoef(preds, labels)[0, 1])
    return MetricsReport(method=methods.pop(), n_videos=len(results),
                         mae=mae, rmse=rmse, mape=mape, pearson=pearson)


def _method_key(name: str) -> tuple:
    try:
        return (0, METHOD_ORDER.index(name))
    except ValueError:
        return (1, name)


def render_report(reports: list, fmt: str = "csv") -> str:
    """Render metric rows, one per method, ordered by the method enum order.

    Values are fixed to 2 decimal places; two renders of the same input are
    byte-identical.
    """
    if not reports:
        raise ConfigInvalid("no reports to render")
    rows = sorted(reports, key=lambda r: _method_key(r.method))
    if fmt == "csv":
        lines = [",".join(REPORT_HEADER)]
        for r in rows:
            lines.append(f"{r.method},{r.n_videos},{r.mae:.2f},{r.rmse:.2f},"
                         f"{r.mape:.2f},{r.pearson:.2f}")
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = ["| method | n_videos | MAE | RMSE | MAPE | Pearson |",
                 "|---|---|---|---|---|---|"]
        for r in rows:
            lines.append(f"| {r.method} | {r.n_videos} | {r.mae:.2f} | "
                         f"{r.rmse:.2f} | {r.mape:.2f} | {r.pearson:.2f} |")
        return "\n".join(lines) + "\n"
    raise ConfigInvalid(f"unknown report format {fmt!r}")


def write_results_csv(results: list, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        for r in results:
            writer.writerow([r.video_id, r.method,
                             f"{r.hr_pred:.6f}", f"{r.hr_label:.6f}"])


def read_results_csv(path) -> list:
    """Parse a per-video results CSV; raises ParseError with the line number."""
    results = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if line_no == 1:
                if tuple(row) != RESULTS_HEADER:
                    raise ParseError(line_no, f"bad header {row}")
                continue
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(line_no, f"expected 4 columns, got {len(row)}")
            try:
                results.append(VideoResult(video_id=row[0], method=row[1],
                                           hr_pred=float(row[2]),
                                           hr_label=float(row[3])))
            except ValueError as exc:
                raise ParseError(line_no, str(exc)) from exc
    return results


def group_and_report(results: list) -> list:
    """compute_metrics per method present, ordered for rendering."""
    by_method = {}
    for r in results:
        by_method.setdefault(r.method, []).append(r)
    return [compute_metrics(group)
            for _, group in sorted(by_method.items(),
                                   key=lambda kv: _method_key(kv[0]))]


def render_exclusion_log(exclusions: list) -> str:
    """CSV of (video_id, stage, error) rows for videos dropped from a run."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EXCLUSION_HEADER)
    for video_id, stage, error in exclusions:
        writer.writerow([video_id, stage, error])
    return buf.getvalue()
