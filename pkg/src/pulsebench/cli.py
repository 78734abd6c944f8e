"""Config-driven benchmark harness: synth, preprocess, run, evaluate.

Every run writes its fully resolved configuration (defaults included) next
to its outputs, and all outputs are deterministic given (config, seed), so
any report can be regenerated from its sidecar.  Per-recording failures are
logged to an exclusion CSV instead of aborting the batch.

Option precedence: command-line flag > config file > built-in default.
"""

import argparse
import concurrent.futures
import dataclasses
import glob
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib as _toml
except ModuleNotFoundError:  # Python < 3.11
    import tomli as _toml

from . import dsp, evaluation, ingestion, synth
from .errors import ConfigInvalid, PulsebenchError
from .methods import METHOD_ORDER, PbvSignature, recover_bvp

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings for preprocess/run/evaluate."""
    manifests: tuple = ()
    methods: tuple = METHOD_ORDER
    chunk_mode: str = "video"  # "video" or "chunk"
    chunk_len: int = ingestion.DEFAULT_CHUNK_LEN
    output_dir: str = "pulsebench_out"
    seed: int = 0
    jobs: int = 0  # 0 means available parallelism
    pbv_signature: tuple | None = None
    low_hz: float = dsp.DEFAULT_LOW_HZ
    high_hz: float = dsp.DEFAULT_HIGH_HZ
    order: int = dsp.DEFAULT_ORDER
    detrend_enabled: bool = True
    detrend_lambda: float = dsp.DEFAULT_DETREND_LAMBDA
    pad_factor: int = dsp.DEFAULT_PAD_FACTOR

    def validate(self) -> None:
        for m in self.methods:
            if m not in METHOD_ORDER:
                raise ConfigInvalid(
                    f"unknown method {m!r}; choose from {METHOD_ORDER}")
        if not self.methods:
            raise ConfigInvalid("at least one method is required")
        if self.chunk_mode not in ("video", "chunk"):
            raise ConfigInvalid(f"chunk_mode must be video or chunk, "
                                f"got {self.chunk_mode!r}")
        if self.chunk_len < 2:
            raise ConfigInvalid(f"chunk_len must be >= 2, got {self.chunk_len}")

    def post_config(self) -> dsp.PostprocessConfig:
        return dsp.PostprocessConfig(
            low_hz=self.low_hz, high_hz=self.high_hz, order=self.order,
            detrend_enabled=self.detrend_enabled,
            detrend_lambda=self.detrend_lambda, pad_factor=self.pad_factor)

    def signature(self) -> PbvSignature | None:
        if self.pbv_signature is None:
            return None
        r, g, b = self.pbv_signature
        return PbvSignature.from_components(r, g, b)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigInvalid(f"config file {path} does not exist")
    with open(path, "rb") as fh:
        try:
            return _toml.load(fh)
        except _toml.TOMLDecodeError as exc:
            raise ConfigInvalid(f"{path}: {exc}") from exc


def _build_run_config(args) -> RunConfig:
    doc = _load_config_file(args.config) if args.config else {}
    filt = doc.get("filter", {})
    detr = doc.get("detrend", {})
    hr = doc.get("hr", {})

    def pick(flag_value, file_value, default):
        if flag_value is not None:
            return flag_value
        if file_value is not None:
            return file_value
        return default

    manifests = pick(args.manifests, doc.get("manifests"), [])
    methods = pick(args.methods, doc.get("methods"), list(METHOD_ORDER))
    if isinstance(methods, str):
        methods = [m.strip() for m in methods.split(",") if m.strip()]
    pbv_sig = pick(getattr(args, "pbv_signature", None),
                   doc.get("pbv_signature"), None)
    if isinstance(pbv_sig, str):
        try:
            pbv_sig = tuple(float(v) for v in pbv_sig.split(","))
        except ValueError as exc:
            raise ConfigInvalid(f"bad pbv_signature: {exc}") from exc
    if pbv_sig is not None and len(pbv_sig) != 3:
        raise ConfigInvalid("pbv_signature needs exactly 3 components")

    config = RunConfig(
        manifests=tuple(manifests),
        methods=tuple(methods),
        chunk_mode=pick(args.chunk_mode, doc.get("chunk_mode"), "video"),
        chunk_len=pick(args.chunk_len, doc.get("chunk_len"),
                       ingestion.DEFAULT_CHUNK_LEN),
        output_dir=pick(args.output, doc.get("output_dir"), "pulsebench_out"),
        seed=pick(args.seed, doc.get("seed"), 0),
        jobs=pick(args.jobs, doc.get("jobs"), 0),
        pbv_signature=tuple(pbv_sig) if pbv_sig is not None else None,
        low_hz=pick(getattr(args, "filter_low_hz", None),
                    filt.get("low_hz"), dsp.DEFAULT_LOW_HZ),
        high_hz=pick(getattr(args, "filter_high_hz", None),
                     filt.get("high_hz"), dsp.DEFAULT_HIGH_HZ),
        order=pick(getattr(args, "filter_order", None),
                   filt.get("order"), dsp.DEFAULT_ORDER),
        detrend_enabled=pick(getattr(args, "detrend_enabled", None),
                             detr.get("enabled"), True),
        detrend_lambda=pick(getattr(args, "detrend_lambda", None),
                            detr.get("lambda"), dsp.DEFAULT_DETREND_LAMBDA),
        pad_factor=pick(getattr(args, "hr_pad_factor", None),
                        hr.get("pad_factor"), dsp.DEFAULT_PAD_FACTOR),
    )
    config.validate()
    return config


def _resolve_manifests(patterns) -> list:
    paths = []
    for pattern in patterns:
        matches = sorted(glob.glob(str(pattern)))
        if matches:
            paths.extend(Path(m) for m in matches)
        elif Path(pattern).exists():
            paths.append(Path(pattern))
    return sorted(set(paths))


def _write_sidecar(config: RunConfig, out_dir: Path, command: str) -> None:
    doc = dataclasses.asdict(config)
    doc["command"] = command
    (out_dir / f"{command}_config.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _jobs(config: RunConfig) -> int:
    return config.jobs if config.jobs > 0 else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    doc = _load_config_file(args.config) if args.config else {}
    table = doc.get("synth", {})
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    out_dir = Path(args.output if args.output is not None
                   else doc.get("output_dir", "pulsebench_out"))
    count = int(table.get("count", 1))
    if count < 1:
        raise ConfigInvalid(f"synth.count must be >= 1, got {count}")
    hr_start = float(table.get("hr_start", 72.0))
    hr_end = float(table.get("hr_end", hr_start))
    hrs = np.linspace(hr_start, hr_end, count) if count > 1 else [hr_start]

    sig = table.get("pulse_signature")
    signature = (PbvSignature.from_components(*sig) if sig is not None
                 else synth.SKIN_PULSE_SIGNATURE)
    base = table.get("baseline_rgb", (0.6, 0.45, 0.35))
    configs = []
    for i, hr in enumerate(hrs):
        configs.append(synth.SynthConfig(
            seed=int(seed) + 1000003 * i,
            duration_s=float(table.get("duration_s", 20.0)),
            fps=float(table.get("fps", 30.0)),
            hr_bpm=float(hr),
            pulse_signature=signature,
            pulse_amplitude=float(table.get("pulse_amplitude", 0.005)),
            baseline_rgb=tuple(base),
            illum_amplitude=float(table.get("illum_amplitude", 0.0)),
            illum_freq_hz=float(table.get("illum_freq_hz", 0.3)),
            noise_std=float(table.get("noise_std", 0.0)),
            frame_size=(int(table.get("frame_height", 64)),
                        int(table.get("frame_width", 64))),
            pulse_shape=str(table.get("pulse_shape", "sine")),
        ))
    for cfg in configs:  # validate everything before writing anything
        cfg.validate()

    recordings_dir = out_dir / "recordings"
    manifest_paths = []
    for i, cfg in enumerate(configs):
        rec_id = f"rec_{i:03d}"
        manifest_paths.append(synth.write_recording(
            cfg, recordings_dir / rec_id, rec_id))
    print(f"wrote {len(manifest_paths)} recordings under {recordings_dir}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    config = _build_run_config(args)
    manifests = _resolve_manifests(config.manifests)
    if not manifests:
        print("error: no manifests matched", file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_sidecar(config, out_dir, "preprocess")

    index = {}
    exclusions = []
    for mpath in manifests:
        try:
            manifest = ingestion.RecordingManifest.from_json_file(mpath)
            frames, labels = ingestion.load_recording(manifest)
            aligned = ingestion.align_labels(labels, manifest.fps, frames.n_frames)
            chunks = ingestion.make_chunks(frames, config.chunk_len,
                                           source_id=manifest.id)
            segments = [aligned[k * config.chunk_len:(k + 1) * config.chunk_len]
                        for k in range(len(chunks))]
            cache_dir = out_dir / "cache" / manifest.id
            ingestion.write_chunk_cache(chunks, segments, cache_dir)
            entries = []
            for chunk in chunks:
                cpath = cache_dir / f"chunk_{chunk.chunk_index}.rpc"
                lpath = cache_dir / f"labels_{chunk.chunk_index}.rpl"
                entries.append({"chunk": str(cpath.relative_to(out_dir)),
                                "chunk_sha256": _sha256(cpath),
                                "labels": str(lpath.relative_to(out_dir)),
                                "labels_sha256": _sha256(lpath)})
            index[manifest.id] = entries
        except (PulsebenchError, OSError) as exc:
            exclusions.append((str(mpath), "preprocess", str(exc)))
    (out_dir / "index.json").write_text(
        json.dumps(index, indent=2, sort_keys=True) + "\n")
    if exclusions:
        (out_dir / "exclusions_preprocess.csv").write_text(
            evaluation.render_exclusion_log(exclusions))
    n_chunks = sum(len(v) for v in index.values())
    print(f"cached {n_chunks} chunks from {len(index)} recordings "
          f"({len(exclusions)} excluded)")
    return EXIT_OK if index else EXIT_PARTIAL


def _process_recording(mpath: Path, config: RunConfig):
    """Worker: all (segment, method) results for one recording."""
    results = []
    exclusions = []
    manifest = ingestion.RecordingManifest.from_json_file(mpath)
    frames, labels = ingestion.load_recording(manifest)
    trace = ingestion.spatial_average(frames, manifest.roi)
    aligned = ingestion.align_labels(labels, manifest.fps, frames.n_frames)
    post = config.post_config()

    if config.chunk_mode == "chunk":
        n_seg = trace.n // config.chunk_len
        segments = []
        for k in range(n_seg):
            sl = slice(k * config.chunk_len, (k + 1) * config.chunk_len)
            seg_trace = ingestion.RgbTrace(r=trace.r[sl], g=trace.g[sl],
                                           b=trace.b[sl], fps=trace.fps)
            segments.append((f"{manifest.id}#{k:03d}", seg_trace, aligned[sl]))
    else:
        segments = [(manifest.id, trace, aligned)]

    for seg_id, seg_trace, seg_labels in segments:
        try:
            hr_label = evaluation.label_hr(seg_labels, manifest.fps, post).bpm
        except PulsebenchError as exc:
            exclusions.append((seg_id, "label_hr", str(exc)))
            continue
        for method in config.methods:
            try:
                bvp = recover_bvp(seg_trace, method, config.signature())
                hr_pred = dsp.hr_from_waveform(bvp.samples, manifest.fps, post,
                                               method=method).bpm
                results.append(evaluation.VideoResult(
                    video_id=seg_id, method=method,
                    hr_pred=hr_pred, hr_label=hr_label))
            except PulsebenchError as exc:
                exclusions.append((seg_id, method, str(exc)))
    return results, exclusions


def cmd_run(args) -> int:
    config = _build_run_config(args)
    manifests = _resolve_manifests(config.manifests)
    if not manifests:
        print("error: no manifests matched", file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_sidecar(config, out_dir, "run")

    results = []
    exclusions = []
    with concurrent.futures.ThreadPoolExecutor(max_workers=_jobs(config)) as pool:
        futures = {pool.submit(_process_recording, mpath, config): mpath
                   for mpath in manifests}
        for future in concurrent.futures.as_completed(futures):
            mpath = futures[future]
            try:
                rec_results, rec_exclusions = future.result()
                results.extend(rec_results)
                exclusions.extend(rec_exclusions)
            except (PulsebenchError, OSError) as exc:
                exclusions.append((str(mpath), "load", str(exc)))

    results.sort(key=lambda r: (r.video_id, r.method))
    exclusions.sort()
    evaluation.write_results_csv(results, out_dir / "results.csv")
    if exclusions:
        (out_dir / "exclusions_run.csv").write_text(
            evaluation.render_exclusion_log(exclusions))
    print(f"wrote {len(results)} results to {out_dir / 'results.csv'} "
          f"({len(exclusions)} excluded)")
    if not results:
        return EXIT_PARTIAL
    return EXIT_PARTIAL if exclusions else EXIT_OK


def cmd_evaluate(args) -> int:
    results_path = Path(args.results)
    if not results_path.exists():
        print(f"error: {results_path} does not exist", file=sys.stderr)
        return EXIT_USAGE
    results = evaluation.read_results_csv(results_path)
    if not results:
        print("error: no results in file", file=sys.stderr)
        return EXIT_USAGE
    reports = evaluation.group_and_report(results)
    csv_text = evaluation.render_report(reports, "csv")
    md_text = evaluation.render_report(reports, "markdown")
    out_dir = Path(args.output) if args.output else results_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(csv_text)
    (out_dir / "report.md").write_text(md_text)
    print(md_text, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--output", help="output directory")
    common.add_argument("--jobs", type=int, help="worker pool size")
    common.add_argument("--seed", type=int, help="base random seed")
    return common


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifests", action="append",
                        help="manifest path or glob (repeatable)")
    parser.add_argument("--methods", help="comma-separated method names")
    parser.add_argument("--chunk_mode", choices=["video", "chunk"])
    parser.add_argument("--chunk_len", type=int)
    parser.add_argument("--pbv_signature",
                        help="three comma-separated reals, normalized internally")
    parser.add_argument("--filter.low_hz", dest="filter_low_hz", type=float)
    parser.add_argument("--filter.high_hz", dest="filter_high_hz", type=float)
    parser.add_argument("--filter.order", dest="filter_order", type=int)
    parser.add_argument("--detrend.enabled", dest="detrend_enabled",
                        type=lambda v: v.lower() in ("1", "true", "yes"))
    parser.add_argument("--detrend.lambda", dest="detrend_lambda", type=float)
    parser.add_argument("--hr.pad_factor", dest="hr_pad_factor", type=int)


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="pulsebench",
        description="camera pulse-recovery benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", parents=[common],
                             help="generate synthetic recordings")
    p_synth.set_defaults(func=cmd_synth)

    p_pre = sub.add_parser("preprocess", parents=[common],
                           help="build 6-channel chunk caches")
    _add_run_flags(p_pre)
    p_pre.set_defaults(func=cmd_preprocess)

    p_run = sub.add_parser("run", parents=[common],
                           help="recover pulse and estimate HR per recording")
    _add_run_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("evaluate", parents=[common],
                            help="aggregate a results CSV into reports")
    p_eval.add_argument("results", help="per-video results CSV from `run`")
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PulsebenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
