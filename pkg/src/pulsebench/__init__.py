"""Camera-based pulse recovery benchmark: ingestion, recovery methods,
postprocessing, evaluation, and a synthetic ground-truth generator."""

from .dsp import (BiquadCascade, HrEstimate, PostprocessConfig, Spectrum,
                  design_bandpass, detrend, estimate_hr, filtfilt,
                  hr_from_waveform, periodogram)
from .evaluation import (MetricsReport, VideoResult, compute_metrics,
                         group_and_report, label_hr, read_results_csv,
                         render_report, write_results_csv)
from .ingestion import (FrameSequence, LabelSeries, RecordingManifest,
                        RgbTrace, VideoChunk, align_labels, diff_normalize,
                        load_recording, make_chunks, read_chunk_cache,
                        spatial_average, standardize, write_chunk_cache)
from .jade import jade_separate
from .methods import (METHOD_ORDER, BvpSignal, PbvSignature, PosConstants,
                      SKIN_PULSE_SIGNATURE, chrom_bvp, green_bvp, ica_bvp,
                      lgi_bvp, pbv_bvp, pos_bvp, recover_bvp)
from .synth import SynthConfig, synth_trace, synth_video, write_recording

__version__ = "0.1.0"

__all__ = [
    "BiquadCascade", "BvpSignal", "FrameSequence", "HrEstimate",
    "LabelSeries", "METHOD_ORDER", "MetricsReport", "PbvSignature",
    "PosConstants", "PostprocessConfig", "RecordingManifest", "RgbTrace",
    "SKIN_PULSE_SIGNATURE", "Spectrum", "SynthConfig", "VideoChunk",
    "VideoResult", "align_labels", "chrom_bvp", "compute_metrics",
    "design_bandpass", "detrend", "diff_normalize", "estimate_hr",
    "filtfilt", "green_bvp", "group_and_report", "hr_from_waveform",
    "ica_bvp", "jade_separate", "label_hr", "lgi_bvp", "load_recording",
    "make_chunks", "pbv_bvp", "periodogram", "pos_bvp", "read_chunk_cache",
    "read_results_csv", "recover_bvp", "render_report", "spatial_average",
    "standardize", "synth_trace", "synth_video", "write_chunk_cache",
    "write_recording", "write_results_csv",
]
