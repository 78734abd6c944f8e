import numpy as np
import pytest

from pulsebench import dsp
from pulsebench.errors import ConfigInvalid
from pulsebench.ingestion import load_recording, RecordingManifest, spatial_average
from pulsebench.synth import SynthConfig, synth_trace, synth_video, write_recording


class TestSynthTrace:
    def test_matches_closed_form(self):
        cfg = SynthConfig(hr_bpm=72.0, illum_amplitude=0.002, illum_freq_hz=0.25)
        trace, p, hr = synth_trace(cfg)
        t = np.arange(trace.n) / cfg.fps
        m = np.sin(2 * np.pi * 0.25 * t)
        sig = cfg.pulse_signature.as_array()
        expect_g = cfg.baseline_rgb[1] * (1 + 0.005 * sig[1] * p + 0.002 * m)
        assert np.allclose(trace.g, expect_g, atol=1e-12)
        assert hr == 72.0

    def test_deterministic(self):
        a, pa, _ = synth_trace(SynthConfig(seed=9, hr_bpm=80.0))
        b, pb, _ = synth_trace(SynthConfig(seed=9, hr_bpm=80.0))
        assert np.array_equal(a.g, b.g)
        assert np.array_equal(pa, pb)

    def test_ppg_peak_at_configured_hr(self):
        for hr in (50.0, 95.0, 140.0):
            cfg = SynthConfig(hr_bpm=hr, duration_s=20.0)
            _, p, _ = synth_trace(cfg)
            spec = dsp.periodogram(p, cfg.fps)
            peak = spec.freqs[np.argmax(spec.power)]
            assert abs(peak - hr / 60.0) <= spec.fs / spec.nfft

    def test_harmonic_shape_keeps_fundamental_peak(self):
        cfg = SynthConfig(hr_bpm=72.0, pulse_shape="harmonic")
        _, p, _ = synth_trace(cfg)
        est = dsp.hr_from_waveform(p, cfg.fps)
        assert abs(est.bpm - 72.0) <= 1.0

    def test_ramp_reports_mean_hr(self):
        cfg = SynthConfig(hr_bpm=(60.0, 90.0), duration_s=60.0)
        _, p, hr = synth_trace(cfg)
        assert hr == 75.0
        est = dsp.hr_from_waveform(p, cfg.fps)
        assert 60.0 <= est.bpm <= 90.0

    def test_no_pulse_still_in_band(self):
        cfg = SynthConfig(pulse_amplitude=0.0)
        trace, _, _ = synth_trace(cfg)
        est = dsp.hr_from_waveform(trace.g, cfg.fps)
        assert 45.0 <= est.bpm <= 150.0


class TestSynthVideo:
    def test_noiseless_video_averages_to_trace(self):
        cfg = SynthConfig(hr_bpm=66.0, frame_size=(6, 7), noise_std=0.0)
        trace, _, _ = synth_trace(cfg)
        video = synth_video(cfg)
        avg = spatial_average(video)
        assert np.abs(avg.g - trace.g).max() < 1e-6  # float32 storage
        assert np.abs(avg.r - trace.r).max() < 1e-6

    def test_pixels_stay_in_unit_interval(self):
        cfg = SynthConfig(noise_std=0.05, frame_size=(8, 8), seed=3)
        video = synth_video(cfg)
        assert video.data.min() >= 0.0 and video.data.max() <= 1.0

    def test_noise_averages_out(self):
        cfg = SynthConfig(hr_bpm=72.0, frame_size=(64, 64), noise_std=0.05,
                          duration_s=8.0, seed=12)
        trace, _, _ = synth_trace(cfg)
        avg = spatial_average(synth_video(cfg))
        sigma = 0.05 / 64.0  # per-sample std of the spatial mean
        dev = np.concatenate([avg.r - trace.r, avg.g - trace.g, avg.b - trace.b])
        assert np.sqrt((dev ** 2).mean()) < 3.0 * sigma
        assert (np.abs(dev) < 3.0 * sigma).mean() > 0.99

    def test_video_deterministic(self):
        cfg = SynthConfig(noise_std=0.02, frame_size=(4, 4), seed=21)
        assert np.array_equal(synth_video(cfg).data, synth_video(cfg).data)

    def test_frame_substreams_differ(self):
        cfg = SynthConfig(noise_std=0.02, frame_size=(4, 4), seed=21)
        video = synth_video(cfg)
        assert not np.array_equal(video.data[0], video.data[1])


class TestValidation:
    def test_amplitude_overflow_rejected(self):
        cfg = SynthConfig(baseline_rgb=(0.9, 0.9, 0.9), illum_amplitude=0.2)
        with pytest.raises(ConfigInvalid):
            cfg.validate()

    @pytest.mark.parametrize("kw", [dict(hr_bpm=40.0), dict(hr_bpm=160.0),
                                    dict(fps=10.0), dict(duration_s=5.0),
                                    dict(noise_std=-0.1),
                                    dict(illum_freq_hz=20.0),
                                    dict(frame_size=(0, 4)),
                                    dict(pulse_shape="square")])
    def test_invalid_configs(self, kw):
        with pytest.raises(ConfigInvalid):
            SynthConfig(**kw).validate()


class TestWriteRecording:
    def test_round_trips_through_ingestion(self, tmp_path):
        cfg = SynthConfig(hr_bpm=100.0, frame_size=(4, 4), seed=5,
                          duration_s=10.0)
        manifest_path = write_recording(cfg, tmp_path / "rec", "rec")
        manifest = RecordingManifest.from_json_file(manifest_path)
        frames, labels = load_recording(manifest)
        video = synth_video(cfg)
        _, ppg, _ = synth_trace(cfg)
        assert np.array_equal(frames.data, video.data)
        assert np.array_equal(labels.samples, ppg)  # 17 digits round-trip

    def test_identical_bytes_for_same_config(self, tmp_path):
        cfg = SynthConfig(hr_bpm=88.0, frame_size=(4, 4), seed=1,
                          duration_s=10.0, noise_std=0.01)
        write_recording(cfg, tmp_path / "a", "rec")
        write_recording(cfg, tmp_path / "b", "rec")
        assert ((tmp_path / "a" / "frames.bin").read_bytes()
                == (tmp_path / "b" / "frames.bin").read_bytes())
        assert ((tmp_path / "a" / "labels.csv").read_bytes()
                == (tmp_path / "b" / "labels.csv").read_bytes())
