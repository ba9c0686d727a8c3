import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import delta_by_loop, frame_count_by_loop, mel_band_energies_by_loop
from pvad_lab.config import FeatureConfig
from pvad_lab.features import (
    AudioTooShortError,
    FeatureSequence,
    Waveform,
    add_deltas,
    export_features,
    extract_static,
    extract_stacked,
    fft_size,
    frame_signal,
    hamming_window,
    load_features,
    log_mel,
    mel_filterbank,
    read_wav,
    stack_context,
    write_wav,
)

CFG = FeatureConfig()  # paper defaults: 16 kHz, 20/10 ms, 40 mels, context 3


def sine_wave(freq, duration_s=1.0, sr=16000, amp=0.3):
    t = np.arange(int(duration_s * sr)) / sr
    return Waveform(amp * np.sin(2 * np.pi * freq * t), sr)


class TestFraming:
    def test_one_second_gives_99_frames(self):
        w = sine_wave(440.0)
        frames = frame_signal(w, 20.0, 10.0)
        assert frames.shape == (99, 320)
        assert frame_count_by_loop(16000, 320, 160) == 99

    @given(st.integers(min_value=320, max_value=20000))
    @settings(max_examples=30, deadline=None)
    def test_frame_count_matches_loop_oracle(self, n):
        w = Waveform(np.zeros(n), 16000)
        frames = frame_signal(w, 20.0, 10.0)
        assert frames.shape[0] == frame_count_by_loop(n, 320, 160)

    def test_hamming_endpoint(self):
        assert hamming_window(320)[0] == pytest.approx(0.08, abs=1e-12)

    def test_zero_signal_gives_zero_frames(self):
        frames = frame_signal(Waveform(np.zeros(1000), 16000), 20.0, 10.0)
        assert np.all(frames == 0.0)

    def test_too_short_raises(self):
        with pytest.raises(AudioTooShortError, match="too short"):
            frame_signal(Waveform(np.zeros(100), 16000), 20.0, 10.0)

    def test_bad_window_args(self):
        with pytest.raises(ValueError):
            frame_signal(sine_wave(440.0), 10.0, 20.0)


class TestLogMel:
    def test_zero_frame_hits_log_floor(self):
        frames = np.zeros((3, 320))
        feats = log_mel(frames, CFG)
        assert np.allclose(feats.values, np.log(CFG.log_floor))

    @pytest.mark.parametrize("band", [5, 12, 25, 33])
    def test_sinusoid_at_band_center_peaks_there(self, band):
        n_fft = fft_size(CFG.win_samples)
        bank = mel_filterbank(CFG.n_mels, n_fft, CFG.sample_rate)
        centers = np.array([np.argmax(row) for row in bank]) * CFG.sample_rate / n_fft
        w = sine_wave(centers[band], duration_s=0.5)
        feats = log_mel(frame_signal(w, 20.0, 10.0), CFG)
        got = np.argmax(feats.values[feats.n_frames // 2])
        # oracle: reference triangular response to the same power spectrum
        frame = frame_signal(w, 20.0, 10.0)[feats.n_frames // 2]
        power = np.abs(np.fft.rfft(frame, n=n_fft)) ** 2
        expected = np.argmax(
            mel_band_energies_by_loop(power, CFG.n_mels, n_fft, CFG.sample_rate)
        )
        assert got == expected == band

    def test_energy_scaling_shifts_by_log_gain_squared(self):
        rng = np.random.default_rng(0)
        w = Waveform(rng.uniform(-0.3, 0.3, 8000), 16000)
        base = extract_static(w, CFG).values
        scaled = extract_static(Waveform(w.samples * 2.0, 16000), CFG).values
        above_floor = base > np.log(CFG.log_floor) + 2.0
        assert np.allclose(scaled[above_floor] - base[above_floor],
                           np.log(4.0), atol=1e-10)

    def test_filterbank_matches_loop_oracle(self):
        n_fft = 512
        bank = mel_filterbank(10, n_fft, 16000)
        rng = np.random.default_rng(1)
        power = rng.uniform(0.0, 1.0, n_fft // 2 + 1)
        assert np.allclose(bank @ power,
                           mel_band_energies_by_loop(power, 10, n_fft, 16000),
                           atol=1e-9)


class TestDeltas:
    def test_constant_input_zero_deltas(self):
        static = FeatureSequence(np.full((10, 4), 3.7), "static", n_mels=4)
        out = add_deltas(static)
        assert np.all(out.values[:, 4:] == 0.0)

    def test_linear_ramp_delta_is_one(self):
        t = np.arange(20, dtype=np.float64)
        ramp = np.tile(t[:, None], (1, 3))
        static = FeatureSequence(ramp, "static", n_mels=3)
        out = add_deltas(static, window=2)
        assert np.allclose(out.values[2:-2, 3:6], 1.0)
        assert np.array_equal(out.values[:, :3], ramp)  # statics untouched

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(15, 5))
        static = FeatureSequence(x, "static", n_mels=5)
        out = add_deltas(static, window=2)
        d1 = delta_by_loop(x, 2)
        assert np.allclose(out.values[:, 5:10], d1, atol=1e-12)
        assert np.allclose(out.values[:, 10:15], delta_by_loop(d1, 2), atol=1e-12)

    def test_dims_40_to_120(self):
        static = FeatureSequence(np.zeros((5, 40)), "static", n_mels=40)
        assert add_deltas(static).values.shape == (5, 120)


class TestContextStacking:
    def test_dims_120_to_840(self):
        delta = FeatureSequence(np.zeros((5, 120)), "static_delta_accel", n_mels=40)
        assert stack_context(delta, 3).values.shape == (5, 840)

    def test_zero_context_is_identity(self):
        rng = np.random.default_rng(3)
        delta = FeatureSequence(rng.normal(size=(6, 12)), "static_delta_accel", n_mels=4)
        out = stack_context(delta, 0)
        assert np.array_equal(out.values, delta.values)

    def test_single_frame_replicates(self):
        delta = FeatureSequence(np.arange(12.0)[None, :], "static_delta_accel", n_mels=4)
        out = stack_context(delta, 2)
        assert out.values.shape == (1, 60)
        for k in range(5):
            assert np.array_equal(out.values[0, k * 12 : (k + 1) * 12], delta.values[0])

    def test_frame_count_preserved(self):
        w = sine_wave(300.0)
        static = extract_static(w, CFG)
        stacked = extract_stacked(w, CFG)
        assert static.n_frames == stacked.n_frames


class TestProperties:
    def test_determinism_bitwise(self):
        w = sine_wave(523.0)
        a = extract_stacked(w, CFG).values
        b = extract_stacked(w, CFG).values
        assert np.array_equal(a, b)

    def test_per_frame_locality_before_stacking(self):
        rng = np.random.default_rng(4)
        samples = rng.uniform(-0.3, 0.3, 4800)
        base = extract_static(Waveform(samples, 16000), CFG).values
        poked = samples.copy()
        poked[1000] += 0.1  # inside frames 5..6 (hop 160, win 320)
        new = extract_static(Waveform(poked, 16000), CFG).values
        changed = np.where(np.any(new != base, axis=1))[0]
        covering = [t for t in range(base.shape[0])
                    if t * 160 <= 1000 < t * 160 + 320]
        assert set(changed) <= set(covering)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_outputs_finite_for_random_input(self, seed):
        rng = np.random.default_rng(seed)
        samples = rng.uniform(-1.0, 1.0, 2000)
        cfg = FeatureConfig(n_mels=8, context=1)
        feats = extract_stacked(Waveform(samples, 16000), cfg)
        assert np.all(np.isfinite(feats.values))

    def test_mean_norm_flag(self):
        cfg = FeatureConfig(n_mels=8, context=1, mean_norm=True)
        w = sine_wave(440.0, duration_s=0.5)
        feats = extract_static(w, cfg)
        assert np.allclose(feats.values.mean(axis=0), 0.0, atol=1e-12)

    def test_layout_dimension_validation(self):
        with pytest.raises(ValueError, match="expects D="):
            FeatureSequence(np.zeros((3, 7)), "static", n_mels=8)


class TestIO:
    def test_wav_round_trip(self, tmp_path):
        w = sine_wave(440.0, duration_s=0.25)
        write_wav(tmp_path / "a.wav", w)
        back = read_wav(tmp_path / "a.wav")
        assert back.sample_rate == 16000
        assert back.samples.shape == w.samples.shape
        assert np.max(np.abs(back.samples - w.samples)) < 1.0 / 32768.0

    def test_feature_export_round_trip(self, tmp_path):
        cfg = FeatureConfig(n_mels=8, context=1)
        feats = extract_stacked(sine_wave(440.0, 0.25), cfg)
        export_features(tmp_path / "f.f32", feats)
        back = load_features(tmp_path / "f.f32")
        assert back.layout == feats.layout
        assert back.values.shape == feats.values.shape
        assert np.allclose(back.values, feats.values, atol=1e-5)
        sidecar = (tmp_path / "f.f32.json").read_text()
        assert '"rows"' in sidecar and '"layout"' in sidecar
