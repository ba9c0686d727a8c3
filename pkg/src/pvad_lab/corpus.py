"""Synthetic desk-scale corpus: speakers, utterances, noise and examples.

Speakers are harmonic sources shaped by formant resonators; per-utterance
randomness (pitch contour, formant trajectories, envelope) makes embeddings
of one speaker vary across utterances while staying separable from other
speakers.

Concatenation semantics: examples are built from hop-aligned segments and
featurized per segment, so the label sequence of a concatenation is exactly
the concatenation of the per-segment label sequences (gap frames are 0).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .config import CorpusConfig, FeatureConfig, NoiseConfig
from .features import (
    FeatureSequence,
    Waveform,
    finish_pipeline,
    num_frames,
    read_wav,
    static_from_spans,
    write_wav,
)

log = logging.getLogger(__name__)


class SilentUtteranceError(ValueError):
    """SNR is undefined because the utterance has no speech frames."""


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class SpeakerSpec:
    """Parametric voice: pitch, harmonic timbre and formant resonances."""

    seed: int
    fundamental_freq_hz: float
    harmonic_profile: np.ndarray
    formant_centers_hz: np.ndarray
    formant_bandwidths_hz: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "harmonic_profile",
                           np.asarray(self.harmonic_profile, dtype=np.float64))
        object.__setattr__(self, "formant_centers_hz",
                           np.asarray(self.formant_centers_hz, dtype=np.float64))
        object.__setattr__(self, "formant_bandwidths_hz",
                           np.asarray(self.formant_bandwidths_hz, dtype=np.float64))
        if self.fundamental_freq_hz <= 0:
            raise ValueError("fundamental frequency must be positive")
        if np.any(self.harmonic_profile < 0):
            raise ValueError("harmonic profile must be nonnegative")
        if np.any(self.formant_centers_hz <= 0) or np.any(self.formant_bandwidths_hz <= 0):
            raise ValueError("formant parameters must be positive")


@dataclass(frozen=True)
class Utterance:
    """Waveform plus per-frame VAD labels aligned to the feature framing."""

    audio: Waveform
    vad_labels: np.ndarray
    utterance_id: str
    speaker_id: str | None = None

    def __post_init__(self):
        labels = np.asarray(self.vad_labels, dtype=np.int8)
        object.__setattr__(self, "vad_labels", labels)
        if labels.ndim != 1:
            raise ValueError("vad_labels must be one-dimensional")
        if labels.size and not np.all((labels == 0) | (labels == 1)):
            raise ValueError("vad_labels must be 0/1")

    @property
    def n_frames(self) -> int:
        return int(self.vad_labels.size)


@dataclass(frozen=True)
class TrainingExample:
    """One minibatch element: input features, conditioning features, labels.

    `conditioning` holds static features of either a reserved enrollment
    utterance or (enrollment-less) one of the input's own utterances, always
    taken from clean audio. `audio` and `frame_spans` keep the (possibly
    noise-mixed) input waveform and the sample span of every feature frame.
    """

    input_features: FeatureSequence
    conditioning: FeatureSequence
    labels: np.ndarray
    input_utterance_ids: tuple[str, ...]
    conditioning_utterance_id: str
    audio: np.ndarray
    frame_spans: np.ndarray
    sample_rate: int
    gap_frames: tuple[int, ...] = ()  # realized silence lengths, in frames

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int8)
        object.__setattr__(self, "labels", labels)
        if labels.size != self.input_features.n_frames:
            raise ValueError("label length must equal input feature length")


def speaker_frame_params(cfg: FeatureConfig) -> tuple[int, int]:
    win, hop = cfg.win_samples, cfg.hop_samples
    if win % hop != 0:
        raise ValueError("corpus synthesis requires win_samples % hop_samples == 0")
    return win, hop


# --- speaker and utterance synthesis ---------------------------------------


def make_speakers(n: int, rng, sample_rate: int = 16000) -> list[SpeakerSpec]:
    """Sample n distinct voices; pitch is spread evenly with jitter."""
    rng = as_rng(rng)
    specs = []
    f0_grid = np.geomspace(90.0, 260.0, n)
    order = rng.permutation(n)
    for k in range(n):
        f0 = float(f0_grid[order[k]] * (1.0 + rng.uniform(-0.03, 0.03)))
        gamma = rng.uniform(0.7, 1.3)
        harmonics = np.arange(1, 13, dtype=np.float64)
        profile = harmonics ** (-gamma) * (1.0 + rng.uniform(-0.3, 0.3, harmonics.size))
        f1 = rng.uniform(300.0, 900.0)
        f2 = rng.uniform(max(f1 + 250.0, 1000.0), 2400.0)
        f3 = rng.uniform(max(f2 + 300.0, 2500.0), 3400.0)
        bandwidths = np.array([
            rng.uniform(60.0, 120.0),
            rng.uniform(80.0, 160.0),
            rng.uniform(100.0, 200.0),
        ])
        specs.append(SpeakerSpec(
            seed=int(rng.integers(0, 2**31 - 1)),
            fundamental_freq_hz=f0,
            harmonic_profile=np.clip(profile, 0.05, None),
            formant_centers_hz=np.array([f1, f2, f3]),
            formant_bandwidths_hz=bandwidths,
        ))
    return specs


def _slow_curve(n: int, rng, n_components: int = 3, rate_hz_max: float = 3.0,
                sample_rate: int = 16000) -> np.ndarray:
    """Smooth random curve in roughly [-1, 1] for contours and envelopes."""
    t = np.arange(n) / sample_rate
    out = np.zeros(n)
    for _ in range(n_components):
        rate = rng.uniform(0.3, rate_hz_max)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        out += rng.uniform(0.3, 1.0) * np.sin(2.0 * np.pi * rate * t + phase)
    peak = np.max(np.abs(out))
    return out / peak if peak > 0 else out


def _resonator_coeffs(center_hz: float, bandwidth_hz: float, sample_rate: int):
    r = np.exp(-np.pi * bandwidth_hz / sample_rate)
    theta = 2.0 * np.pi * center_hz / sample_rate
    a = np.array([1.0, -2.0 * r * np.cos(theta), r * r])
    b = np.array([1.0 - r])
    return b, a


def synth_utterance(spk: SpeakerSpec, duration_s: float, rng_seed,
                    feat_cfg: FeatureConfig, utterance_id: str = "",
                    speaker_id: str | None = None) -> Utterance:
    """One synthetic utterance with frame-aligned length and VAD labels.

    Leading/trailing silences are 0.1-0.4 s; the voiced region carries the
    speaker's harmonic timbre with per-utterance pitch/formant movement.
    """
    if duration_s < 0.5:
        raise ValueError(f"duration_s must be >= 0.5, got {duration_s}")
    rng = as_rng(rng_seed)
    sr = feat_cfg.sample_rate
    win, hop = speaker_frame_params(feat_cfg)

    n_raw = int(round(duration_s * sr))
    t_frames = num_frames(n_raw, win, hop)
    n = (t_frames - 1) * hop + win  # trim to exact frame coverage

    edge_cap = max(0.1, (n / sr - 0.25) / 2.0)
    lead = rng.uniform(0.1, min(0.4, edge_cap))
    trail = rng.uniform(0.1, min(0.4, edge_cap))
    a = int(round(lead * sr))
    b = n - int(round(trail * sr))

    voiced_n = b - a
    f0 = spk.fundamental_freq_hz * (1.0 + rng.uniform(-0.05, 0.05))
    f0_contour = f0 * (1.0 + 0.06 * _slow_curve(voiced_n, rng, sample_rate=sr))
    phase = 2.0 * np.pi * np.cumsum(f0_contour) / sr
    source = np.zeros(voiced_n)
    f0_max = f0_contour.max()
    for k, amp in enumerate(spk.harmonic_profile, start=1):
        if k * f0_max >= 0.45 * sr:
            break
        source += amp * np.sin(k * phase)

    # per-utterance "content": formants wander chunk to chunk like vowels
    voiced = np.zeros(voiced_n)
    n_chunks = int(rng.integers(2, 6))
    bounds = np.linspace(0, voiced_n, n_chunks + 1).astype(int)
    for fc, bw in zip(spk.formant_centers_hz, spk.formant_bandwidths_hz):
        zi = np.zeros(2)
        filtered = np.empty(voiced_n)
        for c in range(n_chunks):
            lo_i, hi_i = bounds[c], bounds[c + 1]
            center = fc * (1.0 + rng.uniform(-0.12, 0.12))
            bcoef, acoef = _resonator_coeffs(min(center, 0.45 * sr), bw, sr)
            filtered[lo_i:hi_i], zi = lfilter(bcoef, acoef, source[lo_i:hi_i], zi=zi)
        voiced += filtered

    envelope = 0.85 + 0.15 * _slow_curve(voiced_n, rng, sample_rate=sr)
    fade = min(int(0.01 * sr), voiced_n // 2)
    if fade > 0:
        ramp = 0.5 - 0.5 * np.cos(np.linspace(0.0, np.pi, fade))
        envelope[:fade] *= ramp
        envelope[-fade:] *= ramp[::-1]
    voiced *= envelope

    samples = np.zeros(n)
    samples[a:b] = voiced
    peak = np.max(np.abs(samples))
    if peak > 0:
        samples *= 0.5 / peak

    starts = np.arange(t_frames) * hop
    labels = ((starts < b) & (starts + win > a)).astype(np.int8)
    return Utterance(
        audio=Waveform(samples, sr),
        vad_labels=labels,
        utterance_id=utterance_id or f"utt{int(rng.integers(0, 1 << 30))}",
        speaker_id=speaker_id,
    )


# --- noise bank -------------------------------------------------------------


def synth_noise(kind: str, duration_s: float, rng, sample_rate: int = 16000) -> Waveform:
    """Parametric stand-ins for real noise recordings."""
    rng = as_rng(rng)
    n = int(round(duration_s * sample_rate))
    white = rng.normal(size=n)
    if kind == "white":
        out = white
    elif kind == "pink":
        out = _shape_spectrum(white, exponent=-0.5)
    elif kind == "brown":
        out = _shape_spectrum(white, exponent=-1.0)
    elif kind == "hum":
        t = np.arange(n) / sample_rate
        out = np.zeros(n)
        for k in (1, 2, 3):
            out += (1.0 / k) * np.sin(2.0 * np.pi * 50.0 * k * t + rng.uniform(0, 2 * np.pi))
        out += 0.05 * white
    elif kind == "machine":
        t = np.arange(n) / sample_rate
        am = 0.6 + 0.4 * np.square(np.sin(2.0 * np.pi * rng.uniform(3.0, 8.0) * t))
        tone = np.sin(2.0 * np.pi * rng.uniform(120.0, 400.0) * t)
        out = am * (_shape_spectrum(white, exponent=-0.3) + 0.5 * tone)
    elif kind == "crowd":
        # speech-shaped noise with syllabic-rate amplitude modulation
        shaped = _shape_spectrum(white, exponent=-0.5)
        bcoef, acoef = _resonator_coeffs(500.0, 600.0, sample_rate)
        shaped = lfilter(bcoef, acoef, shaped)
        am = 0.5 + 0.5 * np.abs(_slow_curve(n, rng, n_components=5,
                                            rate_hz_max=6.0, sample_rate=sample_rate))
        out = shaped * am
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    peak = np.max(np.abs(out))
    if peak > 0:
        out = out * (0.5 / peak)
    return Waveform(out, sample_rate)


def _shape_spectrum(x: np.ndarray, exponent: float) -> np.ndarray:
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(x.size)
    gains = np.ones_like(freqs)
    nonzero = freqs > 0
    gains[nonzero] = freqs[nonzero] ** exponent
    gains[0] = 0.0
    return np.fft.irfft(spec * gains, n=x.size)


@dataclass(frozen=True)
class NoiseBank:
    """Named noise clips split into training and held-out test kinds."""

    train_clips: tuple[tuple[str, Waveform], ...]
    test_clips: tuple[tuple[str, Waveform], ...]

    def pick_train(self, rng) -> Waveform:
        return self.train_clips[as_rng(rng).integers(len(self.train_clips))][1]

    def pick_test(self, rng) -> Waveform:
        return self.test_clips[as_rng(rng).integers(len(self.test_clips))][1]


def make_noise_bank(cfg: NoiseConfig, rng, sample_rate: int = 16000) -> NoiseBank:
    rng = as_rng(rng)
    train, test = [], []
    for kinds, bucket in ((cfg.train_kinds, train), (cfg.test_kinds, test)):
        for kind in kinds:
            for i in range(cfg.clips_per_kind):
                clip = synth_noise(kind, cfg.clip_duration_s, rng, sample_rate)
                bucket.append((f"{kind}_{i}", clip))
    return NoiseBank(tuple(train), tuple(test))


# --- SNR mixing -------------------------------------------------------------


def frame_spans_for(utt: Utterance, cfg: FeatureConfig) -> np.ndarray:
    win, hop = cfg.win_samples, cfg.hop_samples
    starts = np.arange(utt.n_frames) * hop
    return np.stack([starts, starts + win], axis=1)


def speech_sample_mask(n_samples: int, spans: np.ndarray, labels: np.ndarray) -> np.ndarray:
    mask = np.zeros(n_samples, dtype=bool)
    for (lo, hi), lab in zip(spans, labels):
        if lab:
            mask[lo:hi] = True
    return mask


def mix_noise_into(samples: np.ndarray, spans: np.ndarray, labels: np.ndarray,
                   noise: Waveform, snr_db: float, rng) -> np.ndarray:
    """Add noise scaled so speech-power / noise-power matches snr_db.

    Speech power is measured over samples covered by label-1 frames; noise
    power over the whole signal. snr_db=inf returns the input unchanged.
    """
    if np.isinf(snr_db) and snr_db > 0:
        return samples.copy()
    rng = as_rng(rng)
    n = samples.size
    mask = speech_sample_mask(n, spans, labels)
    if not mask.any():
        raise SilentUtteranceError("SNR undefined: utterance has no speech frames")

    raw = noise.samples
    if raw.size >= n:
        offset = int(rng.integers(0, raw.size - n + 1))
        segment = raw[offset : offset + n]
    else:
        offset = int(rng.integers(0, raw.size))
        reps = int(np.ceil((offset + n) / raw.size))
        segment = np.tile(raw, reps)[offset : offset + n]

    p_speech = float(np.mean(samples[mask] ** 2))
    p_noise = float(np.mean(segment**2))
    if p_noise <= 0:
        raise ValueError("noise segment is silent; cannot scale to target SNR")
    target = p_speech / (10.0 ** (snr_db / 10.0))
    mixed = samples + segment * np.sqrt(target / p_noise)
    if np.max(np.abs(mixed)) > 1.0:
        log.warning("noise mix clipped (peak %.3f)", float(np.max(np.abs(mixed))))
        mixed = np.clip(mixed, -1.0, 1.0)
    return mixed


def mix_noise(u: Utterance, noise: Waveform, snr_db: float, rng_seed,
              cfg: FeatureConfig) -> Utterance:
    """Noise-mixed copy of an utterance; VAD labels are unchanged."""
    if noise.sample_rate != u.audio.sample_rate:
        raise ValueError("noise sample rate differs from utterance")
    spans = frame_spans_for(u, cfg)
    mixed = mix_noise_into(u.audio.samples, spans, u.vad_labels, noise,
                           snr_db, rng_seed)
    return Utterance(
        audio=Waveform(mixed, u.audio.sample_rate),
        vad_labels=u.vad_labels.copy(),
        utterance_id=u.utterance_id,
        speaker_id=u.speaker_id,
    )


def measure_snr(clean: np.ndarray, mixed: np.ndarray, spans: np.ndarray,
                labels: np.ndarray) -> float:
    """Re-measure SNR of a mix using the same power definitions."""
    mask = speech_sample_mask(clean.size, spans, labels)
    if not mask.any():
        raise SilentUtteranceError("SNR undefined: no speech frames")
    p_speech = float(np.mean(clean[mask] ** 2))
    p_noise = float(np.mean((mixed - clean) ** 2))
    return 10.0 * np.log10(p_speech / p_noise)


# --- concatenated examples ---------------------------------------------------


def _silence_segment(gap_frames: int, cfg: FeatureConfig):
    win, hop = speaker_frame_params(cfg)
    if gap_frames <= 0:
        return np.zeros(0), np.zeros(0, dtype=np.int8)
    n = (gap_frames - 1) * hop + win
    return np.zeros(n), np.zeros(gap_frames, dtype=np.int8)


def _concat_segments(segments, cfg: FeatureConfig):
    """Join (samples, labels) segments; frames stay aligned per segment."""
    win, hop = speaker_frame_params(cfg)
    audio_parts, span_parts, label_parts = [], [], []
    offset = 0
    for samples, labels in segments:
        t = labels.size
        if t:
            starts = offset + np.arange(t) * hop
            span_parts.append(np.stack([starts, starts + win], axis=1))
            label_parts.append(labels)
        audio_parts.append(samples)
        offset += samples.size
    audio = np.concatenate(audio_parts) if audio_parts else np.zeros(0)
    spans = np.concatenate(span_parts) if span_parts else np.zeros((0, 2), dtype=np.int64)
    labels = np.concatenate(label_parts) if label_parts else np.zeros(0, dtype=np.int8)
    return audio, spans, labels


def _assemble_example(utts, target_flags, conditioning: Utterance,
                      gap_range_s, rng, cfg: FeatureConfig,
                      noise: Waveform | None, snr_db: float) -> TrainingExample:
    win, hop = speaker_frame_params(cfg)
    segments = []
    q_parts = []
    s_parts = []
    gap_frame_list = []
    for k, (utt, is_target) in enumerate(zip(utts, target_flags)):
        if k > 0:
            gap_s = rng.uniform(gap_range_s[0], gap_range_s[1])
            gap_frames = int(round(gap_s * cfg.sample_rate / hop))
            gap_frame_list.append(gap_frames)
            gap_audio, gap_labels = _silence_segment(gap_frames, cfg)
            segments.append((gap_audio, gap_labels))
            q_parts.append(np.zeros(gap_labels.size, dtype=np.int8))
            s_parts.append(gap_labels)
        segments.append((utt.audio.samples, utt.vad_labels))
        q_parts.append(utt.vad_labels if is_target else np.zeros(utt.n_frames, dtype=np.int8))
        s_parts.append(utt.vad_labels)

    audio, spans, s_labels = _concat_segments(segments, cfg)
    q_labels = np.concatenate(q_parts)

    if noise is not None and np.isfinite(snr_db):
        audio = mix_noise_into(audio, spans, s_labels, noise, snr_db, rng)

    static = static_from_spans(audio, spans, cfg)
    stacked = finish_pipeline(static, cfg)
    cond_static = static_from_spans(
        conditioning.audio.samples, frame_spans_for(conditioning, cfg), cfg
    )
    return TrainingExample(
        input_features=stacked,
        conditioning=cond_static,
        labels=q_labels,
        input_utterance_ids=tuple(u.utterance_id for u in utts),
        conditioning_utterance_id=conditioning.utterance_id,
        audio=audio,
        frame_spans=spans,
        sample_rate=cfg.sample_rate,
        gap_frames=tuple(gap_frame_list),
    )


def build_enroll_less_example(utts, target_index: int, gap_range_s, rng_seed,
                              cfg: FeatureConfig, noise: Waveform | None = None,
                              snr_db: float = np.inf) -> TrainingExample:
    """Concatenate 1-3 utterances; conditioning is the target's own features.

    The target utterance appears in the input and also provides the
    conditioning features (clean, pre-mixing).
    """
    if not 1 <= len(utts) <= 3:
        raise ValueError(f"need 1-3 utterances, got {len(utts)}")
    if not 0 <= target_index < len(utts):
        raise ValueError(f"target_index {target_index} out of range")
    rng = as_rng(rng_seed)
    flags = [k == target_index for k in range(len(utts))]
    return _assemble_example(utts, flags, utts[target_index], gap_range_s,
                             rng, cfg, noise, snr_db)


def build_enroll_full_example(target_utts, distractor_utts, rng_seed,
                              cfg: FeatureConfig, gap_range_s=(0.0, 0.5),
                              noise: Waveform | None = None,
                              snr_db: float = np.inf) -> TrainingExample:
    """Reserve one target utterance as enrollment; concatenate the rest.

    The enrollment utterance never appears in the input mix.
    """
    if len(target_utts) < 2:
        raise ValueError("need at least 2 target utterances to reserve enrollment")
    speaker_ids = {u.speaker_id for u in target_utts}
    if len(speaker_ids) != 1 or None in speaker_ids:
        raise ValueError("target utterances must share one speaker_id")
    target_speaker = target_utts[0].speaker_id
    if any(d.speaker_id == target_speaker for d in distractor_utts):
        raise ValueError("distractors must come from other speakers")
    rng = as_rng(rng_seed)

    enroll_idx = int(rng.integers(len(target_utts)))
    enrollment = target_utts[enroll_idx]
    remaining = [u for k, u in enumerate(target_utts) if k != enroll_idx]
    pool = remaining + list(distractor_utts)
    if not 1 <= len(pool) <= 3:
        raise ValueError(f"input would hold {len(pool)} utterances, need 1-3")
    order = rng.permutation(len(pool))
    utts = [pool[k] for k in order]
    flags = [u.speaker_id == target_speaker for u in utts]
    return _assemble_example(utts, flags, enrollment, gap_range_s, rng, cfg,
                             noise, snr_db)


# --- corpus assembly ---------------------------------------------------------


@dataclass(frozen=True)
class Corpus:
    """All utterances of one synthetic dataset plus its split and noise bank."""

    speakers: tuple[SpeakerSpec, ...]
    train: tuple[Utterance, ...]
    val: tuple[Utterance, ...]
    test: tuple[Utterance, ...]
    noise: NoiseBank

    @property
    def all_utterances(self) -> tuple[Utterance, ...]:
        return self.train + self.val + self.test

    def by_speaker(self, split: tuple[Utterance, ...]) -> dict[str, list[Utterance]]:
        groups: dict[str, list[Utterance]] = {}
        for utt in split:
            groups.setdefault(utt.speaker_id, []).append(utt)
        return groups


def build_corpus(corpus_cfg: CorpusConfig, noise_cfg: NoiseConfig,
                 feat_cfg: FeatureConfig, seed: int) -> Corpus:
    """Deterministic corpus: every utterance derives its own rng stream."""
    master = np.random.default_rng((seed, 0xC0))
    speakers = make_speakers(corpus_cfg.n_speakers, master, feat_cfg.sample_rate)
    train, val, test = [], [], []
    n_train = corpus_cfg.train_utts_per_speaker
    n_val = corpus_cfg.val_utts_per_speaker
    for s_idx, spk in enumerate(speakers):
        for u_idx in range(corpus_cfg.utts_per_speaker):
            rng = np.random.default_rng((seed, s_idx, u_idx))
            duration = rng.uniform(corpus_cfg.duration_min_s, corpus_cfg.duration_max_s)
            utt = synth_utterance(
                spk, duration, rng, feat_cfg,
                utterance_id=f"s{s_idx:03d}_u{u_idx:03d}",
                speaker_id=f"spk{s_idx:03d}",
            )
            if u_idx < n_train:
                train.append(utt)
            elif u_idx < n_train + n_val:
                val.append(utt)
            else:
                test.append(utt)
    bank = make_noise_bank(noise_cfg, np.random.default_rng((seed, 0xA0)),
                           feat_cfg.sample_rate)
    return Corpus(tuple(speakers), tuple(train), tuple(val), tuple(test), bank)


def strip_speaker_ids(utts) -> list[Utterance]:
    """Enrollment-less view of a split: speaker identities removed."""
    return [
        Utterance(u.audio, u.vad_labels.copy(), u.utterance_id, None)
        for u in utts
    ]


# --- manifest I/O ------------------------------------------------------------


def save_corpus(corpus: Corpus, out_dir) -> None:
    """JSON-lines manifest plus one WAV and one labels file per utterance."""
    out_dir = Path(out_dir)
    (out_dir / "wavs").mkdir(parents=True, exist_ok=True)
    (out_dir / "labels").mkdir(parents=True, exist_ok=True)
    (out_dir / "noises").mkdir(parents=True, exist_ok=True)
    records = []
    for split, utts in (("train", corpus.train), ("val", corpus.val), ("test", corpus.test)):
        for utt in utts:
            wav_path = f"wavs/{utt.utterance_id}.wav"
            labels_path = f"labels/{utt.utterance_id}.json"
            write_wav(out_dir / wav_path, utt.audio)
            (out_dir / labels_path).write_text(
                json.dumps([int(v) for v in utt.vad_labels]) + "\n"
            )
            records.append({
                "utterance_id": utt.utterance_id,
                "speaker_id": utt.speaker_id,
                "wav_path": wav_path,
                "labels_path": labels_path,
                "duration_s": round(utt.audio.duration_s, 6),
                "split": split,
            })
    with open(out_dir / "manifest.jsonl", "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    noise_records = []
    for role, clips in (("train", corpus.noise.train_clips), ("test", corpus.noise.test_clips)):
        for name, clip in clips:
            path = f"noises/{name}.wav"
            write_wav(out_dir / path, clip)
            noise_records.append({"name": name, "role": role, "wav_path": path})
    with open(out_dir / "noises.jsonl", "w") as fh:
        for rec in noise_records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_corpus(in_dir) -> Corpus:
    in_dir = Path(in_dir)
    manifest = in_dir / "manifest.jsonl"
    if not manifest.exists():
        raise FileNotFoundError(f"no manifest.jsonl under {in_dir}")
    splits: dict[str, list[Utterance]] = {"train": [], "val": [], "test": []}
    for line in manifest.read_text().splitlines():
        rec = json.loads(line)
        audio = read_wav(in_dir / rec["wav_path"])
        labels = np.array(json.loads((in_dir / rec["labels_path"]).read_text()), dtype=np.int8)
        utt = Utterance(audio, labels, rec["utterance_id"], rec["speaker_id"])
        splits[rec["split"]].append(utt)
    train_clips, test_clips = [], []
    noises = in_dir / "noises.jsonl"
    if noises.exists():
        for line in noises.read_text().splitlines():
            rec = json.loads(line)
            clip = read_wav(in_dir / rec["wav_path"])
            (train_clips if rec["role"] == "train" else test_clips).append(
                (rec["name"], clip)
            )
    bank = NoiseBank(tuple(train_clips), tuple(test_clips))
    return Corpus((), tuple(splits["train"]), tuple(splits["val"]),
                  tuple(splits["test"]), bank)
