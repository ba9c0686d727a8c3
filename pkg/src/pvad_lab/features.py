"""Acoustic front-end: framing, log mel filterbank, deltas, context stacking.

All functions are pure and deterministic; feature matrices are float64 row
per frame. The pipeline is

    waveform -> frame_signal -> log_mel (static, T x M)
             -> add_deltas (T x 3M) -> stack_context (T x (2c+1)*3M)
"""

from __future__ import annotations

import json
import struct
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import FeatureConfig

LAYOUT_STATIC = "static"
LAYOUT_DELTA = "static_delta_accel"
LAYOUT_STACKED = "context_stacked"


class AudioTooShortError(ValueError):
    """Input signal shorter than one analysis window."""


@dataclass(frozen=True)
class Waveform:
    """Mono audio samples in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if samples.ndim != 1:
            raise ValueError("waveform must be one-dimensional")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class FeatureSequence:
    """T x D feature matrix plus the framing metadata that produced it."""

    values: np.ndarray
    layout: str
    n_mels: int
    context: int = 0
    frame_shift_ms: float = 10.0
    frame_length_ms: float = 20.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape[0] < 1:
            raise ValueError("feature matrix must be 2-D with T >= 1")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature matrix contains non-finite entries")
        expected = {
            LAYOUT_STATIC: self.n_mels,
            LAYOUT_DELTA: 3 * self.n_mels,
            LAYOUT_STACKED: (2 * self.context + 1) * 3 * self.n_mels,
        }
        if self.layout not in expected:
            raise ValueError(f"unknown layout {self.layout!r}")
        if values.shape[1] != expected[self.layout]:
            raise ValueError(
                f"layout {self.layout!r} expects D={expected[self.layout]}, "
                f"got {values.shape[1]}"
            )

    @property
    def n_frames(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])


def hamming_window(length: int) -> np.ndarray:
    n = np.arange(length, dtype=np.float64)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (length - 1))


def num_frames(n_samples: int, win: int, hop: int) -> int:
    if n_samples < win:
        raise AudioTooShortError(
            f"input too short: {n_samples} samples < one {win}-sample window"
        )
    return (n_samples - win) // hop + 1


def frame_signal(w: Waveform, win_ms: float, hop_ms: float) -> np.ndarray:
    """Slice into overlapping frames and apply a Hamming window.

    Returns a (T, win) matrix with T = floor((N - win) / hop) + 1.
    """
    if hop_ms <= 0 or win_ms < hop_ms:
        raise ValueError("need win_ms >= hop_ms > 0")
    win = int(round(win_ms * w.sample_rate / 1000.0))
    hop = int(round(hop_ms * w.sample_rate / 1000.0))
    t = num_frames(len(w), win, hop)
    starts = np.arange(t) * hop
    frames = w.samples[starts[:, None] + np.arange(win)[None, :]]
    return frames * hamming_window(win)


def frames_from_spans(samples: np.ndarray, spans: np.ndarray) -> np.ndarray:
    """Windowed frames at explicit (start, end) sample spans.

    Used for concatenated examples whose frames are aligned per segment
    rather than at consecutive hops of the joined waveform.
    """
    spans = np.asarray(spans, dtype=np.int64)
    if spans.ndim != 2 or spans.shape[1] != 2 or spans.shape[0] < 1:
        raise ValueError("spans must be a (T, 2) array")
    widths = spans[:, 1] - spans[:, 0]
    if not np.all(widths == widths[0]):
        raise ValueError("all frame spans must have equal width")
    if spans[:, 0].min() < 0 or spans[:, 1].max() > samples.size:
        raise ValueError("frame span outside the waveform")
    win = int(widths[0])
    frames = samples[spans[:, 0][:, None] + np.arange(win)[None, :]]
    return frames * hamming_window(win)


def mel_from_hz(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def hz_from_mel(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def fft_size(win: int) -> int:
    n = 1
    while n < win:
        n *= 2
    return n


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filters spanning 0..Nyquist, (n_mels, n_fft//2 + 1)."""
    edges_mel = np.linspace(mel_from_hz(0.0), mel_from_hz(sample_rate / 2.0), n_mels + 2)
    edges_hz = hz_from_mel(edges_mel)
    bin_freqs = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)
    bank = np.zeros((n_mels, bin_freqs.size))
    for m in range(n_mels):
        lo, center, hi = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        rising = (bin_freqs - lo) / (center - lo)
        falling = (hi - bin_freqs) / (hi - center)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def log_mel(
    frames: np.ndarray, cfg: FeatureConfig, filterbank: np.ndarray | None = None
) -> FeatureSequence:
    """Log mel filterbank energies of windowed frames (power spectrum)."""
    frames = np.asarray(frames, dtype=np.float64)
    n_fft = fft_size(frames.shape[1])
    if filterbank is None:
        filterbank = mel_filterbank(cfg.n_mels, n_fft, cfg.sample_rate)
    spectrum = np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2
    energies = spectrum @ filterbank.T
    values = np.log(np.maximum(energies, cfg.log_floor))
    if cfg.mean_norm:
        values = values - values.mean(axis=0, keepdims=True)
    return FeatureSequence(
        values,
        LAYOUT_STATIC,
        n_mels=cfg.n_mels,
        frame_shift_ms=cfg.frame_shift_ms,
        frame_length_ms=cfg.frame_length_ms,
    )


def add_deltas(feats: FeatureSequence, window: int = 2) -> FeatureSequence:
    """Append delta and acceleration coefficients (HTK-style regression)."""
    if feats.layout != LAYOUT_STATIC:
        raise ValueError("add_deltas expects static layout")
    static = feats.values
    d1 = _delta(static, window)
    d2 = _delta(d1, window)
    return FeatureSequence(
        np.concatenate([static, d1, d2], axis=1),
        LAYOUT_DELTA,
        n_mels=feats.n_mels,
        frame_shift_ms=feats.frame_shift_ms,
        frame_length_ms=feats.frame_length_ms,
    )


def _delta(x: np.ndarray, window: int) -> np.ndarray:
    denom = 2.0 * sum(n * n for n in range(1, window + 1))
    padded = np.pad(x, ((window, window), (0, 0)), mode="edge")
    t = x.shape[0]
    out = np.zeros_like(x)
    for n in range(1, window + 1):
        out += n * (padded[window + n : window + n + t] - padded[window - n : window - n + t])
    return out / denom


def stack_context(feats: FeatureSequence, context: int) -> FeatureSequence:
    """Concatenate +-context neighbour frames (edge replication)."""
    if feats.layout != LAYOUT_DELTA:
        raise ValueError("stack_context expects static+delta+accel layout")
    if context < 0:
        raise ValueError("context must be >= 0")
    x = feats.values
    t = x.shape[0]
    padded = np.pad(x, ((context, context), (0, 0)), mode="edge")
    pieces = [padded[off : off + t] for off in range(2 * context + 1)]
    return FeatureSequence(
        np.concatenate(pieces, axis=1),
        LAYOUT_STACKED,
        n_mels=feats.n_mels,
        context=context,
        frame_shift_ms=feats.frame_shift_ms,
        frame_length_ms=feats.frame_length_ms,
    )


def extract_static(w: Waveform, cfg: FeatureConfig) -> FeatureSequence:
    return log_mel(frame_signal(w, cfg.frame_length_ms, cfg.frame_shift_ms), cfg)


def extract_stacked(w: Waveform, cfg: FeatureConfig) -> FeatureSequence:
    return stack_context(add_deltas(extract_static(w, cfg), cfg.delta_window), cfg.context)


def static_from_spans(samples: np.ndarray, spans: np.ndarray, cfg: FeatureConfig) -> FeatureSequence:
    return log_mel(frames_from_spans(samples, spans), cfg)


def finish_pipeline(static: FeatureSequence, cfg: FeatureConfig) -> FeatureSequence:
    return stack_context(add_deltas(static, cfg.delta_window), cfg.context)


# --- WAV and feature-matrix I/O -------------------------------------------


def read_wav(path) -> Waveform:
    """Read a 16-bit PCM mono RIFF file."""
    with wave.open(str(path), "rb") as fh:
        if fh.getnchannels() != 1:
            raise ValueError(f"{path}: expected mono, got {fh.getnchannels()} channels")
        if fh.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit PCM")
        rate = fh.getframerate()
        raw = fh.readframes(fh.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples, rate)


def write_wav(path, w: Waveform) -> None:
    scaled = np.clip(w.samples, -1.0, 1.0) * 32767.0
    data = np.round(scaled).astype("<i2").tobytes()
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(w.sample_rate)
        fh.writeframes(data)


def export_features(path, feats: FeatureSequence) -> None:
    """Write row-major little-endian float32 with a one-line JSON sidecar."""
    path = Path(path)
    path.write_bytes(feats.values.astype("<f4").tobytes(order="C"))
    sidecar = {
        "rows": feats.n_frames,
        "cols": feats.dim,
        "layout": feats.layout,
        "n_mels": feats.n_mels,
        "context": feats.context,
        "frame_shift_ms": feats.frame_shift_ms,
        "frame_length_ms": feats.frame_length_ms,
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, sort_keys=True) + "\n"
    )


def load_features(path) -> FeatureSequence:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    values = raw.reshape(meta["rows"], meta["cols"]).astype(np.float64)
    return FeatureSequence(
        values,
        meta["layout"],
        n_mels=meta["n_mels"],
        context=meta["context"],
        frame_shift_ms=meta["frame_shift_ms"],
        frame_length_ms=meta["frame_length_ms"],
    )
