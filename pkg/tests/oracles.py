"""Independent reference implementations used as test oracles.

Everything here is deliberately written as plain Python loops over the
definitions, separate from the vectorized production code paths.
"""

from __future__ import annotations

import numpy as np


def frame_count_by_loop(n_samples: int, win: int, hop: int) -> int:
    """Count frame start positions directly."""
    count = 0
    start = 0
    while start + win <= n_samples:
        count += 1
        start += hop
    return count


def triangle_response(freq_hz: float, lo: float, center: float, hi: float) -> float:
    """Piecewise triangular filter weight at one frequency."""
    if freq_hz <= lo or freq_hz >= hi:
        return 0.0
    if freq_hz <= center:
        return (freq_hz - lo) / (center - lo)
    return (hi - freq_hz) / (hi - center)


def mel_band_energies_by_loop(power_spectrum, n_mels, n_fft, sample_rate):
    """Filterbank energies from first principles (per-bin loop)."""

    def mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    edges = [hz(m) for m in np.linspace(mel(0.0), mel(sample_rate / 2.0), n_mels + 2)]
    energies = np.zeros(n_mels)
    for m in range(n_mels):
        for k, p in enumerate(power_spectrum):
            f = k * sample_rate / n_fft
            energies[m] += p * triangle_response(f, edges[m], edges[m + 1], edges[m + 2])
    return energies


def delta_by_loop(x: np.ndarray, window: int) -> np.ndarray:
    """Regression-formula deltas with edge replication, frame by frame."""
    t_len, dim = x.shape
    out = np.zeros_like(x)
    denom = 2.0 * sum(n * n for n in range(1, window + 1))
    for t in range(t_len):
        acc = np.zeros(dim)
        for n in range(1, window + 1):
            right = x[min(t + n, t_len - 1)]
            left = x[max(t - n, 0)]
            acc += n * (right - left)
        out[t] = acc / denom
    return out


def ap_by_threshold_sweep(scores, labels) -> float:
    """Brute-force AP: walk the stable descending ranking, average precision
    at every rank where a positive sits."""
    items = sorted(
        [(float(s), i, int(l)) for i, (s, l) in enumerate(zip(scores, labels))],
        key=lambda item: (-item[0], item[1]),
    )
    n_pos = sum(l for _, _, l in items)
    if n_pos == 0:
        raise ValueError("no positives")
    seen_pos = 0
    total = 0.0
    for rank, (_, _, label) in enumerate(items, start=1):
        if label == 1:
            seen_pos += 1
            total += seen_pos / rank
    return total / n_pos


def pooled_map_by_sweep(posteriors, labels) -> float:
    """Micro-mean AP over the pooled (frame, class) set, class 1 first."""
    scores, hits = [], []
    for p, q in zip(posteriors[:, 1], labels):
        scores.append(float(p))
        hits.append(1 if q == 1 else 0)
    for p, q in zip(posteriors[:, 0], labels):
        scores.append(float(p))
        hits.append(1 if q == 0 else 0)
    return ap_by_threshold_sweep(scores, hits)


def concat_labels_by_bookkeeping(utt_labels, target_index, gap_frame_counts):
    """Re-derive q of a concatenation by tracking per-segment offsets."""
    q = []
    for k, labels in enumerate(utt_labels):
        if k > 0:
            q.extend([0] * gap_frame_counts[k - 1])
        if k == target_index:
            q.extend(int(v) for v in labels)
        else:
            q.extend([0] * len(labels))
    return np.array(q, dtype=np.int8)


def snr_by_direct_measure(clean, mixed, frame_spans, frame_labels) -> float:
    """Sample-loop SNR re-measurement using the span/label definition."""
    speech = np.zeros(len(clean), dtype=bool)
    for (lo, hi), lab in zip(frame_spans, frame_labels):
        if lab == 1:
            for s in range(lo, hi):
                speech[s] = True
    p_speech = float(np.mean(np.asarray(clean)[speech] ** 2))
    noise = np.asarray(mixed) - np.asarray(clean)
    p_noise = float(np.mean(noise**2))
    return 10.0 * np.log10(p_speech / p_noise)
