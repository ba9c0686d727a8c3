"""Average precision metrics and the embedding-similarity study.

AP is step-wise (non-interpolated) over a descending stable sort of the
scores; mAP is the micro-mean: one AP over the pooled (frame, class)
prediction set where every frame contributes both class scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .augment import augment_embedding
from .config import AugConfig, FeatureConfig
from .corpus import TrainingExample, Utterance, as_rng
from .features import extract_static, finish_pipeline
from .pvad import pvad_forward, standard_vad_forward
from .speaker import cosine_similarity, encode


def average_precision(scores, labels) -> float:
    """Step-wise AP; ties are broken by original (stable) order."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(np.int64)
    if scores.size != labels.size:
        raise ValueError("scores and labels must have equal length")
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("AP undefined: no positive labels")
    order = np.argsort(-scores, kind="stable")
    hits = labels[order] == 1
    cum_pos = np.cumsum(hits)
    ranks = np.arange(1, scores.size + 1)
    precision_at = cum_pos / ranks
    return float(precision_at[hits].sum() / n_pos)


def pooled_average_precision(posteriors: np.ndarray, labels: np.ndarray) -> float:
    """Micro-mean AP over the pooled per-class prediction set.

    posteriors: (N, 2) rows [P(class 0), P(class 1)]; labels: 0/1 per frame.
    Frames enter once per class: (score, hit) = (p1, q) and (p0, 1-q),
    class 1 entries first to keep the pooling order deterministic.
    """
    labels = np.asarray(labels).ravel().astype(np.int64)
    scores = np.concatenate([posteriors[:, 1], posteriors[:, 0]])
    hits = np.concatenate([labels == 1, labels == 0]).astype(np.int64)
    return average_precision(scores, hits)


def precision_recall_rows(scores, labels, max_rows: int = 512):
    """(threshold, precision, recall) along the ranked score list."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(np.int64)
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    hits = labels[order] == 1
    n_pos = int(hits.sum())
    cum_pos = np.cumsum(hits)
    ranks = np.arange(1, scores.size + 1)
    precision = cum_pos / ranks
    recall = cum_pos / max(n_pos, 1)
    idx = np.linspace(0, scores.size - 1, min(max_rows, scores.size)).astype(int)
    return [(float(sorted_scores[i]), float(precision[i]), float(recall[i]))
            for i in idx]


# --- model evaluation ---------------------------------------------------------


def collect_pvad_scores(pvad_params: nn.ModelParams, examples,
                        speaker_params: nn.ModelParams, feat_cfg: FeatureConfig):
    """Pooled (posteriors, labels) over a test set, real-enrollment mode."""
    if not examples:
        raise ValueError("empty test set")
    post_parts, label_parts = [], []
    for ex in examples:
        emb = encode(finish_pipeline(ex.conditioning, feat_cfg), speaker_params)
        post = pvad_forward(ex.input_features, emb, pvad_params, mode="eval")
        post_parts.append(post)
        label_parts.append(ex.labels)
    return np.concatenate(post_parts), np.concatenate(label_parts)


def collect_vad_scores(vad_params: nn.ModelParams, examples):
    if not examples:
        raise ValueError("empty test set")
    post_parts, label_parts = [], []
    for ex in examples:
        post = standard_vad_forward(ex.input_features, vad_params, mode="eval")
        post_parts.append(post)
        label_parts.append(ex.labels)
    return np.concatenate(post_parts), np.concatenate(label_parts)


def metrics_from_scores(posteriors: np.ndarray, labels: np.ndarray) -> dict:
    labels = np.asarray(labels).ravel().astype(np.int64)
    return {
        "ap_ns_nts": average_precision(posteriors[:, 0], labels == 0),
        "ap_ts": average_precision(posteriors[:, 1], labels == 1),
        "map": pooled_average_precision(posteriors, labels),
        "n_frames": int(labels.size),
    }


def evaluate_pvad(pvad_params: nn.ModelParams, examples,
                  speaker_params: nn.ModelParams, feat_cfg: FeatureConfig) -> dict:
    """AP (ns/nts), AP (ts) and micro-mean mAP over pooled test frames."""
    post, labels = collect_pvad_scores(pvad_params, examples, speaker_params, feat_cfg)
    return metrics_from_scores(post, labels)


def evaluate_standard_vad(vad_params: nn.ModelParams, examples) -> dict:
    """Baseline scored against the same target-speech labels."""
    post, labels = collect_vad_scores(vad_params, examples)
    return metrics_from_scores(post, labels)


# --- cosine-similarity study --------------------------------------------------


HIST_BIN_WIDTH = 0.05


@dataclass(frozen=True)
class SimilarityStudy:
    """Raw cosine similarities per panel and pair type."""

    panels: dict  # (panel, pair_type) -> np.ndarray of similarities

    def histogram_rows(self):
        """(panel, pair_type, bin_left, count) rows, bins 0.05 over [-1, 1]."""
        edges = np.round(np.arange(-1.0, 1.0 + HIST_BIN_WIDTH, HIST_BIN_WIDTH), 10)
        rows = []
        for (panel, pair_type), values in sorted(self.panels.items()):
            counts, _ = np.histogram(values, bins=edges)
            for left, count in zip(edges[:-1], counts):
                rows.append((panel, pair_type, float(left), int(count)))
        return rows


def _sample_pairs(rng, n_items: int, n_pairs: int):
    n_distinct = n_items * (n_items - 1) // 2
    if n_pairs >= n_distinct:
        return [(i, j) for i in range(n_items) for j in range(i + 1, n_items)]
    pairs = set()
    while len(pairs) < n_pairs:
        i, j = rng.integers(0, n_items, size=2)
        if i != j:
            pairs.add((min(int(i), int(j)), max(int(i), int(j))))
    return sorted(pairs)


def similarity_study(speaker_params: nn.ModelParams, utterances,
                     feat_cfg: FeatureConfig, aug_cfg: AugConfig, rng,
                     max_pairs: int = 4000, n_aug_draws: int = 2) -> SimilarityStudy:
    """Three-panel cosine-similarity comparison.

    (a) different utterances, unaugmented: same-speaker vs cross-speaker.
    (b) each utterance against itself, unaugmented (degenerate at 1.0),
        plus the cross-speaker reference.
    (c) two independent augmentations of the same utterance, plus the
        cross-speaker reference.
    """
    rng = as_rng(rng)
    utts = list(utterances)
    if len(utts) < 2:
        raise ValueError("similarity study needs at least 2 utterances")
    statics = [extract_static(u.audio, feat_cfg) for u in utts]
    embeds = [encode(finish_pipeline(s, feat_cfg), speaker_params) for s in statics]
    speaker_of = [u.speaker_id for u in utts]

    same, cross = [], []
    for i, j in _sample_pairs(rng, len(utts), min(max_pairs, len(utts) * 4)):
        sim = cosine_similarity(embeds[i], embeds[j])
        if speaker_of[i] is not None and speaker_of[i] == speaker_of[j]:
            same.append(sim)
        else:
            cross.append(sim)
    self_sims = [cosine_similarity(e, e) for e in embeds]

    aug_pairs = []
    for idx in range(len(utts)):
        draws = [
            augment_embedding(statics[idx], speaker_params, feat_cfg, aug_cfg,
                              rng, "train")
            for _ in range(n_aug_draws)
        ]
        for a in range(len(draws)):
            for b in range(a + 1, len(draws)):
                aug_pairs.append(cosine_similarity(draws[a], draws[b]))

    cross_arr = np.array(cross)
    return SimilarityStudy(panels={
        ("a", "same_speaker"): np.array(same),
        ("a", "cross_speaker"): cross_arr,
        ("b", "same_utterance"): np.array(self_sims),
        ("b", "cross_speaker"): cross_arr,
        ("c", "same_utterance_augmented"): np.array(aug_pairs),
        ("c", "cross_speaker"): cross_arr,
    })


def write_similarity_csv(path, study: SimilarityStudy, config_hash: str = "") -> None:
    lines = []
    if config_hash:
        lines.append(f"# config_hash={config_hash}")
    lines.append("panel,pair_type,bin_left,count")
    for panel, pair_type, left, count in study.histogram_rows():
        lines.append(f"{panel},{pair_type},{left:.2f},{count}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
