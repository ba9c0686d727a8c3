"""Training loops for the standard VAD baseline and the four PVAD regimes.

Batch loss is the mean over all frames in the minibatch of the negative log
posterior of the true class. Enrollment-less example concatenations are
regenerated fresh every epoch; validation examples (and their conditioning
embeddings) are fixed once per run so the early-stop signal is stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .augment import augment_embedding
from .config import AugConfig, FeatureConfig, NoiseConfig, TrainConfig
from .corpus import (
    Corpus,
    NoiseBank,
    TrainingExample,
    as_rng,
    build_enroll_full_example,
    build_enroll_less_example,
)
from .features import FeatureSequence, finish_pipeline
from .pvad import PvadConfig, _forward_cached, _backward, _with_embedding, init_pvad
from .speaker import encode

PVAD_REGIMES = ("enroll_full", "enroll_less")


@dataclass
class FrameExample:
    """Ready-to-train item: stacked features, optional embedding, labels."""

    feats: FeatureSequence
    embedding: np.ndarray | None
    labels: np.ndarray


def epoch_loop(examples, batch_size: int, rng):
    """Yield shuffled full minibatches, dropping the remainder."""
    if batch_size > len(examples):
        raise ValueError(
            f"batch_size {batch_size} exceeds dataset size {len(examples)}"
        )
    rng = as_rng(rng)
    order = rng.permutation(len(examples))
    for start in range(0, len(order) - batch_size + 1, batch_size):
        yield [examples[int(i)] for i in order[start : start + batch_size]]


def batch_frame_ce(params: nn.ModelParams, batch, dropout_p: float,
                   mode: str, rng=None, backward: bool = False) -> tuple[float, int]:
    """Frame-mean CE over a batch; optionally accumulates gradients."""
    total_frames = sum(len(e.labels) for e in batch)
    loss_sum = 0.0
    for e in batch:
        x = _with_embedding(e.feats, e.embedding)
        posteriors, logits, cache = _forward_cached(
            params, x, dropout_p if mode == "train" else 0.0, mode, rng
        )
        loss_mean, post = nn.softmax_ce(logits, e.labels)
        t = len(e.labels)
        loss_sum += loss_mean * t
        if backward:
            dlogits = nn.softmax_ce_backward(post, e.labels) * (t / total_frames)
            _backward(params, cache, dlogits)
    return loss_sum / total_frames, total_frames


def _fit_frame_model(params: nn.ModelParams, build_epoch, val_examples,
                     cfg: TrainConfig, dropout_p: float, seed: int):
    """Shared epoch/early-stop driver; returns (best params, history)."""
    adam = nn.init_adam(params, cfg.lr)
    best_val = np.inf
    best_params = params.copy()
    best_epoch = 0
    stale = 0
    history = []
    for epoch in range(1, cfg.max_epochs + 1):
        examples = build_epoch(np.random.default_rng((seed, 0xE9, epoch)))
        batch_rng = np.random.default_rng((seed, 0xBA, epoch))
        dropout_rng = np.random.default_rng((seed, 0xD0, epoch))
        frame_total = 0
        loss_total = 0.0
        for batch in epoch_loop(examples, cfg.batch_size, batch_rng):
            params.zero_grads()
            loss, n_frames = batch_frame_ce(params, batch, dropout_p, "train",
                                            dropout_rng, backward=True)
            nn.clip_gradients(params, cfg.clip_norm)
            nn.adam_step(params, adam)
            loss_total += loss * n_frames
            frame_total += n_frames
        train_loss = loss_total / max(frame_total, 1)
        val_loss, _ = batch_frame_ce(params, val_examples, 0.0, "eval")
        history.append({"epoch": epoch, "train_loss": float(train_loss),
                        "val_loss": float(val_loss)})
        if not np.isfinite(val_loss) or not np.isfinite(train_loss):
            raise FloatingPointError(f"non-finite loss at epoch {epoch}")
        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best_params, {"history": history, "best_epoch": best_epoch,
                         "best_val_loss": float(best_val)}


# --- example builders --------------------------------------------------------


def _maybe_noise(noise_bank: NoiseBank | None, noise_cfg: NoiseConfig, rng):
    if noise_bank is None or not noise_bank.train_clips:
        return None, np.inf
    if rng.random() >= noise_cfg.train_prob:
        return None, np.inf
    noise = noise_bank.pick_train(rng)
    snr = rng.uniform(noise_cfg.snr_min_db, noise_cfg.snr_max_db)
    return noise, snr


def build_enroll_less_epoch(utts, n_examples: int, gap_range, rng,
                            feat_cfg: FeatureConfig,
                            noise_bank: NoiseBank | None = None,
                            noise_cfg: NoiseConfig | None = None) -> list[TrainingExample]:
    """Fresh random concatenations (partners, target, gaps, noise) each call.

    Reads nothing but audio and VAD labels, so it works on corpora without
    speaker identities.
    """
    rng = as_rng(rng)
    noise_cfg = noise_cfg or NoiseConfig()
    examples = []
    for _ in range(n_examples):
        g = int(rng.integers(1, min(3, len(utts)) + 1))
        chosen = [utts[int(i)] for i in rng.choice(len(utts), size=g, replace=False)]
        target = int(rng.integers(g))
        noise, snr = _maybe_noise(noise_bank, noise_cfg, rng)
        examples.append(build_enroll_less_example(
            chosen, target, gap_range, rng, feat_cfg, noise=noise, snr_db=snr
        ))
    return examples


def build_enroll_full_epoch(by_speaker: dict, n_examples: int, gap_range, rng,
                            feat_cfg: FeatureConfig,
                            noise_bank: NoiseBank | None = None,
                            noise_cfg: NoiseConfig | None = None) -> list[TrainingExample]:
    """Fresh enrollment-reserved concatenations from a speaker-labeled split."""
    rng = as_rng(rng)
    noise_cfg = noise_cfg or NoiseConfig()
    speakers = sorted(s for s, items in by_speaker.items() if len(items) >= 2)
    if not speakers:
        raise ValueError("enroll_full needs a speaker with >= 2 utterances")
    examples = []
    for _ in range(n_examples):
        spk = speakers[int(rng.integers(len(speakers)))]
        pool = by_speaker[spk]
        pair_idx = rng.choice(len(pool), size=2, replace=False)
        targets = [pool[int(i)] for i in pair_idx]
        others = sorted(s for s in speakers if s != spk)
        n_distract = int(rng.integers(0, 3))
        distractors = []
        for _ in range(n_distract):
            other = others[int(rng.integers(len(others)))]
            cands = by_speaker[other]
            distractors.append(cands[int(rng.integers(len(cands)))])
        noise, snr = _maybe_noise(noise_bank, noise_cfg, rng)
        examples.append(build_enroll_full_example(
            targets, distractors, rng, feat_cfg, gap_range,
            noise=noise, snr_db=snr,
        ))
    return examples


def _conditioning_embedding(example: TrainingExample, speaker_params,
                            feat_cfg: FeatureConfig, aug_cfg: AugConfig,
                            aug: bool, rng, cache: dict | None) -> np.ndarray:
    if aug:
        return augment_embedding(example.conditioning, speaker_params,
                                 feat_cfg, aug_cfg, rng, "train")
    key = example.conditioning_utterance_id
    if cache is not None and key in cache:
        return cache[key]
    emb = encode(finish_pipeline(example.conditioning, feat_cfg), speaker_params)
    if cache is not None:
        cache[key] = emb
    return emb


def _to_frame_examples(raw_examples, speaker_params, feat_cfg, aug_cfg, aug,
                       rng, cache) -> list[FrameExample]:
    out = []
    for ex in raw_examples:
        emb = _conditioning_embedding(ex, speaker_params, feat_cfg, aug_cfg,
                                      aug, rng, cache)
        out.append(FrameExample(ex.input_features, emb, ex.labels))
    return out


# --- public training entry points -------------------------------------------


def train_standard_vad(corpus: Corpus, train_cfg: TrainConfig,
                       feat_cfg: FeatureConfig, noise_cfg: NoiseConfig,
                       hidden: int = 32, seed: int = 0):
    """Speech/non-speech baseline trained on single utterances."""
    if not corpus.train:
        raise ValueError("empty training corpus")
    params = init_pvad(
        PvadConfig(feat_cfg.stacked_dim, 0, hidden),
        np.random.default_rng((seed, 0x7A)),
    )

    def single_utt_examples(utts, n_examples, rng):
        rng = as_rng(rng)
        picks = rng.choice(len(utts), size=n_examples,
                           replace=n_examples > len(utts))
        out = []
        for i in picks:
            utt = utts[int(i)]
            noise, snr = _maybe_noise(corpus.noise, noise_cfg, rng)
            ex = build_enroll_less_example([utt], 0, (0.0, 0.0), rng, feat_cfg,
                                           noise=noise, snr_db=snr)
            out.append(FrameExample(ex.input_features, None, ex.labels))
        return out

    n_train = train_cfg.examples_per_epoch or len(corpus.train)
    val_rng = np.random.default_rng((seed, 0x7B))
    n_val = min(train_cfg.val_examples, len(corpus.val)) or len(corpus.val)
    val_examples = single_utt_examples(corpus.val, n_val, val_rng)

    def build_epoch(rng):
        return single_utt_examples(corpus.train, n_train, rng)

    return _fit_frame_model(params, build_epoch, val_examples, train_cfg,
                            dropout_p=0.5, seed=seed)


def train_pvad(corpus: Corpus, regime: str, aug: bool,
               speaker_params: nn.ModelParams, train_cfg: TrainConfig,
               feat_cfg: FeatureConfig, aug_cfg: AugConfig,
               noise_cfg: NoiseConfig, hidden: int = 32, seed: int = 0):
    """One Table-1 training regime; the speaker encoder stays frozen."""
    if regime not in PVAD_REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    if not corpus.train:
        raise ValueError("empty training corpus")
    if any(speaker_params.trainable.values()):
        raise ValueError("speaker encoder parameters must be frozen")
    embed_dim = speaker_params.get("attn.W").shape[0]
    gap_range = (0.0, 0.5)

    if regime == "enroll_full":
        by_speaker_train = corpus.by_speaker(corpus.train)
        by_speaker_val = corpus.by_speaker(corpus.val)
        if None in by_speaker_train or None in by_speaker_val:
            raise ValueError("enroll_full training needs speaker identities")

    params = init_pvad(
        PvadConfig(feat_cfg.stacked_dim, embed_dim, hidden),
        np.random.default_rng((seed, 0x9D)),
    )

    n_train = train_cfg.examples_per_epoch or max(len(corpus.train) // 2, train_cfg.batch_size)
    n_val = train_cfg.val_examples
    no_aug_cache: dict | None = None if aug else {}

    def build_raw(utts_or_groups, n_examples, rng):
        if regime == "enroll_less":
            return build_enroll_less_epoch(utts_or_groups, n_examples, gap_range,
                                           rng, feat_cfg, corpus.noise, noise_cfg)
        return build_enroll_full_epoch(utts_or_groups, n_examples, gap_range,
                                       rng, feat_cfg, corpus.noise, noise_cfg)

    if regime == "enroll_less":
        train_source = list(corpus.train)
        val_source = list(corpus.val)
    else:
        train_source = by_speaker_train
        val_source = by_speaker_val

    val_rng = np.random.default_rng((seed, 0x9E))
    val_examples = _to_frame_examples(
        build_raw(val_source, n_val, val_rng), speaker_params, feat_cfg,
        aug_cfg, aug, val_rng, no_aug_cache,
    )

    def build_epoch(rng):
        raw = build_raw(train_source, n_train, rng)
        return _to_frame_examples(raw, speaker_params, feat_cfg, aug_cfg, aug,
                                  rng, no_aug_cache)

    return _fit_frame_model(params, build_epoch, val_examples, train_cfg,
                            dropout_p=0.5, seed=seed)


def write_history_csv(path, history, config_hash: str = "") -> None:
    lines = []
    if config_hash:
        lines.append(f"# config_hash={config_hash}")
    lines.append("epoch,train_loss,val_loss")
    for row in history:
        lines.append(f"{row['epoch']},{row['train_loss']:.10g},{row['val_loss']:.10g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
