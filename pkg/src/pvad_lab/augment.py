"""Enrollment augmentation: frequency masking + dropout on the embedding.

Masking zeroes a contiguous band of mel bins on the static features before
delta/context computation (configurable to the stacked stage for ablation);
dropout then jitters the embedding the frozen speaker encoder produced.
"""

from __future__ import annotations

import numpy as np

from . import nn, speaker
from .config import AugConfig, FeatureConfig
from .corpus import as_rng
from .features import LAYOUT_STATIC, FeatureSequence, finish_pipeline


def _mask_columns(values: np.ndarray, fraction: float, rng, shape: str) -> np.ndarray:
    n_cols = values.shape[1]
    width = int(round(fraction * n_cols))
    if width == 0:
        return values.copy()
    out = values.copy()
    if shape == "contiguous":
        start = int(rng.integers(0, n_cols - width + 1))
        out[:, start : start + width] = 0.0
    else:
        cols = rng.choice(n_cols, size=width, replace=False)
        out[:, cols] = 0.0
    return out


def freq_mask(feats: FeatureSequence, fraction: float, rng,
              shape: str = "contiguous") -> FeatureSequence:
    """Zero round(fraction * n_mels) bins across all frames of static features."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"mask fraction must be in [0, 1), got {fraction}")
    if feats.layout != LAYOUT_STATIC:
        raise ValueError("freq_mask expects static layout")
    rng = as_rng(rng)
    return FeatureSequence(
        _mask_columns(feats.values, fraction, rng, shape),
        LAYOUT_STATIC,
        n_mels=feats.n_mels,
        frame_shift_ms=feats.frame_shift_ms,
        frame_length_ms=feats.frame_length_ms,
    )


def augment_embedding(static_feats: FeatureSequence, speaker_params: nn.ModelParams,
                      feat_cfg: FeatureConfig, aug_cfg: AugConfig, rng,
                      mode: str = "train") -> np.ndarray:
    """Conditioning embedding from static features of one utterance.

    train: mask -> deltas -> context stack -> encode -> inverted dropout.
    eval: plain encode of the unaugmented features (real-enrollment path).
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "eval":
        return speaker.encode(finish_pipeline(static_feats, feat_cfg), speaker_params)
    rng = as_rng(rng)
    if aug_cfg.mask_stage == "pre_delta":
        masked = freq_mask(static_feats, aug_cfg.fraction, rng, aug_cfg.mask_shape)
        stacked = finish_pipeline(masked, feat_cfg)
    else:
        stacked_raw = finish_pipeline(static_feats, feat_cfg)
        values = _mask_columns(stacked_raw.values, aug_cfg.fraction, rng,
                               aug_cfg.mask_shape)
        stacked = FeatureSequence(
            values, stacked_raw.layout, n_mels=stacked_raw.n_mels,
            context=stacked_raw.context,
            frame_shift_ms=stacked_raw.frame_shift_ms,
            frame_length_ms=stacked_raw.frame_length_ms,
        )
    embedded = speaker.encode(stacked, speaker_params)
    dropped, _ = nn.dropout(embedded, aug_cfg.dropout_p, "train", rng)
    return dropped
