"""Speaker encoder: stacked BLSTMs with attentive pooling.

Pretrained by utterance-level speaker classification, then frozen. The
embedding dimension is twice the per-direction hidden width (forward and
backward states are concatenated before pooling).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .config import TrainConfig
from .corpus import Corpus, as_rng
from .features import FeatureSequence, Waveform, extract_stacked


@dataclass(frozen=True)
class SpeakerEncoderConfig:
    input_dim: int
    hidden: int = 32
    n_layers: int = 3

    @property
    def embedding_dim(self) -> int:
        return 2 * self.hidden


def init_speaker_encoder(cfg: SpeakerEncoderConfig, rng) -> nn.ModelParams:
    rng = as_rng(rng)
    params = nn.ModelParams()
    d_in = cfg.input_dim
    for layer in range(cfg.n_layers):
        nn.init_blstm(params, f"blstm{layer}", d_in, cfg.hidden, rng)
        d_in = 2 * cfg.hidden
    nn.init_attention(params, "attn", 2 * cfg.hidden, cfg.hidden, rng)
    return params


def encoder_config_from_params(params: nn.ModelParams) -> SpeakerEncoderConfig:
    input_dim = params.get("blstm0.fwd.W_x").shape[0]
    hidden = params.get("blstm0.fwd.W_h").shape[0]
    n_layers = sum(1 for name in params.names() if name.endswith("fwd.W_x"))
    return SpeakerEncoderConfig(input_dim, hidden, n_layers)


def _encode_cached(feats: np.ndarray, params: nn.ModelParams, n_layers: int):
    h = feats
    caches = []
    for layer in range(n_layers):
        h, cache = nn.blstm_forward(params, f"blstm{layer}", h)
        caches.append(cache)
    pooled, attn_cache = nn.attention_forward(params, "attn", h)
    return pooled, (caches, attn_cache)


def _encode_backward(params: nn.ModelParams, cache, d_pooled: np.ndarray) -> None:
    caches, attn_cache = cache
    dh = nn.attention_backward(params, attn_cache, d_pooled)
    for blstm_cache in reversed(caches):
        dh = nn.blstm_backward(params, blstm_cache, dh)


def encode(feats: FeatureSequence, params: nn.ModelParams, mode: str = "eval") -> np.ndarray:
    """Utterance-level embedding of context-stacked features."""
    if feats.n_frames < 1:
        raise ValueError("cannot encode an empty feature sequence")
    cfg = encoder_config_from_params(params)
    pooled, _ = _encode_cached(feats.values, params, cfg.n_layers)
    return pooled


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for a zero vector")
    return float(a @ b / (na * nb))


# --- pretraining by speaker classification ----------------------------------


def pretrain_classifier(corpus: Corpus, cfg: SpeakerEncoderConfig,
                        train_cfg: TrainConfig, feat_cfg, seed: int):
    """Train encoder + linear head on speaker identity; return frozen encoder.

    Early-stops when validation loss fails to improve for `patience`
    consecutive epochs and returns the parameters of the best epoch with the
    classification head dropped.
    """
    speakers = sorted({u.speaker_id for u in corpus.train})
    if len(speakers) < 2:
        raise ValueError("speaker pretraining needs at least 2 speakers")
    spk_index = {s: k for k, s in enumerate(speakers)}

    rng = np.random.default_rng((seed, 0x5E))
    params = init_speaker_encoder(cfg, rng)
    nn.init_linear(params, "head", cfg.embedding_dim, len(speakers), rng)
    adam = nn.init_adam(params, train_cfg.lr)

    train_feats = [(extract_stacked(u.audio, feat_cfg).values, spk_index[u.speaker_id])
                   for u in corpus.train]
    val_feats = [(extract_stacked(u.audio, feat_cfg).values, spk_index[u.speaker_id])
                 for u in corpus.val if u.speaker_id in spk_index]

    init_val_loss, _ = _classifier_eval(params, cfg, val_feats)
    best_val = np.inf
    best_params = params.copy()
    best_epoch = 0
    stale = 0
    history = []
    epoch_rng = np.random.default_rng((seed, 0x5F))
    for epoch in range(1, train_cfg.max_epochs + 1):
        order = epoch_rng.permutation(len(train_feats))
        train_loss_sum = 0.0
        n_seen = 0
        for start in range(0, len(order) - train_cfg.batch_size + 1, train_cfg.batch_size):
            batch = order[start : start + train_cfg.batch_size]
            params.zero_grads()
            batch_loss = 0.0
            for idx in batch:
                feats, label = train_feats[idx]
                loss = _classifier_step(params, cfg, feats, label, len(batch))
                batch_loss += loss
            nn.clip_gradients(params, train_cfg.clip_norm)
            nn.adam_step(params, adam)
            train_loss_sum += batch_loss
            n_seen += 1
        train_loss = train_loss_sum / max(n_seen, 1)
        val_loss, val_acc = _classifier_eval(params, cfg, val_feats)
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "val_loss": val_loss, "val_acc": val_acc})
        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= train_cfg.patience:
                break

    encoder = nn.ModelParams()
    for name, value in best_params.values.items():
        if not name.startswith("head."):
            encoder.add(name, value.copy(), trainable=False)
    return encoder, {"history": history, "best_epoch": best_epoch,
                     "best_val_loss": float(best_val),
                     "init_val_loss": float(init_val_loss),
                     "n_speakers": len(speakers)}


def _classifier_step(params, cfg, feats, label, batch_size) -> float:
    pooled, cache = _encode_cached(feats, params, cfg.n_layers)
    logits, lin_cache = nn.linear_forward(params, "head", pooled[None, :])
    loss, post = nn.softmax_ce(logits, np.array([label]))
    dlogits = nn.softmax_ce_backward(post, np.array([label])) / batch_size
    d_pooled = nn.linear_backward(params, lin_cache, dlogits)[0]
    _encode_backward(params, cache, d_pooled)
    return loss / batch_size


def _classifier_eval(params, cfg, examples) -> tuple[float, float]:
    if not examples:
        return np.inf, 0.0
    total = 0.0
    correct = 0
    for feats, label in examples:
        pooled, _ = _encode_cached(feats, params, cfg.n_layers)
        logits, _ = nn.linear_forward(params, "head", pooled[None, :])
        loss, post = nn.softmax_ce(logits, np.array([label]))
        total += loss
        correct += int(np.argmax(post[0]) == label)
    return total / len(examples), correct / len(examples)
