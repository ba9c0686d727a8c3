"""Frame-level target-speaker detector.

Each frame's acoustic features are concatenated with the (constant) target
speaker embedding, run through 4 unidirectional LSTM layers, dropout, a
linear layer and softmax over {non-target-or-nonspeech, target-speech}.
The standard VAD baseline is the same stack with no embedding input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .corpus import as_rng
from .features import FeatureSequence


@dataclass(frozen=True)
class PvadConfig:
    input_dim: int
    embed_dim: int  # 0 for the standard VAD baseline
    hidden: int = 32
    n_layers: int = 4
    dropout_p: float = 0.5
    n_classes: int = 2


def init_pvad(cfg: PvadConfig, rng) -> nn.ModelParams:
    rng = as_rng(rng)
    params = nn.ModelParams()
    d_in = cfg.input_dim + cfg.embed_dim
    for layer in range(cfg.n_layers):
        nn.init_lstm(params, f"lstm{layer}", d_in, cfg.hidden, rng)
        d_in = cfg.hidden
    nn.init_linear(params, "out", cfg.hidden, cfg.n_classes, rng)
    return params


def pvad_config_from_params(params: nn.ModelParams, embed_dim: int) -> PvadConfig:
    d_total = params.get("lstm0.W_x").shape[0]
    hidden = params.get("lstm0.W_h").shape[0]
    n_layers = sum(1 for name in params.names()
                   if name.startswith("lstm") and name.endswith(".W_x"))
    n_classes = params.get("out.W").shape[1]
    return PvadConfig(d_total - embed_dim, embed_dim, hidden, n_layers,
                      n_classes=n_classes)


def _forward_cached(params: nn.ModelParams, x: np.ndarray, dropout_p: float,
                    mode: str, rng):
    n_layers = sum(1 for name in params.names()
                   if name.startswith("lstm") and name.endswith(".W_x"))
    h = x
    caches = []
    for layer in range(n_layers):
        h, cache = nn.lstm_forward(params, f"lstm{layer}", h)
        caches.append(cache)
    dropped, mask = nn.dropout(h, dropout_p, mode, rng)
    logits, lin_cache = nn.linear_forward(params, "out", dropped)
    posteriors = nn.softmax(logits)
    return posteriors, logits, (caches, mask, lin_cache, dropout_p)


def _backward(params: nn.ModelParams, cache, dlogits: np.ndarray) -> np.ndarray:
    caches, mask, lin_cache, dropout_p = cache
    dh = nn.linear_backward(params, lin_cache, dlogits)
    dh = nn.dropout_backward(dh, mask, dropout_p) if dropout_p > 0 else dh
    for lstm_cache in reversed(caches):
        dh = nn.lstm_backward(params, lstm_cache, dh)
    return dh


def _with_embedding(feats: FeatureSequence, embedding: np.ndarray | None) -> np.ndarray:
    x = feats.values
    if embedding is None:
        return x
    embedding = np.asarray(embedding, dtype=np.float64).ravel()
    d_total = x.shape[1] + embedding.size
    out = np.empty((x.shape[0], d_total))
    out[:, : x.shape[1]] = x
    out[:, x.shape[1] :] = embedding
    return out


def pvad_forward(feats: FeatureSequence, embedding: np.ndarray,
                 params: nn.ModelParams, mode: str = "eval",
                 rng=None, dropout_p: float = 0.5) -> np.ndarray:
    """Per-frame posteriors (T, 2), causal in the input features."""
    x = _with_embedding(feats, embedding)
    if mode == "train" and rng is not None:
        rng = as_rng(rng)
    posteriors, _, _ = _forward_cached(params, x, dropout_p if mode == "train" else 0.0,
                                       mode, rng)
    return posteriors


def standard_vad_forward(feats: FeatureSequence, params: nn.ModelParams,
                         mode: str = "eval", rng=None,
                         dropout_p: float = 0.5) -> np.ndarray:
    """Baseline without the embedding input; estimates speech/non-speech."""
    return pvad_forward(feats, None, params, mode, rng, dropout_p)
