"""Finite-difference gradient suite over every differentiable block.

Each closure builds a tiny random instance, runs forward+backward and
returns the loss; `grad_check` compares the analytic gradients against
central differences.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .pvad import PvadConfig, _backward, _forward_cached, init_pvad
from .speaker import SpeakerEncoderConfig, _encode_backward, _encode_cached, init_speaker_encoder


def _linear_case(rng):
    params = nn.ModelParams()
    nn.init_linear(params, "lin", 4, 3, rng)
    x = rng.normal(size=(5, 4))
    labels = rng.integers(0, 3, size=5)

    def closure():
        params.zero_grads()
        logits, cache = nn.linear_forward(params, "lin", x)
        loss, post = nn.softmax_ce(logits, labels)
        nn.linear_backward(params, cache, nn.softmax_ce_backward(post, labels))
        return loss

    return params, closure


def _lstm_case(rng):
    params = nn.ModelParams()
    nn.init_lstm(params, "lstm", 2, 2, rng)
    x = rng.normal(size=(3, 2))

    def closure():
        params.zero_grads()
        h, cache = nn.lstm_forward(params, "lstm", x)
        nn.lstm_backward(params, cache, np.ones_like(h))
        return float(h.sum())

    return params, closure


def _blstm_case(rng):
    params = nn.ModelParams()
    nn.init_blstm(params, "blstm", 2, 2, rng)
    x = rng.normal(size=(3, 2))
    w = rng.normal(size=(3, 4))  # fixed projection so the loss mixes frames

    def closure():
        params.zero_grads()
        h, cache = nn.blstm_forward(params, "blstm", x)
        nn.blstm_backward(params, cache, w)
        return float((h * w).sum())

    return params, closure


def _attention_case(rng):
    params = nn.ModelParams()
    nn.init_blstm(params, "blstm0", 3, 2, rng)
    nn.init_attention(params, "attn", 4, 2, rng)
    x = rng.normal(size=(4, 3))
    w = rng.normal(size=4)

    def closure():
        params.zero_grads()
        h, bcache = nn.blstm_forward(params, "blstm0", x)
        pooled, acache = nn.attention_forward(params, "attn", h)
        dh = nn.attention_backward(params, acache, w)
        nn.blstm_backward(params, bcache, dh)
        return float(pooled @ w)

    return params, closure


def _softmax_ce_case(rng):
    params = nn.ModelParams()
    params.add("logits", rng.normal(size=(4, 2)))
    labels = rng.integers(0, 2, size=4)

    def closure():
        params.zero_grads()
        loss, post = nn.softmax_ce(params.get("logits"), labels)
        params.add_grad("logits", nn.softmax_ce_backward(post, labels))
        return loss

    return params, closure


def _speaker_stack_case(rng):
    cfg = SpeakerEncoderConfig(input_dim=3, hidden=2, n_layers=2)
    params = init_speaker_encoder(cfg, rng)
    nn.init_linear(params, "head", cfg.embedding_dim, 3, rng)
    x = rng.normal(size=(4, 3))
    label = np.array([1])

    def closure():
        params.zero_grads()
        pooled, cache = _encode_cached(x, params, cfg.n_layers)
        logits, lin_cache = nn.linear_forward(params, "head", pooled[None, :])
        loss, post = nn.softmax_ce(logits, label)
        d_pooled = nn.linear_backward(
            params, lin_cache, nn.softmax_ce_backward(post, label)
        )[0]
        _encode_backward(params, cache, d_pooled)
        return loss

    return params, closure


def _pvad_stack_case(rng, train_mode: bool = False):
    cfg = PvadConfig(input_dim=3, embed_dim=2, hidden=2, n_layers=2)
    params = init_pvad(cfg, rng)
    t_len = 4
    feats = rng.normal(size=(t_len, 3))
    emb = rng.normal(size=2)
    x = np.concatenate([feats, np.tile(emb, (t_len, 1))], axis=1)
    labels = rng.integers(0, 2, size=t_len)
    dropout_p = 0.5 if train_mode else 0.0

    def closure():
        params.zero_grads()
        drop_rng = np.random.default_rng(1234)  # frozen mask per call
        _, logits, cache = _forward_cached(params, x, dropout_p,
                                           "train" if train_mode else "eval",
                                           drop_rng)
        loss, post = nn.softmax_ce(logits, labels)
        _backward(params, cache, nn.softmax_ce_backward(post, labels))
        return loss

    return params, closure


CASES = {
    "linear_ce": _linear_case,
    "lstm": _lstm_case,
    "blstm": _blstm_case,
    "attention_pooling": _attention_case,
    "softmax_ce": _softmax_ce_case,
    "speaker_stack": _speaker_stack_case,
    "pvad_stack": _pvad_stack_case,
    "pvad_stack_dropout": lambda rng: _pvad_stack_case(rng, train_mode=True),
}


def run_grad_suite(tolerance: float = 1e-5, seed: int = 0) -> dict[str, float]:
    """Max relative gradient error per block at tiny dimensions."""
    report = {}
    for name, case in CASES.items():
        params, closure = case(np.random.default_rng((seed, hash(name) % (2**32))))
        block_report = nn.grad_check(closure, params)
        report[name] = max(block_report.values())
    return report
