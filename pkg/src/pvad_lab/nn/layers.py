"""Differentiable layers: linear, LSTM/BLSTM over sequences, attention pooling.

Each forward returns (output, cache); the matching backward consumes the
cache, accumulates parameter gradients into the ModelParams and returns the
gradient w.r.t. the layer input. Backward passes run full BPTT.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit as sigmoid

from .params import ModelParams, ShapeMismatchError


def _check_width(name: str, arr: np.ndarray, expected: int) -> None:
    if arr.shape[-1] != expected:
        raise ShapeMismatchError(
            f"input width {arr.shape[-1]} does not match {name!r} ({expected})"
        )


# --- linear -----------------------------------------------------------------


def linear_forward(params: ModelParams, prefix: str, x: np.ndarray):
    w = params.get(f"{prefix}.W")
    b = params.get(f"{prefix}.b")
    _check_width(f"{prefix}.W", x, w.shape[0])
    return x @ w + b, (prefix, x)


def linear_backward(params: ModelParams, cache, dy: np.ndarray) -> np.ndarray:
    prefix, x = cache
    w = params.get(f"{prefix}.W")
    params.add_grad(f"{prefix}.W", x.T @ dy)
    params.add_grad(f"{prefix}.b", dy.sum(axis=0))
    return dy @ w.T


# --- LSTM ---------------------------------------------------------------


def lstm_forward(params: ModelParams, prefix: str, x: np.ndarray):
    """Run a unidirectional LSTM over (T, D_in); returns hidden (T, H).

    Initial hidden and cell states are zero. Gates use sigmoid, the cell
    candidate uses tanh.
    """
    w_x = params.get(f"{prefix}.W_x")
    w_h = params.get(f"{prefix}.W_h")
    b = params.get(f"{prefix}.b")
    _check_width(f"{prefix}.W_x", x, w_x.shape[0])
    hidden = w_h.shape[0]
    t_len = x.shape[0]

    pre_x = x @ w_x + b  # (T, 4H), input contribution precomputed
    gates = np.empty((t_len, 4 * hidden))
    h_seq = np.empty((t_len, hidden))
    c_seq = np.empty((t_len, hidden))
    tanh_c = np.empty((t_len, hidden))

    h_prev = np.zeros(hidden)
    c_prev = np.zeros(hidden)
    hs = slice(0, hidden)
    fs = slice(hidden, 2 * hidden)
    gs = slice(2 * hidden, 3 * hidden)
    os_ = slice(3 * hidden, 4 * hidden)
    for t in range(t_len):
        z = pre_x[t] + h_prev @ w_h
        i = sigmoid(z[hs])
        f = sigmoid(z[fs])
        g = np.tanh(z[gs])
        o = sigmoid(z[os_])
        c_prev = f * c_prev + i * g
        tc = np.tanh(c_prev)
        h_prev = o * tc
        gates[t, hs] = i
        gates[t, fs] = f
        gates[t, gs] = g
        gates[t, os_] = o
        c_seq[t] = c_prev
        tanh_c[t] = tc
        h_seq[t] = h_prev
    cache = (prefix, x, gates, h_seq, c_seq, tanh_c, hidden)
    return h_seq, cache


def lstm_backward(params: ModelParams, cache, dh: np.ndarray) -> np.ndarray:
    prefix, x, gates, h_seq, c_seq, tanh_c, hidden = cache
    w_x = params.get(f"{prefix}.W_x")
    w_h = params.get(f"{prefix}.W_h")
    t_len = x.shape[0]

    hs = slice(0, hidden)
    fs = slice(hidden, 2 * hidden)
    gs = slice(2 * hidden, 3 * hidden)
    os_ = slice(3 * hidden, 4 * hidden)

    d_pre = np.empty((t_len, 4 * hidden))
    dh_rec = np.zeros(hidden)
    dc_rec = np.zeros(hidden)
    for t in range(t_len - 1, -1, -1):
        i = gates[t, hs]
        f = gates[t, fs]
        g = gates[t, gs]
        o = gates[t, os_]
        tc = tanh_c[t]
        c_before = c_seq[t - 1] if t > 0 else np.zeros(hidden)

        dht = dh[t] + dh_rec
        dc = dc_rec + dht * o * (1.0 - tc * tc)
        d_pre[t, hs] = dc * g * i * (1.0 - i)
        d_pre[t, fs] = dc * c_before * f * (1.0 - f)
        d_pre[t, gs] = dc * i * (1.0 - g * g)
        d_pre[t, os_] = dht * tc * o * (1.0 - o)
        dh_rec = d_pre[t] @ w_h.T
        dc_rec = dc * f

    h_before = np.vstack([np.zeros((1, hidden)), h_seq[:-1]])
    params.add_grad(f"{prefix}.W_x", x.T @ d_pre)
    params.add_grad(f"{prefix}.W_h", h_before.T @ d_pre)
    params.add_grad(f"{prefix}.b", d_pre.sum(axis=0))
    return d_pre @ w_x.T


# --- bidirectional LSTM -------------------------------------------------


def blstm_forward(params: ModelParams, prefix: str, x: np.ndarray):
    """Forward and time-reversed LSTM, concatenated [fwd, bwd] per frame."""
    h_f, cache_f = lstm_forward(params, f"{prefix}.fwd", x)
    h_b_rev, cache_b = lstm_forward(params, f"{prefix}.bwd", x[::-1])
    out = np.concatenate([h_f, h_b_rev[::-1]], axis=1)
    return out, (cache_f, cache_b, h_f.shape[1])


def blstm_backward(params: ModelParams, cache, dh: np.ndarray) -> np.ndarray:
    cache_f, cache_b, hidden = cache
    dx_f = lstm_backward(params, cache_f, dh[:, :hidden])
    dx_b = lstm_backward(params, cache_b, dh[:, hidden:][::-1])
    return dx_f + dx_b[::-1]


# --- attentive pooling ----------------------------------------------------


def attention_forward(params: ModelParams, prefix: str, h: np.ndarray):
    """Softmax-weighted time average: e = sum_t a_t h_t.

    Scores are v . tanh(W h_t + b); weights are a softmax over frames.
    """
    if h.shape[0] < 1:
        raise ValueError("attention pooling needs at least one frame")
    w = params.get(f"{prefix}.W")
    b = params.get(f"{prefix}.b")
    v = params.get(f"{prefix}.v")
    _check_width(f"{prefix}.W", h, w.shape[0])
    z = np.tanh(h @ w + b)  # (T, A)
    scores = z @ v  # (T,)
    scores = scores - scores.max()
    weights = np.exp(scores)
    weights /= weights.sum()
    pooled = weights @ h  # (D,)
    return pooled, (prefix, h, z, weights)


def attention_backward(params: ModelParams, cache, de: np.ndarray) -> np.ndarray:
    prefix, h, z, weights = cache
    w = params.get(f"{prefix}.W")
    v = params.get(f"{prefix}.v")

    dh = np.outer(weights, de)
    d_weights = h @ de  # (T,)
    d_scores = weights * (d_weights - weights @ d_weights)  # softmax backward
    dz = np.outer(d_scores, v)
    params.add_grad(f"{prefix}.v", z.T @ d_scores)
    d_pre = dz * (1.0 - z * z)
    params.add_grad(f"{prefix}.W", h.T @ d_pre)
    params.add_grad(f"{prefix}.b", d_pre.sum(axis=0))
    dh += d_pre @ w.T
    return dh


# --- dropout --------------------------------------------------------------


def dropout(x: np.ndarray, p: float, mode: str,
            rng: np.random.Generator | None = None):
    """Inverted dropout; identity in eval mode. Returns (output, mask)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "eval" or p == 0.0:
        return x, np.ones_like(x)
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    mask = (rng.random(x.shape) >= p).astype(np.float64)
    return x * mask / (1.0 - p), mask


def dropout_backward(dy: np.ndarray, mask: np.ndarray, p: float) -> np.ndarray:
    if p == 0.0:
        return dy
    return dy * mask / (1.0 - p)
