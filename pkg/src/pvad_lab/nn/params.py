"""Named parameter collections with gradient slots and trainable flags."""

from __future__ import annotations

import numpy as np


class ShapeMismatchError(ValueError):
    """Gradient or value shape disagrees with the registered parameter."""


class ModelParams:
    """Ordered map from parameter path to float64 tensor, plus gradients.

    Frozen entries (trainable=False) are skipped by the optimizer and must
    stay bitwise identical across training.
    """

    def __init__(self):
        self.values: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.trainable: dict[str, bool] = {}

    def add(self, name: str, value: np.ndarray, trainable: bool = True) -> None:
        if name in self.values:
            raise ValueError(f"parameter {name!r} already registered")
        arr = np.asarray(value, dtype=np.float64)
        self.values[name] = arr
        self.grads[name] = np.zeros_like(arr)
        self.trainable[name] = trainable

    def get(self, name: str) -> np.ndarray:
        try:
            return self.values[name]
        except KeyError:
            raise KeyError(f"unknown parameter path {name!r}") from None

    def names(self) -> list[str]:
        return list(self.values)

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0

    def add_grad(self, name: str, grad: np.ndarray) -> None:
        slot = self.grads.get(name)
        if slot is None:
            raise KeyError(f"unknown parameter path {name!r}")
        grad = np.asarray(grad)
        if grad.shape != slot.shape:
            raise ShapeMismatchError(
                f"gradient for {name!r} has shape {grad.shape}, "
                f"parameter has {slot.shape}"
            )
        slot += grad

    def freeze_all(self) -> None:
        for name in self.trainable:
            self.trainable[name] = False

    def n_scalars(self) -> int:
        return sum(v.size for v in self.values.values())

    def copy(self) -> "ModelParams":
        out = ModelParams()
        for name, value in self.values.items():
            out.add(name, value.copy(), self.trainable[name])
        return out

    def load_values(self, other: "ModelParams") -> None:
        """Copy values in from a params object with identical structure."""
        if set(other.values) != set(self.values):
            raise ValueError("parameter name sets differ")
        for name, value in other.values.items():
            if value.shape != self.values[name].shape:
                raise ShapeMismatchError(f"shape differs for {name!r}")
            self.values[name] = value.copy()


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


def init_linear(params: ModelParams, prefix: str, d_in: int, d_out: int,
                rng: np.random.Generator, trainable: bool = True) -> None:
    params.add(f"{prefix}.W", uniform_init(rng, (d_in, d_out), d_in), trainable)
    params.add(f"{prefix}.b", np.zeros(d_out), trainable)


def init_lstm(params: ModelParams, prefix: str, d_in: int, hidden: int,
              rng: np.random.Generator, trainable: bool = True) -> None:
    """Gate packing order along the 4H axis is [input, forget, cell, output].

    Forget-gate bias starts at 1.0.
    """
    params.add(f"{prefix}.W_x", uniform_init(rng, (d_in, 4 * hidden), d_in), trainable)
    params.add(f"{prefix}.W_h", uniform_init(rng, (hidden, 4 * hidden), hidden), trainable)
    bias = np.zeros(4 * hidden)
    bias[hidden : 2 * hidden] = 1.0
    params.add(f"{prefix}.b", bias, trainable)


def init_blstm(params: ModelParams, prefix: str, d_in: int, hidden: int,
               rng: np.random.Generator, trainable: bool = True) -> None:
    init_lstm(params, f"{prefix}.fwd", d_in, hidden, rng, trainable)
    init_lstm(params, f"{prefix}.bwd", d_in, hidden, rng, trainable)


def init_attention(params: ModelParams, prefix: str, d_in: int, d_attn: int,
                   rng: np.random.Generator, trainable: bool = True) -> None:
    params.add(f"{prefix}.W", uniform_init(rng, (d_in, d_attn), d_in), trainable)
    params.add(f"{prefix}.b", np.zeros(d_attn), trainable)
    params.add(f"{prefix}.v", uniform_init(rng, (d_attn,), d_attn), trainable)
