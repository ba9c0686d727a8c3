"""Central-difference gradient checking for any loss closure."""

from __future__ import annotations

import numpy as np

from .params import ModelParams


class NonDeterministicClosureError(RuntimeError):
    """Two evaluations of the loss closure disagreed."""


def grad_check(
    closure,
    params: ModelParams,
    step: float = 1e-6,
    names: list[str] | None = None,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> dict[str, float]:
    """Compare analytic gradients against central finite differences.

    `closure()` must zero the gradients, run forward+backward and return the
    scalar loss. Relative error per entry is
    |g_a - g_n| / max(1, |g_a|, |g_n|); the report maps each parameter path
    to its max relative error. `max_entries` limits how many entries per
    tensor are probed (seeded subsample) for larger models.
    """
    loss_a = closure()
    loss_b = closure()
    if loss_a != loss_b:
        raise NonDeterministicClosureError(
            f"closure returned {loss_a!r} then {loss_b!r}"
        )
    analytic = {name: g.copy() for name, g in params.grads.items()}

    if names is None:
        names = [n for n in params.names() if params.trainable[n]]
    report: dict[str, float] = {}
    for name in names:
        value = params.values[name]
        flat = value.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            if rng is None:
                rng = np.random.default_rng(0)
            idx = rng.choice(flat.size, size=max_entries, replace=False)
            idx.sort()
        worst = 0.0
        grad_flat = analytic[name].reshape(-1)
        for k in idx:
            orig = flat[k]
            flat[k] = orig + step
            loss_plus = closure()
            flat[k] = orig - step
            loss_minus = closure()
            flat[k] = orig
            numeric = (loss_plus - loss_minus) / (2.0 * step)
            g_a = grad_flat[k]
            rel = abs(g_a - numeric) / max(1.0, abs(g_a), abs(numeric))
            worst = max(worst, rel)
        report[name] = worst

    # closures are allowed to cache nothing; restore the analytic grads
    closure()
    for name, g in analytic.items():
        params.grads[name][...] = g
    return report
