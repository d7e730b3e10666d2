"""Adam over a flat parameter vector with per-group learning rates.

Gradients come from central finite differences with per-group step sizes
(chosen large enough that silhouette terms register pixel changes). The
returned iterate is the best one seen, so the result never regresses below
the initial loss regardless of Adam's oscillation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteLossError

_BETA1 = 0.9
_BETA2 = 0.999
_EPS = 1e-8


@dataclass
class ParamGroup:
    name: str
    start: int
    size: int
    lr: float
    fd_step: float


@dataclass
class AdamResult:
    x: np.ndarray
    loss: float
    trace: list = field(default_factory=list)
    iterations: int = 0


def _fd_gradient(loss_fn, x: np.ndarray, groups) -> np.ndarray:
    g = np.empty_like(x)
    for group in groups:
        h = group.fd_step
        for i in range(group.start, group.start + group.size):
            xp = x.copy()
            xp[i] += h
            xm = x.copy()
            xm[i] -= h
            g[i] = (loss_fn(xp) - loss_fn(xm)) / (2.0 * h)
    return g


def adam_minimize(loss_fn, x0: np.ndarray, groups, max_iterations: int = 300,
                  rel_improvement_tol: float = 1e-5, patience: int = 20,
                  min_iterations: int = 40, on_iteration=None) -> AdamResult:
    """Minimize `loss_fn` starting at `x0`.

    `on_iteration(k, x)` runs before each gradient evaluation and may mutate
    closure state (used to rebuild the body SDF periodically). Early stop
    fires when the best loss has not improved relatively by
    `rel_improvement_tol` over `patience` iterations.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    lr = np.empty_like(x)
    for group in groups:
        lr[group.start:group.start + group.size] = group.lr

    m = np.zeros_like(x)
    v = np.zeros_like(x)
    loss = float(loss_fn(x))
    if not np.isfinite(loss):
        raise NonFiniteLossError("initial loss is not finite")
    best_x = x.copy()
    best_loss = loss
    trace = [loss]
    since_improved = 0
    iterations = 0
    for k in range(1, max_iterations + 1):
        iterations = k
        if on_iteration is not None:
            on_iteration(k, x)
        g = _fd_gradient(loss_fn, x, groups)
        if not np.all(np.isfinite(g)):
            raise NonFiniteLossError("gradient is not finite")
        m = _BETA1 * m + (1.0 - _BETA1) * g
        v = _BETA2 * v + (1.0 - _BETA2) * g * g
        mhat = m / (1.0 - _BETA1 ** k)
        vhat = v / (1.0 - _BETA2 ** k)
        x = x - lr * mhat / (np.sqrt(vhat) + _EPS)
        loss = float(loss_fn(x))
        if not np.isfinite(loss):
            raise NonFiniteLossError(f"loss not finite at iteration {k}")
        trace.append(loss)
        if loss < best_loss - rel_improvement_tol * max(abs(best_loss), 1e-12):
            best_loss = loss
            best_x = x.copy()
            since_improved = 0
        else:
            if loss < best_loss:
                best_loss = loss
                best_x = x.copy()
            since_improved += 1
            if k >= min_iterations and since_improved >= patience:
                break
    return AdamResult(best_x, best_loss, trace, iterations)
