"""Pixel-space optimizers: Adam (default) and L-BFGS with Armijo backtracking.

Both project the image back into [0, 1] after every step, which keeps
8-bit export trivial and makes penalty terms unnecessary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError


def clamp_unit(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0)


@dataclass(frozen=True)
class AdamState:
    """First/second moment estimates and the step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, x: np.ndarray) -> "AdamState":
        return cls(m=np.zeros_like(x), v=np.zeros_like(x), t=0)


def adam_step(
    image: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """One bias-corrected Adam update followed by a [0, 1] clamp.

    Returns ``(new_image, new_state)``; inputs are not mutated.
    """
    if grad.shape != image.shape:
        raise ShapeError(f"gradient shape {grad.shape} != image shape {image.shape}")
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    step = lr * m_hat / (np.sqrt(v_hat) + eps)
    new_image = clamp_unit(image - step).astype(image.dtype)
    return new_image, AdamState(m=m.astype(image.dtype), v=v.astype(image.dtype), t=t)


@dataclass
class LbfgsState:
    """Curvature pair memory for the two-loop recursion."""

    history: int = 10
    s_list: list = field(default_factory=list)
    y_list: list = field(default_factory=list)
    prev_x: np.ndarray | None = None
    prev_g: np.ndarray | None = None


def _two_loop(grad: np.ndarray, state: LbfgsState) -> np.ndarray:
    """Approximate H^{-1} @ grad from the stored (s, y) pairs."""
    q = grad.astype(np.float64).ravel().copy()
    alphas = []
    pairs = list(zip(state.s_list, state.y_list))
    for s, y in reversed(pairs):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ q)
        q -= a * y
        alphas.append((rho, a))
    if pairs:
        s, y = pairs[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y), (rho, a) in zip(pairs, reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q.reshape(grad.shape)


def lbfgs_step(
    image: np.ndarray,
    loss: float,
    grad: np.ndarray,
    state: LbfgsState,
    evaluate,
    max_backtracks: int = 20,
    armijo_c: float = 1e-4,
):
    """One L-BFGS step with Armijo backtracking, projected onto [0, 1].

    ``evaluate(image) -> float`` supplies loss values for the line search.
    Returns ``(new_image, state)``; the state is updated in place with the
    curvature pair from the accepted move.
    """
    if state.prev_x is not None:
        s = (image.astype(np.float64) - state.prev_x).ravel()
        y = (grad.astype(np.float64) - state.prev_g).ravel()
        if float(s @ y) > 1e-10:
            state.s_list.append(s)
            state.y_list.append(y)
            if len(state.s_list) > state.history:
                state.s_list.pop(0)
                state.y_list.pop(0)

    direction = -_two_loop(grad, state)
    slope = float(direction.ravel() @ grad.astype(np.float64).ravel())
    if slope >= 0:  # not a descent direction; fall back to steepest descent
        direction = -grad.astype(np.float64)
        slope = -float(np.sum(direction * direction))

    step = 1.0
    new_image = image
    for _ in range(max_backtracks):
        candidate = clamp_unit(image + step * direction).astype(image.dtype)
        if evaluate(candidate) <= loss + armijo_c * step * slope:
            new_image = candidate
            break
        step *= 0.5
    state.prev_x = image.astype(np.float64)
    state.prev_g = grad.astype(np.float64)
    return new_image, state
