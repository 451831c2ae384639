"""Content, style (Gram) and total-variation losses with analytic gradients.

Style similarity is measured between Gram matrices normalised by
1/(c*h*w) inside :func:`gram`, which makes the style term insensitive to
the working resolution. Scalars are returned as Python floats computed
in double precision; gradients come back as float32 tensors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError
from .network import FeatureExtractor

DEFAULT_CONTENT_TAPS = ("conv4_2",)
DEFAULT_STYLE_TAPS = {
    "conv1_1": 0.2,
    "conv2_1": 0.2,
    "conv3_1": 0.2,
    "conv4_1": 0.2,
    "conv5_1": 0.2,
}

WEIGHT_SUM_TOL = 1e-6


def _default_style_taps() -> dict[str, float]:
    return dict(DEFAULT_STYLE_TAPS)


@dataclass(frozen=True)
class LossConfig:
    """Weights and tap layers of the reconstruction objective."""

    alpha: float = 1.0
    beta: float = 1e3
    tv_weight: float = 1e-3
    content_taps: tuple[str, ...] = DEFAULT_CONTENT_TAPS
    style_taps: dict[str, float] = field(default_factory=_default_style_taps)

    def __post_init__(self):
        object.__setattr__(self, "content_taps", tuple(self.content_taps))
        object.__setattr__(self, "style_taps", dict(self.style_taps))
        for name in ("alpha", "beta", "tv_weight"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0", field=f"loss.{name}")
        if any(w < 0 for w in self.style_taps.values()):
            raise ConfigError(
                "style tap weights must be >= 0", field="loss.style_taps"
            )
        total = sum(self.style_taps.values())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ConfigError(
                f"style tap weights must sum to 1, got {total}",
                field="loss.style_taps",
            )


@dataclass(frozen=True)
class GramMatrix:
    """Channel correlation matrix of one feature map, scaled by 1/(c*h*w)."""

    layer: str
    matrix: np.ndarray
    normalization: float


@dataclass(frozen=True)
class LossBreakdown:
    """Weighted contributions of the objective's three terms."""

    total: float
    content: float
    style: float
    tv: float


def _flat_features(feature: np.ndarray) -> tuple[np.ndarray, float]:
    """Return (c, h*w) float64 view and the 1/(c*h*w) normaliser base."""
    if feature.ndim != 4 or feature.shape[0] != 1:
        raise ShapeError(f"expected feature of shape (1, c, h, w), got {feature.shape}")
    _, c, h, w = feature.shape
    return feature.reshape(c, h * w).astype(np.float64), float(c * h * w)


def gram(feature: np.ndarray, layer: str = "") -> GramMatrix:
    """G[i, j] = sum_p F[i, p] * F[j, p] / (c*h*w) over all spatial positions."""
    flat, n = _flat_features(feature)
    g = flat @ flat.T / n
    g = (g + g.T) * 0.5  # exact symmetry despite BLAS blocking
    return GramMatrix(layer=layer, matrix=g.astype(np.float32), normalization=1.0 / n)


def content_loss(gen_tap: np.ndarray, target_tap: np.ndarray):
    """Mean-squared feature distance: (scalar, d/d(gen_tap))."""
    if gen_tap.shape != target_tap.shape:
        raise ShapeError(
            f"content taps differ in shape: {gen_tap.shape} vs {target_tap.shape}"
        )
    if gen_tap.ndim != 4:
        raise ShapeError(f"expected (1, c, h, w) taps, got {gen_tap.shape}")
    n = float(np.prod(gen_tap.shape[1:]))
    diff = gen_tap.astype(np.float64) - target_tap.astype(np.float64)
    loss = 0.5 * float(np.sum(diff * diff)) / n
    out_dtype = np.float64 if gen_tap.dtype == np.float64 else np.float32
    return loss, (diff / n).astype(out_dtype)


def style_loss(
    gen_taps: dict[str, np.ndarray],
    target_grams: dict[str, GramMatrix],
    weights: dict[str, float],
):
    """Weighted Gram mismatch: (scalar, per-layer gradients w.r.t. taps)."""
    loss = 0.0
    grads: dict[str, np.ndarray] = {}
    for name, w in weights.items():
        if name not in gen_taps:
            raise ConfigError(f"style layer {name!r} missing from generated taps")
        if name not in target_grams:
            raise ConfigError(f"style layer {name!r} missing from target Grams")
        feature = gen_taps[name]
        flat, n = _flat_features(feature)
        g_gen = flat @ flat.T / n
        g_gen = (g_gen + g_gen.T) * 0.5
        delta = g_gen - target_grams[name].matrix.astype(np.float64)
        loss += w * 0.25 * float(np.sum(delta * delta))
        grad = w * (delta @ flat) / n
        out_dtype = np.float64 if feature.dtype == np.float64 else np.float32
        grads[name] = grad.reshape(feature.shape).astype(out_dtype)
    return loss, grads


def tv_loss(image: np.ndarray):
    """Anisotropic total variation: (scalar, d/d(image)), subgradient 0 at ties."""
    if image.ndim != 4:
        raise ShapeError(f"expected (1, c, h, w) image, got {image.shape}")
    x = image.astype(np.float64)
    dh = x[:, :, 1:, :] - x[:, :, :-1, :]
    dw = x[:, :, :, 1:] - x[:, :, :, :-1]
    loss = float(np.sum(np.abs(dh)) + np.sum(np.abs(dw)))
    grad = np.zeros_like(x)
    sh, sw = np.sign(dh), np.sign(dw)
    grad[:, :, 1:, :] += sh
    grad[:, :, :-1, :] -= sh
    grad[:, :, :, 1:] += sw
    grad[:, :, :, :-1] -= sw
    out_dtype = np.float64 if image.dtype == np.float64 else np.float32
    return loss, grad.astype(out_dtype)


def content_targets(
    net: FeatureExtractor, image: np.ndarray, taps
) -> dict[str, np.ndarray]:
    """Capture the content image's activations once, for reuse across steps."""
    return net.features(image, taps)


def style_gram_targets(
    net: FeatureExtractor, image: np.ndarray, taps
) -> dict[str, GramMatrix]:
    """Capture the style image's Gram matrices once, for reuse across steps."""
    feats = net.features(image, list(taps))
    return {name: gram(feats[name], layer=name) for name in taps}


def total_loss(
    gen_image: np.ndarray,
    content_taps: dict[str, np.ndarray],
    style_grams: dict[str, GramMatrix],
    config: LossConfig,
    net: FeatureExtractor,
):
    """Full objective alpha*content + beta*style + tv_weight*tv.

    Returns (scalar, d/d(pixels), breakdown). Terms with zero weight are
    skipped, which leaves them exactly zero in the breakdown.
    """
    wanted: list[str] = []
    if config.alpha > 0:
        wanted.extend(t for t in config.content_taps if t not in wanted)
    if config.beta > 0:
        wanted.extend(t for t in config.style_taps if t not in wanted)
    gen_taps, grad_fn = net.evaluate(gen_image, wanted)

    tap_grads: dict[str, np.ndarray] = {}
    raw_content = 0.0
    if config.alpha > 0:
        for name in config.content_taps:
            if name not in content_taps:
                raise ConfigError(f"no content target captured for tap {name!r}")
            c_loss, c_grad = content_loss(gen_taps[name], content_taps[name])
            raw_content += c_loss
            tap_grads[name] = tap_grads.get(name, 0) + config.alpha * c_grad

    raw_style = 0.0
    if config.beta > 0:
        raw_style, s_grads = style_loss(gen_taps, style_grams, config.style_taps)
        for name, g in s_grads.items():
            tap_grads[name] = tap_grads.get(name, 0) + config.beta * g

    raw_tv = 0.0
    grad_dtype = np.float64 if gen_image.dtype == np.float64 else np.float32
    pixel_grad = np.zeros(gen_image.shape, dtype=grad_dtype)
    if config.tv_weight > 0:
        raw_tv, tv_grad = tv_loss(gen_image)
        pixel_grad += grad_dtype(config.tv_weight) * tv_grad

    if tap_grads:
        pixel_grad += grad_fn(tap_grads)

    breakdown = LossBreakdown(
        total=config.alpha * raw_content
        + config.beta * raw_style
        + config.tv_weight * raw_tv,
        content=config.alpha * raw_content,
        style=config.beta * raw_style,
        tv=config.tv_weight * raw_tv,
    )
    return breakdown.total, pixel_grad, breakdown
