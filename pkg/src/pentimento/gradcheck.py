"""Finite-difference verification of every analytic gradient in the engine.

Used by the ``pentimento gradcheck`` CLI and by the test suite. The
checks run the production code paths on float64 tensors so that the
central differences are limited by truncation error, not storage
precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import LossConfig, content_targets, style_gram_targets, total_loss
from .network import FeatureExtractor, LayerSpec, NetworkSpec
from .weights import LayerWeights, WeightStore


def central_difference(f, x: np.ndarray, eps: float = 1e-3) -> np.ndarray:
    """Central finite differences of scalar ``f`` at every element of ``x``."""
    grad = np.zeros(x.shape, dtype=np.float64)
    flat = grad.ravel()
    base = x.astype(np.float64)
    for i in range(base.size):
        probe = base.copy().ravel()
        probe[i] += eps
        f_plus = f(probe.reshape(x.shape))
        probe[i] -= 2 * eps
        f_minus = f(probe.reshape(x.shape))
        flat[i] = (f_plus - f_minus) / (2 * eps)
    return grad


def relative_errors(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8):
    """Elementwise |a - n| / max(|a|, |n|); entries below ``floor`` count as 0."""
    a = analytic.astype(np.float64).ravel()
    n = numeric.astype(np.float64).ravel()
    denom = np.maximum(np.abs(a), np.abs(n))
    err = np.abs(a - n)
    rel = np.where(denom > 0, err / np.where(denom > 0, denom, 1.0), 0.0)
    rel[err <= floor] = 0.0
    return rel


def make_random_network(
    seed: int,
    channels=(3, 6, 6, 6),
    kernel: int = 3,
    padding: str = "reflect",
    pool_blocks=(),
):
    """A small conv+relu stack with reproducible random weights.

    ``channels`` starts at the input channel count; each transition adds
    one conv layer. Indices in ``pool_blocks`` get a 2x2 average pool
    after their relu. Weights are scaled so activations stay O(1); biases
    lean positive so most units stay clear of the relu kink, which keeps
    finite-difference probes well conditioned.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    layers: list[LayerSpec] = []
    entries: dict[str, LayerWeights] = {}
    for i in range(len(channels) - 1):
        c_in, c_out = channels[i], channels[i + 1]
        name = f"conv{i + 1}"
        fan_in = c_in * kernel * kernel
        scale = 1.0 / np.sqrt(fan_in)
        k = rng.standard_normal((c_out, c_in, kernel, kernel)) * scale
        b = rng.uniform(0.05, 0.15, c_out)
        entries[name] = LayerWeights(
            kernel=k.astype(np.float32), bias=b.astype(np.float32)
        )
        layers.append(LayerSpec(name, "conv"))
        layers.append(LayerSpec(f"relu{i + 1}", "relu"))
        if i in pool_blocks:
            layers.append(LayerSpec(f"pool{i + 1}", "pool"))
    spec = NetworkSpec(layers=tuple(layers), padding=padding)
    store = WeightStore(entries=entries, metadata={"source": f"random seed={seed}"})
    return spec, store


def gradcheck_config(channels=(3, 6, 6, 6)) -> LossConfig:
    """Loss weights sized so all three terms contribute at test scale."""
    conv_names = [f"conv{i}" for i in range(1, len(channels))]
    style = {name: 1.0 / len(conv_names) for name in conv_names}
    return LossConfig(
        alpha=1.0, beta=5.0, tv_weight=1e-3, content_taps=(conv_names[-1],),
        style_taps=style,
    )


def fd_friendly_image(rng, shape) -> np.ndarray:
    """Random image whose neighbour differences stay clear of FD windows.

    Each channel is a random permutation of an evenly spaced grid over
    (0, 1), so no two pixels are closer than 1/(h*w). That keeps a
    central difference from straddling the total-variation kink at ties,
    which is a fixture property, not a property of the gradients.
    """
    n, c, h, w = shape
    out = np.empty(shape, dtype=np.float64)
    grid = (np.arange(h * w) + 0.5) / (h * w)
    for b in range(n):
        for ch in range(c):
            out[b, ch] = rng.permutation(grid).reshape(h, w)
    return out


@dataclass
class GradcheckResult:
    name: str
    passed: bool
    max_rel_err: float
    fraction_ok: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"[{status}] {self.name}: max rel err {self.max_rel_err:.3e}, "
            f"{100 * self.fraction_ok:.2f}% of entries within tolerance"
            + (f" ({self.detail})" if self.detail else "")
        )


def check_total_loss_gradient(
    seed: int = 0,
    size: int = 8,
    eps: float = 1e-3,
    tol: float = 1e-3,
    min_fraction: float = 0.99,
) -> GradcheckResult:
    """Pixel gradient of the full objective vs central differences."""
    spec, store = make_random_network(seed)
    net = FeatureExtractor(spec, store)
    rng = np.random.Generator(np.random.PCG64(seed + 1))
    gen = fd_friendly_image(rng, (1, 3, size, size))
    content = rng.random((1, 3, size, size))
    style = rng.random((1, 3, size, size))
    config = gradcheck_config()

    targets = content_targets(net, content, config.content_taps)
    grams = style_gram_targets(net, style, config.style_taps)
    _, analytic, _ = total_loss(gen, targets, grams, config, net)

    def scalar(img):
        return total_loss(img, targets, grams, config, net)[0]

    numeric = central_difference(scalar, gen, eps=eps)
    rel = relative_errors(analytic, numeric)
    fraction = float(np.mean(rel <= tol))
    return GradcheckResult(
        name="total_loss pixel gradient",
        passed=fraction >= min_fraction,
        max_rel_err=float(rel.max()),
        fraction_ok=fraction,
        detail=f"seed={seed}, {size}x{size}, eps={eps}",
    )


def check_network_backward(seed: int = 0, size: int = 6, eps: float = 1e-4,
                           tol: float = 1e-3) -> GradcheckResult:
    """d(sum of squared tap activations)/d(image) vs central differences."""
    spec, store = make_random_network(seed, channels=(3, 4, 4), pool_blocks=(0,))
    net = FeatureExtractor(spec, store)
    rng = np.random.Generator(np.random.PCG64(seed + 2))
    image = rng.random((1, 3, size, size))
    taps = ["conv1", "conv2"]

    def scalar(img):
        feats = net.features(img, taps)
        return sum(float(np.sum(f.astype(np.float64) ** 2)) for f in feats.values())

    feats = net.features(image, taps)
    tap_grads = {name: 2.0 * feats[name] for name in taps}
    analytic = net.input_gradient(image, tap_grads)
    numeric = central_difference(scalar, image, eps=eps)
    rel = relative_errors(analytic, numeric)
    return GradcheckResult(
        name="feature network input gradient",
        passed=bool(np.all(rel <= tol)),
        max_rel_err=float(rel.max()),
        fraction_ok=float(np.mean(rel <= tol)),
        detail=f"seed={seed}",
    )


def run_suite(seed: int = 0) -> list[GradcheckResult]:
    """The checks behind ``pentimento gradcheck``."""
    return [
        check_network_backward(seed=seed),
        check_total_loss_gradient(seed=seed),
    ]
