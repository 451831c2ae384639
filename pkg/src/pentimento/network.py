"""VGG-style feature extraction with named activation taps.

A network is an ordered list of conv / relu / pool layers; conv layers
pull their kernel and bias from a :class:`~pentimento.weights.WeightStore`
by layer name. Images enter in [0, 1] and are mapped into the weights'
own input convention (scale and per-channel means, both recorded in the
weight file metadata), so the engine stays agnostic of where the weights
came from. Pretrained VGG exports use scale 255 with subtracted means;
plain stores default to the identity mapping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import ConfigError, ShapeError
from .weights import WeightStore

_KINDS = ("conv", "relu", "pool")


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layers plus the convolution border mode used throughout."""

    layers: tuple[LayerSpec, ...]
    padding: str = ops.PAD_REFLECT

    def layer_names(self) -> list[str]:
        return [layer.name for layer in self.layers]


def vgg16_spec(padding: str = ops.PAD_REFLECT) -> NetworkSpec:
    """The 13-conv VGG-16 prefix: conv1_1 .. conv5_3, relu after each conv,
    2x2 average pool after each block."""
    blocks = (2, 2, 3, 3, 3)
    layers: list[LayerSpec] = []
    for b, convs in enumerate(blocks, start=1):
        for i in range(1, convs + 1):
            layers.append(LayerSpec(f"conv{b}_{i}", "conv"))
            layers.append(LayerSpec(f"relu{b}_{i}", "relu"))
        layers.append(LayerSpec(f"pool{b}", "pool"))
    return NetworkSpec(layers=tuple(layers), padding=padding)


def validate_network(spec: NetworkSpec, weights: WeightStore, in_channels: int = 3):
    """Check name uniqueness, weight presence and the channel chain.

    Returns the per-layer output channel counts in layer order.
    """
    seen: set[str] = set()
    channels = in_channels
    chain = []
    for layer in spec.layers:
        if layer.name in seen:
            raise ConfigError(f"duplicate layer name {layer.name!r}")
        seen.add(layer.name)
        if layer.kind not in _KINDS:
            raise ConfigError(f"layer {layer.name!r} has unknown kind {layer.kind!r}")
        if layer.kind == "conv":
            entry = weights.entries.get(layer.name)
            if entry is None:
                raise ConfigError(f"no weights for conv layer {layer.name!r}")
            if entry.kernel.shape[1] != channels:
                raise ShapeError(
                    f"layer {layer.name!r} expects {entry.kernel.shape[1]} input "
                    f"channels but receives {channels}"
                )
            channels = entry.kernel.shape[0]
        chain.append(channels)
    return chain


def _conv_params(spec: NetworkSpec, weights: WeightStore, name: str) -> ops.ConvParams:
    entry = weights.entries[name]
    return ops.ConvParams(
        kernel=entry.kernel, bias=entry.bias, stride=1, padding=spec.padding
    )


def _check_image(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    image = image.astype(ops.work_dtype(image), copy=False)
    if image.ndim != 4 or image.shape[0] != 1 or image.shape[1] != 3:
        raise ShapeError(f"expected image of shape (1, 3, h, w), got {image.shape}")
    return image


def _check_taps(spec: NetworkSpec, names) -> list[str]:
    valid = spec.layer_names()
    for name in names:
        if name not in valid:
            raise ConfigError(
                f"unknown tap {name!r}; valid layers: {', '.join(valid)}"
            )
    return list(names)


def _preprocess(image: np.ndarray, weights: WeightStore) -> np.ndarray:
    dtype = ops.work_dtype(image)
    means = np.array(weights.channel_means(), dtype=dtype).reshape(1, 3, 1, 1)
    return (image * dtype(weights.input_scale()) - means).astype(dtype)


def _run_layers(spec: NetworkSpec, weights: WeightStore, x: np.ndarray, upto: int):
    """Forward through layers[0..upto], returning per-layer (input, output)."""
    inputs, outputs = [], []
    for layer in spec.layers[: upto + 1]:
        inputs.append(x)
        if layer.kind == "conv":
            x = ops.conv2d_forward(x, _conv_params(spec, weights, layer.name))
        elif layer.kind == "relu":
            x = ops.relu_forward(x)
        else:
            x = ops.avg_pool_forward(x, window=2, stride=2)
        outputs.append(x)
    return inputs, outputs


def forward_with_taps(
    spec: NetworkSpec, weights: WeightStore, image: np.ndarray, taps
) -> dict[str, np.ndarray]:
    """Run the network and capture the named activations.

    The result maps each requested name to its activation, in request
    order. With no taps the network is still validated but not executed.
    """
    image = _check_image(image)
    requested = _check_taps(spec, taps)
    validate_network(spec, weights)
    if not requested:
        return {}
    names = spec.layer_names()
    deepest = max(names.index(name) for name in requested)
    _, outputs = _run_layers(spec, weights, _preprocess(image, weights), deepest)
    return {name: outputs[names.index(name)] for name in requested}


def _backward_from_cache(
    spec: NetworkSpec,
    weights: WeightStore,
    image: np.ndarray,
    tap_grads: dict[str, np.ndarray],
    inputs: list,
    outputs: list,
) -> np.ndarray:
    """Reverse pass over cached layer activations."""
    names = spec.layer_names()
    deepest = max(names.index(name) for name in tap_grads)
    grad: np.ndarray | None = None
    for i in range(deepest, -1, -1):
        layer = spec.layers[i]
        out_grad = np.zeros_like(outputs[i]) if grad is None else grad
        tap = tap_grads.get(layer.name)
        if tap is not None:
            tap = np.asarray(tap, dtype=ops.work_dtype(image))
            if tap.shape != outputs[i].shape:
                raise ShapeError(
                    f"tap gradient for {layer.name!r} has shape {tap.shape}, "
                    f"activation is {outputs[i].shape}"
                )
            out_grad = out_grad + tap
        if layer.kind == "conv":
            grad = ops.conv2d_backward_input(
                out_grad, _conv_params(spec, weights, layer.name), inputs[i].shape
            )
        elif layer.kind == "relu":
            grad = ops.relu_backward(out_grad, inputs[i])
        else:
            grad = ops.avg_pool_backward(out_grad, inputs[i].shape, window=2, stride=2)
    dtype = ops.work_dtype(image)
    return (grad * dtype(weights.input_scale())).astype(dtype)


def backward_to_input(
    spec: NetworkSpec,
    weights: WeightStore,
    image: np.ndarray,
    tap_grads: dict[str, np.ndarray],
) -> np.ndarray:
    """Accumulate dL/d(image) from per-tap activation gradients.

    ``tap_grads`` maps layer names to dL/d(activation); contributions from
    multiple taps add. The chain rule runs back through every layer and
    the input preprocessing.
    """
    image = _check_image(image)
    _check_taps(spec, tap_grads.keys())
    validate_network(spec, weights)
    if not tap_grads:
        return np.zeros_like(image)
    names = spec.layer_names()
    deepest = max(names.index(name) for name in tap_grads)
    inputs, outputs = _run_layers(spec, weights, _preprocess(image, weights), deepest)
    return _backward_from_cache(spec, weights, image, tap_grads, inputs, outputs)


class FeatureExtractor:
    """A validated (spec, weights) pair with the two passes as methods."""

    def __init__(self, spec: NetworkSpec, weights: WeightStore):
        validate_network(spec, weights)
        self.spec = spec
        self.weights = weights

    def features(self, image: np.ndarray, taps) -> dict[str, np.ndarray]:
        return forward_with_taps(self.spec, self.weights, image, taps)

    def input_gradient(
        self, image: np.ndarray, tap_grads: dict[str, np.ndarray]
    ) -> np.ndarray:
        return backward_to_input(self.spec, self.weights, image, tap_grads)

    def evaluate(self, image: np.ndarray, taps):
        """One forward pass shared between tap capture and backprop.

        Returns ``(taps_dict, grad_fn)``: ``grad_fn(tap_grads)`` replays
        the chain rule over the cached activations without re-running the
        forward pass. Results match features() + input_gradient() exactly.
        """
        image = _check_image(image)
        requested = _check_taps(self.spec, taps)
        if not requested:
            return {}, lambda tap_grads: np.zeros_like(image)
        names = self.spec.layer_names()
        deepest = max(names.index(name) for name in requested)
        inputs, outputs = _run_layers(
            self.spec, self.weights, _preprocess(image, self.weights), deepest
        )
        captured = {name: outputs[names.index(name)] for name in requested}

        def grad_fn(tap_grads: dict[str, np.ndarray]) -> np.ndarray:
            if not tap_grads:
                return np.zeros_like(image)
            unknown = set(tap_grads) - set(requested)
            if unknown:
                raise ShapeError(
                    f"tap gradients for layers not captured: {sorted(unknown)}"
                )
            return _backward_from_cache(
                self.spec, self.weights, image, tap_grads, inputs, outputs
            )

        return captured, grad_fn
