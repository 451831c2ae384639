"""Extract VGG-16 convolution weights and write the portable .nstw file.

The output format (little-endian, CRC-32 trailer) is written here from
its byte-level definition; the reconstruction engine is a separate
package and only ever sees the file.

The engine feeds images as [0, 1] pixels scaled by the file's
``input_scale`` minus per-channel means. torchvision's VGG-16 was trained
on (x - mean)/std with x in [0, 1], so the exporter folds 1/(255 * std_c)
into the first conv layer's kernels and records ``input_scale=255`` with
means ``255 * mean_c`` — an exact reparameterization of the torchvision
convention.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"NSTW"
VERSION = 1

# torchvision vgg16 .features indices of the 13 conv layers, in order.
TORCHVISION_LAYER_MAP = {
    "features.0": "conv1_1",
    "features.2": "conv1_2",
    "features.5": "conv2_1",
    "features.7": "conv2_2",
    "features.10": "conv3_1",
    "features.12": "conv3_2",
    "features.14": "conv3_3",
    "features.17": "conv4_1",
    "features.19": "conv4_2",
    "features.21": "conv4_3",
    "features.24": "conv5_1",
    "features.26": "conv5_2",
    "features.28": "conv5_3",
}

# (c_out, c_in) per conv layer; every kernel is 3x3.
EXPECTED_CHANNELS = {
    "conv1_1": (64, 3),
    "conv1_2": (64, 64),
    "conv2_1": (128, 64),
    "conv2_2": (128, 128),
    "conv3_1": (256, 128),
    "conv3_2": (256, 256),
    "conv3_3": (256, 256),
    "conv4_1": (512, 256),
    "conv4_2": (512, 512),
    "conv4_3": (512, 512),
    "conv5_1": (512, 512),
    "conv5_2": (512, 512),
    "conv5_3": (512, 512),
}

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
INPUT_SCALE = 255.0


class ExportError(Exception):
    pass


@dataclass
class ExportManifest:
    """What to export: source weights, layer mapping, output path."""

    source: str
    output: str
    layer_map: dict[str, str] = field(
        default_factory=lambda: dict(TORCHVISION_LAYER_MAP)
    )
    channel_means: tuple[float, float, float] = tuple(
        INPUT_SCALE * m for m in IMAGENET_MEAN
    )
    fold_std: tuple[float, float, float] = IMAGENET_STD

    def validate(self) -> None:
        targets = sorted(self.layer_map.values())
        expected = sorted(EXPECTED_CHANNELS)
        if targets != expected:
            missing = sorted(set(expected) - set(targets))
            extra = sorted(set(targets) - set(expected))
            detail = []
            if missing:
                detail.append(f"missing {', '.join(missing)}")
            if extra:
                detail.append(f"unexpected {', '.join(extra)}")
            raise ExportError(
                f"layer mapping must cover exactly the 13 VGG-16 conv layers: "
                f"{'; '.join(detail)}"
            )


def seeded_state_dict(seed: int = 0) -> dict:
    """Architecture-faithful random weights, for tests and offline runs."""
    import torch

    gen = torch.Generator().manual_seed(seed)
    state = {}
    for source, target in TORCHVISION_LAYER_MAP.items():
        c_out, c_in = EXPECTED_CHANNELS[target]
        state[f"{source}.weight"] = (
            torch.randn((c_out, c_in, 3, 3), generator=gen) * 0.05
        )
        state[f"{source}.bias"] = torch.randn((c_out,), generator=gen) * 0.05
    return state


def load_source_state(source: str) -> dict:
    """Resolve a manifest source string into a state dict.

    ``torchvision`` downloads the pretrained checkpoint; ``seeded[:N]``
    builds deterministic random weights; anything else is treated as a
    local checkpoint path for ``torch.load``.
    """
    if source == "torchvision":
        from torchvision.models import VGG16_Weights, vgg16

        model = vgg16(weights=VGG16_Weights.IMAGENET1K_V1)
        return model.state_dict()
    if source.startswith("seeded"):
        _, _, seed = source.partition(":")
        return seeded_state_dict(int(seed) if seed else 0)
    import torch

    try:
        state = torch.load(source, map_location="cpu", weights_only=True)
    except (OSError, RuntimeError, ValueError) as exc:
        raise ExportError(f"cannot load checkpoint {source!r}: {exc}") from exc
    if isinstance(state, dict) and "state_dict" in state:
        state = state["state_dict"]
    return state


def extract_layers(state: dict, layer_map: dict[str, str]) -> dict[str, tuple]:
    """Pull (kernel, bias) float32 arrays for every mapped conv layer."""
    layers: dict[str, tuple] = {}
    for source_name in sorted(layer_map, key=lambda s: layer_map[s]):
        target = layer_map[source_name]
        weight_key, bias_key = f"{source_name}.weight", f"{source_name}.bias"
        if weight_key not in state or bias_key not in state:
            raise ExportError(f"source is missing layer {source_name!r} ({target})")
        kernel = np.asarray(state[weight_key].detach().cpu().numpy(),
                            dtype=np.float32)
        bias = np.asarray(state[bias_key].detach().cpu().numpy(), dtype=np.float32)
        c_out, c_in = EXPECTED_CHANNELS[target]
        if kernel.shape != (c_out, c_in, 3, 3):
            raise ExportError(
                f"layer {target}: kernel shape {kernel.shape} != "
                f"{(c_out, c_in, 3, 3)}"
            )
        if bias.shape != (c_out,):
            raise ExportError(f"layer {target}: bias shape {bias.shape} != ({c_out},)")
        layers[target] = (kernel, bias)
    return layers


def fold_input_normalization(layers: dict, std: tuple) -> dict:
    """Divide conv1_1's per-input-channel kernels by 255 * std_c."""
    kernel, bias = layers["conv1_1"]
    folded = kernel.astype(np.float64).copy()
    for c in range(3):
        folded[:, c, :, :] /= INPUT_SCALE * std[c]
    out = dict(layers)
    out["conv1_1"] = (folded.astype(np.float32), bias)
    return out


def write_nstw(path, layers: dict[str, tuple], metadata: dict[str, str]) -> None:
    """Serialize layers per the .nstw byte layout with a CRC-32 trailer."""
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    meta = "\n".join(f"{k}={v}" for k, v in metadata.items()).encode("utf-8")
    blob += struct.pack("<I", len(meta))
    blob += meta
    blob += struct.pack("<I", len(layers))
    for name, (kernel, bias) in layers.items():
        encoded = name.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<B", 2)
        for tensor in (kernel, bias):
            arr = np.ascontiguousarray(tensor, dtype="<f4")
            blob += struct.pack("<B", arr.ndim)
            blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
            blob += arr.tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def export(manifest: ExportManifest) -> str:
    """Run the full extraction and write the weight file."""
    manifest.validate()
    state = load_source_state(manifest.source)
    layers = extract_layers(state, manifest.layer_map)
    layers = fold_input_normalization(layers, manifest.fold_std)
    ordered = {name: layers[name] for name in EXPECTED_CHANNELS}
    metadata = {
        "arch": "vgg16",
        "source": manifest.source,
        "input_scale": f"{INPUT_SCALE:g}",
        "mean_r": repr(manifest.channel_means[0]),
        "mean_g": repr(manifest.channel_means[1]),
        "mean_b": repr(manifest.channel_means[2]),
    }
    write_nstw(manifest.output, ordered, metadata)
    return manifest.output
