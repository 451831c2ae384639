"""Portable convolution-weight file (.nstw).

Layout, little-endian throughout::

    magic "NSTW" | u32 version=1 | u32 metadata_len | metadata UTF-8
    | u32 layer_count
    | per layer: u16 name_len | name UTF-8 | u8 tensor_count
    |            per tensor: u8 rank | u32 dims[rank] | f32 data[prod(dims)]
    | u32 CRC-32 over all preceding bytes

Metadata is ``key=value`` lines; the engine reads the per-channel input
means (``mean_r``, ``mean_g``, ``mean_b``) from it so that a weight file
carries its own preprocessing convention.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import WeightFormatError, WeightTruncationError

MAGIC = b"NSTW"
VERSION = 1


@dataclass(frozen=True)
class LayerWeights:
    """Kernel (c_out, c_in, k, k) and bias (c_out,) of one conv layer."""

    kernel: np.ndarray
    bias: np.ndarray


@dataclass
class WeightStore:
    """Named conv weights plus free-form metadata, immutable once built."""

    entries: dict[str, LayerWeights] = field(default_factory=dict)
    metadata: dict[str, str] = field(default_factory=dict)

    def channel_means(self) -> tuple[float, float, float]:
        """Per-channel input means recorded by the exporter (default 0)."""
        return tuple(
            float(self.metadata.get(f"mean_{ch}", "0")) for ch in ("r", "g", "b")
        )

    def input_scale(self) -> float:
        """Factor mapping [0, 1] pixels into the weights' input range.

        Plain stores default to 1; pretrained VGG exports record 255 so
        images enter the network in the convention they were trained on.
        """
        return float(self.metadata.get("input_scale", "1"))


def _metadata_bytes(metadata: dict[str, str]) -> bytes:
    lines = [f"{k}={v}" for k, v in metadata.items()]
    return "\n".join(lines).encode("utf-8")


def _parse_metadata(blob: bytes) -> dict[str, str]:
    meta: dict[str, str] = {}
    for line in blob.decode("utf-8").splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            meta[key] = value
    return meta


def save_weights(store: WeightStore, path) -> None:
    """Write ``store`` to ``path`` in the .nstw format."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    meta = _metadata_bytes(store.metadata)
    out += struct.pack("<I", len(meta))
    out += meta
    out += struct.pack("<I", len(store.entries))
    for name, lw in store.entries.items():
        encoded = name.encode("utf-8")
        out += struct.pack("<H", len(encoded))
        out += encoded
        tensors = (lw.kernel, lw.bias)
        out += struct.pack("<B", len(tensors))
        for tensor in tensors:
            arr = np.ascontiguousarray(tensor, dtype="<f4")
            out += struct.pack("<B", arr.ndim)
            out += struct.pack(f"<{arr.ndim}I", *arr.shape)
            out += arr.tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(bytes(out))


class _Reader:
    """Cursor over the file bytes that reports the offset of any shortfall."""

    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, count: int, what: str) -> bytes:
        if self.pos + count > len(self.blob):
            raise WeightTruncationError(
                f"file ends inside {what}: wanted {count} bytes", self.pos
            )
        chunk = self.blob[self.pos : self.pos + count]
        self.pos += count
        return chunk

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def load_weights(path) -> WeightStore:
    """Read a .nstw file, verifying structure and the trailing CRC-32."""
    with open(path, "rb") as fh:
        blob = fh.read()

    r = _Reader(blob)
    if r.take(4, "magic") != MAGIC:
        raise WeightFormatError(f"bad magic, expected {MAGIC!r}", 0)
    version = r.u32("version")
    if version != VERSION:
        raise WeightFormatError(f"unsupported version {version}", 4)

    meta_len = r.u32("metadata length")
    meta_offset = r.pos
    try:
        metadata = _parse_metadata(r.take(meta_len, "metadata"))
    except UnicodeDecodeError as exc:
        raise WeightFormatError(f"metadata is not valid UTF-8: {exc}", meta_offset)

    entries: dict[str, LayerWeights] = {}
    layer_count = r.u32("layer count")
    for _ in range(layer_count):
        name_len = r.u16("layer name length")
        name_offset = r.pos
        try:
            name = r.take(name_len, "layer name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WeightFormatError(f"layer name is not valid UTF-8: {exc}", name_offset)
        tensor_count = r.u8("tensor count")
        if tensor_count != 2:
            raise WeightFormatError(
                f"layer {name!r} carries {tensor_count} tensors, expected "
                "kernel + bias",
                r.pos - 1,
            )
        tensors = []
        for _ in range(tensor_count):
            rank = r.u8("tensor rank")
            dims = struct.unpack(f"<{rank}I", r.take(4 * rank, "tensor dims"))
            count = int(np.prod(dims, dtype=np.int64)) if rank else 1
            data = r.take(4 * count, f"tensor data of layer {name!r}")
            tensors.append(np.frombuffer(data, dtype="<f4").reshape(dims).copy())
        kernel, bias = tensors
        if kernel.ndim != 4:
            raise WeightFormatError(
                f"layer {name!r} kernel has rank {kernel.ndim}, expected 4", r.pos
            )
        if bias.ndim != 1 or bias.shape[0] != kernel.shape[0]:
            raise WeightFormatError(
                f"layer {name!r} bias shape {bias.shape} does not match kernel "
                f"{kernel.shape}",
                r.pos,
            )
        entries[name] = LayerWeights(kernel=kernel, bias=bias)

    crc_offset = r.pos
    stored = r.u32("checksum")
    actual = zlib.crc32(blob[:crc_offset]) & 0xFFFFFFFF
    if stored != actual:
        raise WeightFormatError(
            f"checksum mismatch: stored {stored:#010x}, computed {actual:#010x}",
            crc_offset,
        )
    if r.pos != len(blob):
        raise WeightFormatError(
            f"{len(blob) - r.pos} trailing bytes after checksum", r.pos
        )
    return WeightStore(entries=entries, metadata=metadata)
