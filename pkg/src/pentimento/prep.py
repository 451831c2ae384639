"""Radiograph and painting preparation.

Images live here as float32 arrays in [0, 1]: grayscale as (h, w), colour
as (h, w, 3). Masks are boolean (h, w) arrays where True marks pixels to
remove (impressions of the exterior painting). Every operation clamps its
output to [0, 1] and never touches unmasked pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, DecodeError, ShapeError

MASK_THRESHOLD = 128  # 8-bit mask value meaning "remove"


def load_image(path) -> np.ndarray:
    """Decode a PNG/JPEG into [0, 1]: (h, w) if grayscale, else (h, w, 3)."""
    try:
        with Image.open(path) as im:
            if im.mode == "L":
                arr = np.asarray(im, dtype=np.float32)
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from exc
    return arr / np.float32(255.0)


def save_image(img: np.ndarray, path) -> None:
    """Write an 8-bit PNG (or JPEG by extension) from a [0, 1] array."""
    arr = np.clip(np.asarray(img, dtype=np.float32), 0.0, 1.0)
    data = np.rint(arr * 255.0).astype(np.uint8)
    mode = "L" if data.ndim == 2 else "RGB"
    Image.fromarray(data, mode=mode).save(path)


def load_mask(path, shape=None) -> np.ndarray:
    """Read an 8-bit grayscale mask; values >= 128 mean "remove"."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode mask {path}: {exc}") from exc
    mask = arr >= MASK_THRESHOLD
    if shape is not None and mask.shape != tuple(shape):
        raise ShapeError(f"mask shape {mask.shape} does not match image {shape}")
    return mask


def to_gray(img: np.ndarray) -> np.ndarray:
    """Collapse colour to luminance (Rec. 601); grayscale passes through."""
    if img.ndim == 2:
        return np.asarray(img, dtype=np.float32)
    weights = np.array([0.299, 0.587, 0.114], dtype=np.float32)
    return np.clip(img @ weights, 0.0, 1.0).astype(np.float32)


def normalize_contrast(
    img: np.ndarray, lo_pct: float = 1.0, hi_pct: float = 99.0
) -> np.ndarray:
    """Linear stretch mapping the lo/hi percentiles to 0/1, then clamp.

    Constant (or near-constant) images map to a flat 0.5.
    """
    if lo_pct >= hi_pct:
        raise ConfigError(f"lo_pct {lo_pct} must be below hi_pct {hi_pct}")
    lo, hi = np.percentile(img, [lo_pct, hi_pct])
    if hi - lo < 1e-12:
        return np.full_like(np.asarray(img, dtype=np.float32), 0.5)
    out = (img.astype(np.float64) - lo) / (hi - lo)
    return np.clip(out, 0.0, 1.0).astype(np.float32)


@dataclass(frozen=True)
class InpaintResult:
    image: np.ndarray
    iterations: int
    converged: bool


def _neighbor_mean(x: np.ndarray) -> np.ndarray:
    """4-neighbour mean with edge replication (zero-flux image border)."""
    xp = np.pad(x, 1, mode="edge")
    return 0.25 * (xp[:-2, 1:-1] + xp[2:, 1:-1] + xp[1:-1, :-2] + xp[1:-1, 2:])


def inpaint_diffusion(
    img: np.ndarray, mask: np.ndarray, tol: float = 1e-4, max_iters: int = 5000
) -> InpaintResult:
    """Harmonic fill of the masked region by Jacobi iteration.

    Unmasked pixels act as Dirichlet data and are returned untouched,
    bit-exactly. Iteration stops once the largest per-pixel update falls
    below ``tol``; hitting ``max_iters`` first is flagged via
    ``converged=False``.
    """
    img = np.asarray(img, dtype=np.float32)
    mask = np.asarray(mask, dtype=bool)
    if img.ndim != 2 or mask.shape != img.shape:
        raise ShapeError(f"image {img.shape} and mask {mask.shape} must both be (h, w)")
    if not mask.any():
        return InpaintResult(image=img.copy(), iterations=0, converged=True)
    if mask.all():
        return InpaintResult(
            image=np.full_like(img, 0.5), iterations=0, converged=True
        )

    x = img.astype(np.float64)
    # Seed the hole with the mean of the Dirichlet ring so every value the
    # iteration ever averages stays inside the boundary's [min, max].
    boundary = ~mask & (_shift_any(mask))
    seed_from = boundary if boundary.any() else ~mask
    x[mask] = x[seed_from].mean()

    iterations = 0
    converged = False
    for iterations in range(1, max_iters + 1):
        nb = _neighbor_mean(x)[mask]
        delta = np.max(np.abs(nb - x[mask]))
        x[mask] = nb
        if delta < tol:
            converged = True
            break

    out = img.copy()
    out[mask] = np.clip(x[mask], 0.0, 1.0).astype(np.float32)
    return InpaintResult(image=out, iterations=iterations, converged=converged)


def _shift_any(mask: np.ndarray) -> np.ndarray:
    """True where any 4-neighbour (edge-replicated) is True."""
    mp = np.pad(mask, 1, mode="edge")
    return mp[:-2, 1:-1] | mp[2:, 1:-1] | mp[1:-1, :-2] | mp[1:-1, 2:]


def laplacian_residual(img: np.ndarray, mask: np.ndarray) -> float:
    """Max |discrete Laplacian| over masked pixels, same stencil as the fill."""
    x = np.asarray(img, dtype=np.float64)
    residual = 4.0 * (_neighbor_mean(x) - x)
    return float(np.max(np.abs(residual[mask]))) if mask.any() else 0.0


def apply_mask(img: np.ndarray, mask: np.ndarray, fill) -> np.ndarray:
    """Replace masked pixels; everything else is returned bit-exactly.

    ``fill`` is either a constant in [0, 1] or the string "diffusion" for
    a harmonic fill.
    """
    img = np.asarray(img, dtype=np.float32)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != img.shape[:2]:
        raise ShapeError(f"mask shape {mask.shape} does not match image {img.shape}")
    if isinstance(fill, str):
        if fill != "diffusion":
            raise ConfigError(f"unknown fill mode {fill!r}")
        if img.ndim != 2:
            raise ShapeError("diffusion fill expects a grayscale image")
        return inpaint_diffusion(img, mask).image
    out = img.copy()
    out[mask] = np.float32(np.clip(float(fill), 0.0, 1.0))
    return out


def resize_bilinear(img: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    """Standard bilinear resampling with corner alignment off.

    The identity resize returns the input bit-exactly; constants stay
    constant at any size.
    """
    if new_h < 1 or new_w < 1:
        raise ShapeError(f"target size {new_h}x{new_w} must be at least 1x1")
    img = np.asarray(img, dtype=np.float32)
    h, w = img.shape[:2]

    def src_coords(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1)
        i0 = np.floor(pos).astype(np.int64)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, pos - i0

    y0, y1, fy = src_coords(new_h, h)
    x0, x1, fx = src_coords(new_w, w)
    fy = fy[:, None] if img.ndim == 2 else fy[:, None, None]
    fx = fx[None, :] if img.ndim == 2 else fx[None, :, None]

    v = img.astype(np.float64)
    top = v[np.ix_(y0, x0)] * (1 - fx) + v[np.ix_(y0, x1)] * fx
    bot = v[np.ix_(y1, x0)] * (1 - fx) + v[np.ix_(y1, x1)] * fx
    out = top * (1 - fy) + bot * fy
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def fit_long_side(h: int, w: int, long_side: int, multiple: int = 16):
    """Working dims: long side scaled to ``long_side``, aspect preserved,
    both dims snapped to the nearest multiple of ``multiple`` so the five
    pooling stages stay well defined."""
    scale = long_side / max(h, w)
    snap = lambda v: max(multiple, int(round(v / multiple)) * multiple)
    return snap(h * scale), snap(w * scale)


def to_net_input(img: np.ndarray) -> np.ndarray:
    """Lift a prep image to the network's (1, 3, h, w) layout; grayscale is
    replicated across the three channels."""
    img = np.asarray(img, dtype=np.float32)
    if img.ndim == 2:
        img = np.stack([img, img, img], axis=-1)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"expected (h, w) or (h, w, 3) image, got {img.shape}")
    return img.transpose(2, 0, 1)[None, ...].copy()


def from_net_input(tensor: np.ndarray) -> np.ndarray:
    """(1, 3, h, w) back to an (h, w, 3) image, clamped to [0, 1]."""
    if tensor.ndim != 4 or tensor.shape[0] != 1 or tensor.shape[1] != 3:
        raise ShapeError(f"expected (1, 3, h, w) tensor, got {tensor.shape}")
    return np.clip(tensor[0].transpose(1, 2, 0), 0.0, 1.0).astype(np.float32)
