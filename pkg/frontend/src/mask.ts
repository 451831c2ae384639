/**
 * Mask document: an ordered stroke list over the radiograph, plus the
 * boolean raster it deterministically renders to.
 *
 * A stroke is a hard-edged circle (no anti-aliasing — the mask is a
 * boolean removal decision per pixel). Replaying the stroke list always
 * reproduces the raster and therefore the exported PNG bytes.
 */

import { encodeGrayPng } from "./png.js";

export type BrushMode = "add" | "erase";

export interface Stroke {
  x: number;
  y: number;
  radius: number;
  mode: BrushMode;
  time: number;
}

export interface MaskDocument {
  baseAssetId: string | null;
  width: number;
  height: number;
  strokes: Stroke[];
}

export function newDocument(width: number, height: number): MaskDocument {
  return { baseAssetId: null, width, height, strokes: [] };
}

export function addStroke(
  doc: MaskDocument,
  x: number,
  y: number,
  radius: number,
  mode: BrushMode,
  time = 0,
): void {
  doc.strokes.push({ x, y, radius, mode, time });
}

/** Rasterize the stroke list into a boolean removal mask. */
export function renderRaster(doc: MaskDocument): Uint8Array {
  const { width, height } = doc;
  const raster = new Uint8Array(width * height); // 0 = keep, 1 = remove
  for (const stroke of doc.strokes) {
    const value = stroke.mode === "add" ? 1 : 0;
    const r2 = stroke.radius * stroke.radius;
    const x0 = Math.max(0, Math.floor(stroke.x - stroke.radius - 1));
    const x1 = Math.min(width - 1, Math.ceil(stroke.x + stroke.radius + 1));
    const y0 = Math.max(0, Math.floor(stroke.y - stroke.radius - 1));
    const y1 = Math.min(height - 1, Math.ceil(stroke.y + stroke.radius + 1));
    for (let y = y0; y <= y1; y++) {
      const dy = y + 0.5 - stroke.y;
      for (let x = x0; x <= x1; x++) {
        const dx = x + 0.5 - stroke.x;
        if (dx * dx + dy * dy <= r2) {
          raster[y * width + x] = value;
        }
      }
    }
  }
  return raster;
}

/**
 * Render the mask as PNG bytes in the engine's mask convention:
 * 8-bit grayscale, value >= 128 means "remove". Removal pixels are
 * written as 255, kept pixels as 0.
 */
export function renderMaskPng(doc: MaskDocument): Uint8Array {
  const raster = renderRaster(doc);
  const pixels = new Uint8Array(raster.length);
  for (let i = 0; i < raster.length; i++) {
    pixels[i] = raster[i] ? 255 : 0;
  }
  return encodeGrayPng(pixels, doc.width, doc.height);
}

/** Drop the last ``count`` strokes (the undo model is list truncation). */
export function truncateStrokes(doc: MaskDocument, count = 1): void {
  doc.strokes.length = Math.max(0, doc.strokes.length - count);
}
