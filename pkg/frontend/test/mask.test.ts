import assert from "node:assert/strict";
import { test } from "node:test";

import {
  addStroke,
  newDocument,
  renderMaskPng,
  renderRaster,
  truncateStrokes,
} from "../src/mask.js";

test("no strokes renders an all-zero mask", () => {
  const doc = newDocument(16, 16);
  const raster = renderRaster(doc);
  assert.ok(raster.every((v) => v === 0));
});

test("one full-canvas stroke renders all-remove", () => {
  const doc = newDocument(20, 20);
  addStroke(doc, 10, 10, 100, "add");
  const raster = renderRaster(doc);
  assert.ok(raster.every((v) => v === 1));
  // PNG convention: remove pixels are 255 (>= 128 threshold).
  const png = renderMaskPng(doc);
  assert.ok(png.length > 0);
});

test("replaying the stroke list yields identical PNG bytes", () => {
  const build = () => {
    const doc = newDocument(48, 32);
    addStroke(doc, 10.3, 12.7, 5, "add", 100);
    addStroke(doc, 30.1, 8.4, 7.5, "add", 200);
    addStroke(doc, 12.0, 12.0, 3, "erase", 300);
    addStroke(doc, 40.9, 25.2, 6.1, "add", 400);
    return renderMaskPng(doc);
  };
  assert.deepEqual(build(), build());
});

test("erase reverts painted pixels", () => {
  const doc = newDocument(32, 32);
  addStroke(doc, 16, 16, 8, "add");
  const before = renderRaster(doc).reduce((a, b) => a + b, 0);
  addStroke(doc, 16, 16, 8, "erase");
  const after = renderRaster(doc).reduce((a, b) => a + b, 0);
  assert.ok(before > 0);
  assert.equal(after, 0);
});

test("brush is a hard-edged circle", () => {
  const doc = newDocument(21, 21);
  addStroke(doc, 10.5, 10.5, 5, "add");
  const raster = renderRaster(doc);
  for (let y = 0; y < 21; y++) {
    for (let x = 0; x < 21; x++) {
      const dx = x + 0.5 - 10.5;
      const dy = y + 0.5 - 10.5;
      const inside = dx * dx + dy * dy <= 25;
      assert.equal(!!raster[y * 21 + x], inside, `pixel (${x}, ${y})`);
    }
  }
});

test("undo is stroke-list truncation", () => {
  const doc = newDocument(16, 16);
  addStroke(doc, 4, 4, 2, "add");
  const snapshot = renderMaskPng(doc);
  addStroke(doc, 12, 12, 2, "add");
  truncateStrokes(doc);
  assert.deepEqual(renderMaskPng(doc), snapshot);
});

test("strokes clip at the canvas border", () => {
  const doc = newDocument(8, 8);
  addStroke(doc, 0, 0, 3, "add");
  const raster = renderRaster(doc);
  assert.ok(raster[0] === 1);
  assert.ok(raster.length === 64);
});
