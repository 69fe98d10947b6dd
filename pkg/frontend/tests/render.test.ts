import { describe, expect, it } from "vitest";

import { cellToPixel, composeView, heatColor, hillshade } from "../src/render.js";

function grid(h: number, w: number, fill: (r: number, c: number) => number): number[][] {
  return Array.from({ length: h }, (_, r) =>
    Array.from({ length: w }, (_, c) => fill(r, c)));
}

describe("hillshade", () => {
  it("is uniform on a flat crop", () => {
    const shade = hillshade(grid(8, 8, () => 5.0), 1.0);
    const first = shade[0][0];
    for (const row of shade) {
      for (const v of row) expect(v).toBeCloseTo(first, 12);
    }
    expect(first).toBeCloseTo(Math.cos((45 * Math.PI) / 180), 6);
  });

  it("lights northwest-facing slopes more than southeast-facing", () => {
    // ridge rising to the northeast: light from 315 deg (northwest)
    const east = hillshade(grid(16, 16, (_, c) => c * 0.5), 1.0);
    const west = hillshade(grid(16, 16, (_, c) => (15 - c) * 0.5), 1.0);
    // west-facing slope (heights rising east) is lit differently from its mirror
    expect(east[8][8]).not.toBeCloseTo(west[8][8], 3);
  });
});

describe("composeView", () => {
  it("zero probability stays invisible at any opacity", () => {
    const dem = grid(4, 4, (r, c) => r + c);
    const zero = grid(4, 4, () => 0);
    for (const opacity of [0, 0.5, 1]) {
      const withOverlay = composeView(dem, zero, {
        hillshadeOn: true, overlayOpacity: opacity, cellSize: 1,
      });
      const without = composeView(dem, zero, {
        hillshadeOn: true, overlayOpacity: 0, cellSize: 1,
      });
      expect(withOverlay.rgba).toEqual(without.rgba);
    }
  });

  it("overlay alpha scales with probability and opacity", () => {
    const dem = grid(2, 2, () => 1);
    const hot = grid(2, 2, () => 1);
    const off = composeView(dem, hot, { hillshadeOn: false, overlayOpacity: 0, cellSize: 1 });
    const on = composeView(dem, hot, { hillshadeOn: false, overlayOpacity: 1, cellSize: 1 });
    expect(off.rgba[0]).toBe(128); // flat gray base
    expect(on.rgba[0]).toBe(255);  // fully hot pixel
    expect(on.rgba[2]).toBe(0);
  });

  it("flips rows so south ends up at the bottom", () => {
    // probability set only in the southern row (array row 0)
    const dem = grid(3, 3, () => 0);
    const prob = grid(3, 3, (r) => (r === 0 ? 1 : 0));
    const img = composeView(dem, prob, { hillshadeOn: false, overlayOpacity: 1, cellSize: 1 });
    const topPixel = img.rgba[(0 * 3 + 1) * 4];     // pixel row 0 = north
    const bottomPixel = img.rgba[(2 * 3 + 1) * 4];  // pixel row 2 = south
    expect(bottomPixel).toBe(255);
    expect(topPixel).toBe(128);
  });
});

describe("helpers", () => {
  it("heat ramp is blue at 0 and red at 1", () => {
    expect(heatColor(0)[2]).toBeGreaterThan(100);
    expect(heatColor(1)).toEqual([255, 0, 0]);
  });

  it("cellToPixel centers cells and flips y", () => {
    expect(cellToPixel(0, 0, 10, 4)).toEqual([2, 38]);
    expect(cellToPixel(0, 9, 10, 4)).toEqual([2, 2]);
  });
});
