/**
 * Raster compositing for the candidate viewer, DOM-free so it is testable:
 * hillshade from the elevation crop (Horn gradients, fixed light), a heat
 * overlay for the probability map, and the cell-to-pixel transform shared
 * with the vector drawing code in main.ts.
 *
 * Crop arrays arrive with row 0 at the SOUTH edge; pixel row 0 is the top
 * of the canvas, so every lookup flips the row index.
 */

const AZIMUTH_DEG = 315;
const ALTITUDE_DEG = 45;

export function hillshade(dem: number[][], cellSize: number): number[][] {
  const h = dem.length;
  const w = dem[0].length;
  const az = ((360 - AZIMUTH_DEG + 90) % 360) * (Math.PI / 180);
  const zenith = (90 - ALTITUDE_DEG) * (Math.PI / 180);
  const shade: number[][] = [];
  for (let r = 0; r < h; r++) {
    shade.push(new Array<number>(w).fill(Math.cos(zenith)));
  }
  const at = (r: number, c: number) =>
    dem[Math.min(h - 1, Math.max(0, r))][Math.min(w - 1, Math.max(0, c))];
  for (let r = 0; r < h; r++) {
    for (let c = 0; c < w; c++) {
      // Horn kernel on the 8 neighbors (clamped at the border)
      const a = at(r + 1, c - 1), b = at(r + 1, c), cc = at(r + 1, c + 1);
      const d = at(r, c - 1), f = at(r, c + 1);
      const g = at(r - 1, c - 1), hh = at(r - 1, c), i = at(r - 1, c + 1);
      const dzdx = ((cc + 2 * f + i) - (a + 2 * d + g)) / (8 * cellSize);
      const dzdy = ((a + 2 * b + cc) - (g + 2 * hh + i)) / (8 * cellSize);
      const slope = Math.atan(Math.sqrt(dzdx * dzdx + dzdy * dzdy));
      const aspect = Math.atan2(dzdy, -dzdx);
      const s = Math.cos(zenith) * Math.cos(slope) +
        Math.sin(zenith) * Math.sin(slope) * Math.cos(az - aspect);
      shade[r][c] = Math.max(0, s);
    }
  }
  return shade;
}

export function heatColor(p: number): [number, number, number] {
  // blue -> yellow -> red
  const t = Math.min(1, Math.max(0, p));
  if (t < 0.5) {
    const u = t / 0.5;
    return [Math.round(40 + 215 * u), Math.round(60 + 195 * u), Math.round(180 * (1 - u))];
  }
  const u = (t - 0.5) / 0.5;
  return [255, Math.round(255 * (1 - u)), 0];
}

export interface ComposeOptions {
  hillshadeOn: boolean;
  overlayOpacity: number; // 0..1
  cellSize: number;
}

export interface ComposedImage {
  width: number;
  height: number;
  rgba: Uint8ClampedArray;
}

/** Blend hillshade (or flat gray) with the probability heat layer. */
export function composeView(dem: number[][], prob: number[][],
                            opts: ComposeOptions): ComposedImage {
  const h = dem.length;
  const w = dem[0].length;
  const shade = opts.hillshadeOn ? hillshade(dem, opts.cellSize) : null;
  const rgba = new Uint8ClampedArray(w * h * 4);
  for (let py = 0; py < h; py++) {
    const r = h - 1 - py; // flip: south-origin rows to top-origin pixels
    for (let c = 0; c < w; c++) {
      const base = shade ? Math.round(40 + 215 * Math.min(1, shade[r][c])) : 128;
      const p = prob[r][c];
      const alpha = opts.overlayOpacity * p;
      const [hr, hg, hb] = heatColor(p);
      const k = (py * w + c) * 4;
      rgba[k] = Math.round(base * (1 - alpha) + hr * alpha);
      rgba[k + 1] = Math.round(base * (1 - alpha) + hg * alpha);
      rgba[k + 2] = Math.round(base * (1 - alpha) + hb * alpha);
      rgba[k + 3] = 255;
    }
  }
  return { width: w, height: h, rgba };
}

/** Cell-center coordinates (south-origin) to canvas pixels at a zoom. */
export function cellToPixel(x: number, y: number, rows: number,
                            zoom: number): [number, number] {
  return [(x + 0.5) * zoom, (rows - 0.5 - y) * zoom];
}
