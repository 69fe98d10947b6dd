"""Feature layers stacked with the elevation model as network input channels.

Layer 0 is always elevation. Optional layers: single-direction flow
accumulation, standing-water depth after depression filling, and rasterized
road/river vectors. All are aligned to the elevation grid.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

import numpy as np

from .raster import Grid

# Fixed neighbor order used for routing ties: E, N, W, S, NE, NW, SW, SE.
NEIGHBORS = [(0, 1), (1, 0), (0, -1), (-1, 0), (1, 1), (1, -1), (-1, -1), (-1, 1)]


@dataclass(frozen=True)
class FeatureStack:
    layers: tuple[Grid, ...]
    names: tuple[str, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a feature stack needs at least one layer")
        if len(self.layers) != len(self.names):
            raise ValueError("one name per layer")
        if self.names[0] != "elevation":
            raise ValueError("layer 0 must be elevation")
        ref = self.layers[0]
        for g in self.layers[1:]:
            if (g.width, g.height, g.cell_size, g.origin_x, g.origin_y) != \
               (ref.width, ref.height, ref.cell_size, ref.origin_x, ref.origin_y):
                raise ValueError("all layers must share dims and georeference")

    @property
    def dem(self) -> Grid:
        return self.layers[0]

    def as_array(self) -> np.ndarray:
        """(height, width, n_layers) float32 view of the stack."""
        return np.stack([g.values for g in self.layers], axis=-1)


def flow_accumulation(dem: Grid) -> Grid:
    """Units of water passing through each cell, single-direction routing.

    Every cell starts with one unit. Cells are visited in strictly decreasing
    height order (ties by row-major index) and hand their accumulated load to
    their lowest strictly-lower 8-neighbor; equal-height neighbors never
    receive flow. Nodata cells carry 0 and route nothing.
    """
    h, w = dem.height, dem.width
    z = dem.values.astype(np.float64)
    nodata = dem.values == np.float32(dem.nodata)
    z_search = z.copy()
    z_search[nodata] = np.inf  # never a receiving neighbor

    # Lowest neighbor per cell; first index in NEIGHBORS order wins ties.
    padded = np.full((h + 2, w + 2), np.inf)
    padded[1:-1, 1:-1] = z_search
    stacked = np.stack([padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
                        for dr, dc in NEIGHBORS])
    best = np.argmin(stacked, axis=0)
    best_z = np.take_along_axis(stacked, best[None], axis=0)[0]
    has_lower = best_z < z
    has_lower[nodata] = False

    order = np.lexsort((np.arange(h * w), -z.ravel()))
    acc = np.ones(h * w, dtype=np.float64)
    acc[nodata.ravel()] = 0.0
    flat_best = best.ravel()
    flat_lower = has_lower.ravel()
    offsets = np.array([dr * w + dc for dr, dc in NEIGHBORS])
    targets = np.arange(h * w) + offsets[flat_best]
    nodata_flat = nodata.ravel()
    for i in order:
        if flat_lower[i] and not nodata_flat[i]:
            acc[targets[i]] += acc[i]
    return dem.with_values(acc.reshape(h, w).astype(np.float32))


def fill_depressions(dem: Grid) -> Grid:
    """Priority-flood fill: raise every cell to its spill level.

    The spill level of a cell is the minimum over boundary-reaching paths of
    the path's maximum height, so ``filled - dem`` is the standing water
    depth. Nodata cells act as outlets and stay nodata.
    """
    h, w = dem.height, dem.width
    z = dem.values.astype(np.float64)
    nodata = dem.values == np.float32(dem.nodata)
    filled = z.copy()
    visited = nodata.copy()

    heap: list[tuple[float, int]] = []
    edge = np.zeros((h, w), dtype=bool)
    edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
    if nodata.any():
        pad = np.zeros((h + 2, w + 2), dtype=bool)
        pad[1:-1, 1:-1] = nodata
        for dr, dc in NEIGHBORS:
            edge |= pad[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
    for idx in np.flatnonzero(edge & ~nodata):
        heapq.heappush(heap, (z.flat[idx], int(idx)))
        visited.flat[idx] = True

    while heap:
        level, idx = heapq.heappop(heap)
        r, c = divmod(idx, w)
        for dr, dc in NEIGHBORS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and not visited[nr, nc]:
                visited[nr, nc] = True
                lvl = max(z[nr, nc], level)
                filled[nr, nc] = lvl
                heapq.heappush(heap, (lvl, nr * w + nc))

    out = filled.astype(np.float32)
    out[nodata] = np.float32(dem.nodata)
    return dem.with_values(out)


def fill_depth(dem: Grid) -> Grid:
    """Standing-water depth layer: fill_depressions(dem) - dem, nodata -> 0."""
    filled = fill_depressions(dem)
    depth = filled.values.astype(np.float64) - dem.values.astype(np.float64)
    depth[dem.values == np.float32(dem.nodata)] = 0.0
    return dem.with_values(depth.astype(np.float32))


def rasterize_polylines(lines, template: Grid, half_width: float) -> Grid:
    """Binary grid: 1.0 where a cell center is within half_width of a segment."""
    if half_width < 0:
        raise ValueError("half_width must be >= 0")
    out = np.zeros((template.height, template.width), dtype=np.float32)
    xs = template.center_xs()
    ys = template.center_ys()
    cs = template.cell_size
    for line in lines:
        for (px, py), (qx, qy) in zip(line[:-1], line[1:]):
            lo_x = min(px, qx) - half_width
            hi_x = max(px, qx) + half_width
            lo_y = min(py, qy) - half_width
            hi_y = max(py, qy) + half_width
            c0 = max(0, int(np.floor((lo_x - template.origin_x) / cs)))
            c1 = min(template.width, int(np.ceil((hi_x - template.origin_x) / cs)) + 1)
            r0 = max(0, int(np.floor((lo_y - template.origin_y) / cs)))
            r1 = min(template.height, int(np.ceil((hi_y - template.origin_y) / cs)) + 1)
            if c0 >= c1 or r0 >= r1:
                continue
            gx, gy = np.meshgrid(xs[c0:c1], ys[r0:r1])
            dx, dy = qx - px, qy - py
            seg2 = dx * dx + dy * dy
            if seg2 == 0.0:
                dist = np.sqrt((gx - px) ** 2 + (gy - py) ** 2)
            else:
                t = np.clip(((gx - px) * dx + (gy - py) * dy) / seg2, 0.0, 1.0)
                dist = np.sqrt((gx - px - t * dx) ** 2 + (gy - py - t * dy) ** 2)
            out[r0:r1, c0:c1][dist <= half_width] = 1.0
    return template.with_values(out)


# -- polyline JSON -------------------------------------------------------------

def write_polylines(lines, path) -> None:
    payload = {"lines": [{"points": [[float(x), float(y)] for x, y in line]}
                         for line in lines]}
    with open(path, "w") as fh:
        json.dump(payload, fh)


def read_polylines(path):
    with open(path) as fh:
        payload = json.load(fh)
    return [[(float(x), float(y)) for x, y in entry["points"]]
            for entry in payload["lines"]]


# -- network input normalization -----------------------------------------------

FLOW_SCALE = 0.1


def normalize_tile(tile: np.ndarray, names: tuple[str, ...]) -> np.ndarray:
    """Per-tile input conditioning, shared by training and mosaic inference.

    Elevation is centered on the tile mean (the network should see relief,
    not absolute height); flow accumulation is log-compressed; the remaining
    layers are already small or binary.
    """
    out = tile.astype(np.float32).copy()
    for i, name in enumerate(names):
        if name == "elevation":
            out[..., i] -= out[..., i].mean()
        elif name == "flow":
            out[..., i] = FLOW_SCALE * np.log1p(np.maximum(out[..., i], 0.0))
    return out
