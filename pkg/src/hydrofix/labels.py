"""Ground-truth correction geometry, label masks, loss weight maps, datasets.

A correction is either a line segment (widened to a thin rectangle when
rasterized) or a horseshoe: a rectangle given by its spine segment and width.
Label masks are binary rasters; every mask carries a per-cell id map so the
per-correction cell counts that normalize the weight map are available.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureStack, normalize_tile
from .raster import Grid, crop, downsample_2x
from .rng import Rng, derive_seed

DEFAULT_LINE_HALF_WIDTH = 0.8  # meters; one cell at the working resolution


@dataclass(frozen=True)
class Correction:
    id: str
    kind: str                      # "line" | "horseshoe"
    p0: tuple[float, float]        # line endpoints, or horseshoe spine a->b
    p1: tuple[float, float]
    width: float | None = None     # horseshoe rectangle width, meters

    def __post_init__(self):
        if self.kind not in ("line", "horseshoe"):
            raise ValueError(f"unknown correction kind {self.kind!r}")
        if self.p0 == self.p1:
            raise ValueError(f"correction {self.id}: degenerate geometry")
        if self.kind == "horseshoe" and not (self.width and self.width > 0):
            raise ValueError(f"correction {self.id}: horseshoe needs width > 0")

    def centroid(self) -> tuple[float, float]:
        return ((self.p0[0] + self.p1[0]) / 2.0, (self.p0[1] + self.p1[1]) / 2.0)

    def rect_half_extents(self, line_half_width: float) -> tuple[float, float]:
        """(half length along spine, half width across) of the rasterized rectangle."""
        length = float(np.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1]))
        if self.kind == "horseshoe":
            return length / 2.0, self.width / 2.0
        return length / 2.0 + line_half_width, line_half_width


@dataclass(frozen=True)
class LabelMask:
    grid: Grid                     # values in {0.0, 1.0}
    ids: np.ndarray = field(repr=False)  # int32, 0 = background, else 1-based index

    def cell_counts(self) -> dict[int, int]:
        present, counts = np.unique(self.ids[self.ids > 0], return_counts=True)
        return dict(zip(present.tolist(), counts.tolist()))


@dataclass(frozen=True)
class DatasetTile:
    features: np.ndarray           # (h, w, n_layers) float32, normalized
    layer_names: tuple[str, ...]
    label: LabelMask
    weight: Grid
    provenance: str                # correction-centered | bootstrapped | verdict-negative
    seed: int = 0


def rasterize_corrections(corrections, template: Grid,
                          line_half_width: float = DEFAULT_LINE_HALF_WIDTH) -> LabelMask:
    """Burn correction rectangles into a binary mask over ``template``.

    A cell is set iff its center lies inside the correction's rectangle;
    lines are first widened by ``line_half_width`` on each side. When
    rectangles overlap, the later correction claims the cell in the id map.
    """
    if line_half_width <= 0:
        raise ValueError("line_half_width must be > 0")
    h, w = template.height, template.width
    mask = np.zeros((h, w), dtype=np.float32)
    ids = np.zeros((h, w), dtype=np.int32)
    xs = template.center_xs()
    ys = template.center_ys()
    cs = template.cell_size

    for index, corr in enumerate(corrections, start=1):
        (ax, ay), (bx, by) = corr.p0, corr.p1
        half_len, half_wid = corr.rect_half_extents(line_half_width)
        cx, cy = (ax + bx) / 2.0, (ay + by) / 2.0
        ux, uy = bx - ax, by - ay
        norm = float(np.hypot(ux, uy))
        ux, uy = ux / norm, uy / norm
        reach = float(np.hypot(half_len, half_wid))
        c0 = max(0, int(np.floor((cx - reach - template.origin_x) / cs)))
        c1 = min(w, int(np.ceil((cx + reach - template.origin_x) / cs)) + 1)
        r0 = max(0, int(np.floor((cy - reach - template.origin_y) / cs)))
        r1 = min(h, int(np.ceil((cy + reach - template.origin_y) / cs)) + 1)
        if c0 >= c1 or r0 >= r1:
            continue
        gx, gy = np.meshgrid(xs[c0:c1], ys[r0:r1])
        along = (gx - cx) * ux + (gy - cy) * uy
        across = -(gx - cx) * uy + (gy - cy) * ux
        inside = (np.abs(along) <= half_len) & (np.abs(across) <= half_wid)
        mask[r0:r1, c0:c1][inside] = 1.0
        ids[r0:r1, c0:c1][inside] = index
    return LabelMask(grid=template.with_values(mask), ids=ids)


E_KERNEL = np.array([[-0.125, -0.125, -0.125],
                     [-0.125, 1.0, -0.125],
                     [-0.125, -0.125, -0.125]])
B_KERNEL = np.full((3, 3), 1.0 / 9.0)


def _conv3x3(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Dense 3x3 convolution with zero padding, float64."""
    h, w = img.shape
    padded = np.zeros((h + 2, w + 2), dtype=np.float64)
    padded[1:-1, 1:-1] = img
    out = np.zeros((h, w), dtype=np.float64)
    for dr in range(3):
        for dc in range(3):
            # true convolution: kernel index mirrored against the shift
            out += kernel[2 - dr, 2 - dc] * padded[dr:dr + h, dc:dc + w]
    return out


def weight_map(label: LabelMask) -> Grid:
    """Per-cell loss weights: base 1/sqrt(w*h) + edge + blur + size terms.

    The size term gives every cell of a correction 1/(cells in correction),
    so each correction contributes the same total regardless of size. The
    edge term convolves that with a zero-sum 3x3 kernel to emphasize
    boundaries and the blur term smears the edges with a 3x3 box mean.
    Both convolutions use zero padding.
    """
    g = label.grid
    h, w = g.height, g.width
    counts = label.cell_counts()
    size_term = np.zeros((h, w), dtype=np.float64)
    for cid, count in counts.items():
        size_term[label.ids == cid] = 1.0 / count
    edge = _conv3x3(size_term, E_KERNEL)
    blur = _conv3x3(edge, B_KERNEL)
    weights = 1.0 / np.sqrt(w * h) + edge + blur + size_term
    return g.with_values(weights.astype(np.float32))


class DatasetError(Exception):
    pass


def build_dataset(region: FeatureStack, truths, tile_cells: int,
                  extra_centers=(), seed: int = 0,
                  line_half_width: float = DEFAULT_LINE_HALF_WIDTH,
                  label_truths=None) -> list[DatasetTile]:
    """One training tile per truth plus one per extra center.

    Tiles are ``tile_cells`` square windows of the full-resolution region,
    centered on the truth centroid (or the extra center) and shifted inward
    at region boundaries. Features are downsampled 2x; the label mask is
    rasterized at the downsampled resolution and contains every truth that
    intersects the tile, not just the central one. Extra centers get
    provenance "bootstrapped" unless given as (point, provenance) pairs.
    ``label_truths`` widens the set burnt into label masks beyond the tiles'
    own centers (defaults to ``truths``).
    """
    dem = region.dem
    if label_truths is None:
        label_truths = truths
    if tile_cells % 2:
        raise DatasetError("tile_cells must be even")
    if tile_cells > dem.width or tile_cells > dem.height:
        raise DatasetError(f"tile of {tile_cells} cells exceeds region "
                           f"{dem.height}x{dem.width}")
    bounds = dem.bounds()

    jobs = []
    for t in truths:
        jobs.append((t.centroid(), "correction-centered"))
    for entry in extra_centers:
        if isinstance(entry[0], (tuple, list)):
            jobs.append(((float(entry[0][0]), float(entry[0][1])), str(entry[1])))
        else:
            jobs.append(((float(entry[0]), float(entry[1])), "bootstrapped"))

    tiles = []
    for index, ((cx, cy), provenance) in enumerate(jobs):
        if not (bounds.min_x <= cx <= bounds.max_x and bounds.min_y <= cy <= bounds.max_y):
            raise DatasetError(f"tile center ({cx:.1f}, {cy:.1f}) outside region")
        row_c, col_c = dem.world_to_cell(cx, cy)
        r0 = min(max(row_c - tile_cells // 2, 0), dem.height - tile_cells)
        c0 = min(max(col_c - tile_cells // 2, 0), dem.width - tile_cells)

        layers = [downsample_2x(crop(g, r0, c0, tile_cells, tile_cells))
                  for g in region.layers]
        template = layers[0]
        label = rasterize_corrections(label_truths, template, line_half_width)
        weights = weight_map(label)
        feats = normalize_tile(np.stack([g.values for g in layers], axis=-1),
                               region.names)
        tiles.append(DatasetTile(
            features=feats, layer_names=region.names, label=label,
            weight=weights, provenance=provenance,
            seed=derive_seed(seed, "tile", index)))
    return tiles


def augment(tile: DatasetTile, crop_cells: int, rng: Rng) -> DatasetTile:
    """Random crop plus independent 50/50 horizontal and vertical flips.

    The identical transform is applied to features, label mask, id map and
    weight map. The weight map is transformed, not recomputed, so its base
    term still reflects the original tile size.
    """
    h, w = tile.features.shape[:2]
    if crop_cells > h or crop_cells > w:
        raise DatasetError(f"crop of {crop_cells} exceeds tile {h}x{w}")
    r0 = rng.randrange(h - crop_cells + 1)
    c0 = rng.randrange(w - crop_cells + 1)
    flip_h = rng.random() < 0.5
    flip_v = rng.random() < 0.5

    def tf(a: np.ndarray) -> np.ndarray:
        out = a[r0:r0 + crop_cells, c0:c0 + crop_cells]
        if flip_h:
            out = out[:, ::-1]
        if flip_v:
            out = out[::-1]
        return np.ascontiguousarray(out)

    g = tile.label.grid
    cs = g.cell_size
    sub = Grid(crop_cells, crop_cells, cs,
               g.origin_x + c0 * cs, g.origin_y + r0 * cs, g.nodata,
               tf(g.values))
    return DatasetTile(
        features=tf(tile.features), layer_names=tile.layer_names,
        label=LabelMask(grid=sub, ids=tf(tile.label.ids)),
        weight=sub.with_values(tf(tile.weight.values)),
        provenance=tile.provenance, seed=tile.seed)


# -- corrections JSON lines -----------------------------------------------------

def correction_to_json(corr: Correction) -> dict:
    obj = {"id": corr.id, "kind": corr.kind,
           "p0": [corr.p0[0], corr.p0[1]], "p1": [corr.p1[0], corr.p1[1]]}
    if corr.kind == "horseshoe":
        obj["width"] = corr.width
    return obj


def correction_from_json(obj: dict) -> Correction:
    width = obj.get("width")
    if (obj["kind"] == "horseshoe") != (width is not None):
        raise ValueError(f"correction {obj.get('id')}: width required iff horseshoe")
    return Correction(id=obj["id"], kind=obj["kind"],
                      p0=(float(obj["p0"][0]), float(obj["p0"][1])),
                      p1=(float(obj["p1"][0]), float(obj["p1"][1])),
                      width=None if width is None else float(width))


def write_corrections(corrections, path) -> None:
    with open(path, "w") as fh:
        for corr in corrections:
            fh.write(json.dumps(correction_to_json(corr)) + "\n")


def read_corrections(path) -> list[Correction]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(correction_from_json(json.loads(line)))
    return out
