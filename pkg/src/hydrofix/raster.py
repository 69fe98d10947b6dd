"""Georeferenced single-band rasters and the HCR1 binary container.

A Grid stores 32-bit values row-major with row 0 at the southern edge, so the
world y coordinate grows with the row index. The world position of a cell
center is ``origin + (col + 0.5, row + 0.5) * cell_size``.

HCR1 layout (little-endian):

    magic    4 bytes  b"HCR1"
    version  u32      1
    width    u32
    height   u32
    cell_size f64
    origin_x f64
    origin_y f64
    nodata   f32
    reserved u32      0
    values   f32 * width*height, row-major, row 0 = southernmost
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"HCR1"
_HEADER = struct.Struct("<4sIIIdddfI")
MAX_DIM = 1 << 26  # 67M cells per side is far beyond anything we handle


class RasterError(Exception):
    """Base for raster file problems."""


class MalformedHeaderError(RasterError):
    pass


class TruncatedPayloadError(RasterError):
    pass


class DimensionOverflowError(RasterError):
    pass


@dataclass(frozen=True)
class WorldRect:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if not (self.min_x < self.max_x and self.min_y < self.max_y):
            raise ValueError("WorldRect needs min < max on both axes")


@dataclass(frozen=True)
class Grid:
    """Single-band float32 raster with an affine (scale+offset) georeference."""

    width: int
    height: int
    cell_size: float
    origin_x: float
    origin_y: float
    nodata: float
    values: np.ndarray = field(repr=False)  # shape (height, width), float32

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be >= 1")
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")
        v = np.asarray(self.values, dtype=np.float32)
        if v.shape != (self.height, self.width):
            v = v.reshape(self.height, self.width)
        object.__setattr__(self, "values", v)

    # -- coordinate mapping ------------------------------------------------

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (
            self.origin_x + (col + 0.5) * self.cell_size,
            self.origin_y + (row + 0.5) * self.cell_size,
        )

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        """(row, col) of the cell containing the world point."""
        col = int(np.floor((x - self.origin_x) / self.cell_size))
        row = int(np.floor((y - self.origin_y) / self.cell_size))
        return row, col

    def bounds(self) -> WorldRect:
        return WorldRect(
            self.origin_x,
            self.origin_y,
            self.origin_x + self.width * self.cell_size,
            self.origin_y + self.height * self.cell_size,
        )

    def center_xs(self) -> np.ndarray:
        return self.origin_x + (np.arange(self.width) + 0.5) * self.cell_size

    def center_ys(self) -> np.ndarray:
        return self.origin_y + (np.arange(self.height) + 0.5) * self.cell_size

    def with_values(self, values: np.ndarray) -> "Grid":
        """Same georeference, new payload."""
        return Grid(self.width, self.height, self.cell_size,
                    self.origin_x, self.origin_y, self.nodata, values)


def make_grid(values: np.ndarray, cell_size: float = 1.0,
              origin: tuple[float, float] = (0.0, 0.0),
              nodata: float = -9999.0) -> Grid:
    v = np.asarray(values, dtype=np.float32)
    return Grid(v.shape[1], v.shape[0], cell_size, origin[0], origin[1], nodata, v)


# -- file I/O ----------------------------------------------------------------

def write_grid(grid: Grid, path) -> None:
    header = _HEADER.pack(MAGIC, 1, grid.width, grid.height, grid.cell_size,
                          grid.origin_x, grid.origin_y, grid.nodata, 0)
    payload = np.ascontiguousarray(grid.values, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_grid(path) -> Grid:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise MalformedHeaderError(f"{path}: file shorter than header")
    magic, version, width, height, cell_size, ox, oy, nodata, reserved = \
        _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MalformedHeaderError(f"{path}: bad magic {magic!r}")
    if version != 1:
        raise MalformedHeaderError(f"{path}: unsupported version {version}")
    if width < 1 or height < 1 or not cell_size > 0:
        raise MalformedHeaderError(f"{path}: invalid dimensions {width}x{height}")
    if width > MAX_DIM or height > MAX_DIM:
        raise DimensionOverflowError(f"{path}: dimensions {width}x{height} too large")
    expected = width * height * 4
    body = raw[_HEADER.size:]
    if len(body) < expected:
        raise TruncatedPayloadError(
            f"{path}: expected {expected} payload bytes, found {len(body)}")
    values = np.frombuffer(body[:expected], dtype="<f4").reshape(height, width)
    return Grid(width, height, cell_size, ox, oy, nodata, values.copy())


# -- geometry operations -----------------------------------------------------

def crop(grid: Grid, row0: int, col0: int, rows: int, cols: int) -> Grid:
    if rows < 1 or cols < 1:
        raise ValueError("crop window must be at least 1x1")
    if row0 < 0 or col0 < 0 or row0 + rows > grid.height or col0 + cols > grid.width:
        raise IndexError(
            f"crop window ({row0},{col0})+({rows}x{cols}) outside "
            f"{grid.height}x{grid.width} grid")
    values = grid.values[row0:row0 + rows, col0:col0 + cols].copy()
    return Grid(cols, rows, grid.cell_size,
                grid.origin_x + col0 * grid.cell_size,
                grid.origin_y + row0 * grid.cell_size,
                grid.nodata, values)


def flip(grid: Grid, horizontal: bool = False, vertical: bool = False) -> Grid:
    values = grid.values
    if horizontal:
        values = values[:, ::-1]
    if vertical:
        values = values[::-1, :]
    return grid.with_values(values.copy())


def downsample_2x(grid: Grid) -> Grid:
    """Halve both dimensions by averaging 2x2 blocks.

    Any nodata cell inside a block makes the whole block nodata. The origin
    is unchanged and cell_size doubles, so world extent is preserved.
    """
    if grid.width % 2 or grid.height % 2:
        raise ValueError(f"downsample_2x needs even dims, got {grid.height}x{grid.width}")
    v = grid.values.astype(np.float64)
    blocks = v.reshape(grid.height // 2, 2, grid.width // 2, 2)
    mean = blocks.mean(axis=(1, 3))
    bad = (grid.values == np.float32(grid.nodata)).reshape(
        grid.height // 2, 2, grid.width // 2, 2).any(axis=(1, 3))
    out = mean.astype(np.float32)
    out[bad] = np.float32(grid.nodata)
    return Grid(grid.width // 2, grid.height // 2, grid.cell_size * 2,
                grid.origin_x, grid.origin_y, grid.nodata, out)
