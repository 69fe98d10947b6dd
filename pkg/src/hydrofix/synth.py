"""Synthetic terrain with rivers, road embankments and known culvert locations.

Desk-scale stand-in for a national elevation model plus its maintained list
of corrections. The generator is fully deterministic for a fixed seed: all
stochastic choices come from the portable generator in :mod:`hydrofix.rng`
and the cosine hills are summed in a fixed order.

A generated world contains:

* a gently rolling base surface (fixed-order sum of raised-cosine hills)
  plus per-cell hash noise,
* river valleys carved as depressed corridors along west-east polylines,
* road embankments added as raised corridors along north-south polylines
  (added after the valleys, so an embankment physically dams every valley
  it crosses -- no gap is cut),
* ground-truth horseshoe corrections at road/river crossings, each emitted
  with the configured probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .labels import Correction
from .raster import Grid
from .rng import Rng, hash_noise

Polyline = list[tuple[float, float]]


class SynthesisError(Exception):
    """Requested features do not fit in the region."""


@dataclass(frozen=True)
class SynthParams:
    size: int = 512                  # square region side, cells
    cell_size: float = 1.0           # meters
    n_rivers: int = 2
    n_roads: int = 2
    embankment_height: float = 3.0   # meters above local surface
    valley_depth: float = 4.0        # meters below local surface
    culvert_prob: float = 1.0        # truth emitted per crossing
    noise_amplitude: float = 0.15    # per-cell white noise, meters
    hill_count: int = 24             # cosine hills in the base surface
    seed: int = 0

    # corridor geometry, meters
    valley_half_width: float = 6.0
    road_half_width: float = 4.0
    culvert_width: float = 4.0

    def __post_init__(self):
        if self.size < 1 or self.n_rivers < 0 or self.n_roads < 0 or self.hill_count < 0:
            raise ValueError("counts must be non-negative and size >= 1")
        if self.cell_size <= 0 or self.embankment_height <= 0 or self.valley_depth <= 0:
            raise ValueError("sizes and heights must be positive")
        if not 0.0 <= self.culvert_prob <= 1.0:
            raise ValueError("culvert_prob must be in [0, 1]")


@dataclass
class SynthWorld:
    dem: Grid
    rivers: list[Polyline]
    roads: list[Polyline]
    truths: list[Correction] = field(default_factory=list)


def _cosine_hills(size: int, cell: float, count: int, rng: Rng) -> np.ndarray:
    """Sum of raised-cosine bumps, accumulated in draw order."""
    extent = size * cell
    xs = (np.arange(size) + 0.5) * cell
    ys = (np.arange(size) + 0.5) * cell
    gx, gy = np.meshgrid(xs, ys)
    surface = np.zeros((size, size), dtype=np.float64)
    for _ in range(count):
        cx = rng.uniform(0.0, extent)
        cy = rng.uniform(0.0, extent)
        radius = rng.uniform(0.15 * extent, 0.45 * extent)
        amp = rng.uniform(-1.5, 1.5)
        r = np.sqrt((gx - cx) ** 2 + (gy - cy) ** 2)
        inside = r < radius
        bump = np.zeros_like(surface)
        bump[inside] = amp * np.cos(np.pi * r[inside] / (2.0 * radius)) ** 2
        surface += bump
    return surface


def _meander(rng: Rng, extent: float, axis: str, slot: int, slots: int,
             waypoints: int = 5) -> Polyline:
    """Polyline crossing the region edge to edge with jittered waypoints.

    ``axis='x'`` runs west to east (a river), ``axis='y'`` south to north
    (a road). Each line gets its own slot of the cross axis so corridors
    stay separated; endpoints sit exactly on the region boundary so
    corridors never dead-end inside the region.
    """
    lane = 0.6 * extent / slots
    base = 0.2 * extent + (slot + 0.5) * lane + rng.uniform(-0.25, 0.25) * lane
    along = np.linspace(0.0, extent, waypoints)
    jitter_amp = min(0.06 * extent, 0.3 * lane)
    pts = []
    for i, a in enumerate(along):
        jitter = 0.0 if i in (0, waypoints - 1) else rng.uniform(-jitter_amp, jitter_amp)
        cross = min(max(base + jitter, 0.05 * extent), 0.95 * extent)
        pts.append((a, cross) if axis == "x" else (cross, a))
    return pts


def _segment_distance_field(gx, gy, p0, p1):
    """Distance from each cell center to the segment p0-p1."""
    px, py = p0
    qx, qy = p1
    dx, dy = qx - px, qy - py
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return np.sqrt((gx - px) ** 2 + (gy - py) ** 2)
    t = ((gx - px) * dx + (gy - py) * dy) / seg2
    t = np.clip(t, 0.0, 1.0)
    return np.sqrt((gx - px - t * dx) ** 2 + (gy - py - t * dy) ** 2)


def _corridor_profile(gx, gy, line: Polyline, half_width: float) -> np.ndarray:
    """Raised-cosine cross-section, 1 on the centerline, 0 beyond half_width."""
    dist = np.full(gx.shape, np.inf)
    for p0, p1 in zip(line[:-1], line[1:]):
        np.minimum(dist, _segment_distance_field(gx, gy, p0, p1), out=dist)
    prof = np.zeros(gx.shape, dtype=np.float64)
    inside = dist < half_width
    prof[inside] = np.cos(np.pi * dist[inside] / (2.0 * half_width)) ** 2
    return prof


def _segment_intersection(a0, a1, b0, b1):
    """Intersection point of two segments, or None."""
    ax, ay = a0
    bx, by = a1
    cx, cy = b0
    dx, dy = b1
    r = (bx - ax, by - ay)
    s = (dx - cx, dy - cy)
    denom = r[0] * s[1] - r[1] * s[0]
    if denom == 0.0:
        return None
    t = ((cx - ax) * s[1] - (cy - ay) * s[0]) / denom
    u = ((cx - ax) * r[1] - (cy - ay) * r[0]) / denom
    if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
        return (ax + t * r[0], ay + t * r[1])
    return None


def crossings(rivers: list[Polyline], roads: list[Polyline],
              min_separation: float = 10.0):
    """River/road intersection points with the local river direction.

    Ordered by (river index, road index, river segment, road segment) so the
    generator's truth list is reproducible. Intersections closer than
    ``min_separation`` to an earlier one are the same physical obstacle
    (e.g. a crossing that grazes a polyline vertex hits two segment pairs)
    and are merged into the first.
    """
    found = []
    for ri, river in enumerate(rivers):
        for qi, road in enumerate(roads):
            for si, (a0, a1) in enumerate(zip(river[:-1], river[1:])):
                for ti, (b0, b1) in enumerate(zip(road[:-1], road[1:])):
                    pt = _segment_intersection(a0, a1, b0, b1)
                    if pt is None:
                        continue
                    if any(np.hypot(pt[0] - q[0][0], pt[1] - q[0][1]) < min_separation
                           for q in found):
                        continue
                    d = np.array([a1[0] - a0[0], a1[1] - a0[1]])
                    d = d / np.linalg.norm(d)
                    found.append((pt, (float(d[0]), float(d[1])), ri, qi, si, ti))
    return found


def synth_terrain(params: SynthParams) -> SynthWorld:
    size, cell = params.size, params.cell_size
    extent = size * cell
    if (params.n_rivers or params.n_roads) and (
            size < 32 or extent < 6 * (params.valley_half_width + params.road_half_width)):
        raise SynthesisError(
            f"region of {size} cells ({extent:.0f} m) too small for the requested corridors")

    rng = Rng(params.seed)
    dem = _cosine_hills(size, cell, params.hill_count, rng)
    dem += 20.0  # keep heights comfortably positive

    noise = hash_noise(params.seed, size * size).reshape(size, size)
    dem += params.noise_amplitude * (2.0 * noise - 1.0)

    xs = (np.arange(size) + 0.5) * cell
    gx, gy = np.meshgrid(xs, xs)

    rivers = [_meander(rng, extent, "x", i, params.n_rivers)
              for i in range(params.n_rivers)]
    roads = [_meander(rng, extent, "y", i, params.n_roads)
             for i in range(params.n_roads)]

    for river in rivers:
        dem -= params.valley_depth * _corridor_profile(gx, gy, river, params.valley_half_width)
    for road in roads:
        dem += params.embankment_height * _corridor_profile(gx, gy, road, params.road_half_width)

    truths = []
    for pt, direction, *_ in crossings(rivers, roads,
                                       min_separation=2.5 * params.road_half_width):
        if rng.random() >= params.culvert_prob:
            continue
        half_span = params.road_half_width + 2.0 * cell
        p0 = (pt[0] - half_span * direction[0], pt[1] - half_span * direction[1])
        p1 = (pt[0] + half_span * direction[0], pt[1] + half_span * direction[1])
        truths.append(Correction(
            id=f"t{len(truths):04d}", kind="horseshoe",
            p0=p0, p1=p1, width=params.culvert_width))

    grid = Grid(size, size, cell, 0.0, 0.0, -9999.0, dem.astype(np.float32))
    return SynthWorld(dem=grid, rivers=rivers, roads=roads, truths=truths)
