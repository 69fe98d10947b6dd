"""From probability map to vetted candidate corrections.

Stages: marching-squares contours at a fixed threshold, per-polygon
statistics (area, elevation variance, median probability), heuristic
filtering, and a two-component Gaussian-mixture fit that turns each
surviving polygon into a horseshoe (spine between the two depressions the
correction connects, width from the contour's perpendicular extent).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .labels import Correction
from .raster import Grid, crop as crop_grid
from .rng import Rng


class DegenerateCandidateError(Exception):
    """Polygon encloses no cell centers."""


class DegenerateFitError(Exception):
    """Mixture fit impossible: too few distinct points."""


class FitFailedError(Exception):
    """Horseshoe fit collapsed; candidate keeps no horseshoe."""


@dataclass(frozen=True)
class FilterConfig:
    min_area_m2: float = 2.0
    max_area_m2: float = 1.0e4
    min_elev_var_m2: float = 0.01
    median_threshold: float = 0.0
    contour_threshold: float = 0.5      # T
    contour_threshold_lo: float = 0.3   # expanded contours for context crops
    margin_cells: int = 16
    gmm_samples: int = 2000

    def __post_init__(self):
        if not (0.0 < self.contour_threshold_lo < self.contour_threshold < 1.0):
            raise ValueError("need 0 < contour_threshold_lo < contour_threshold < 1")
        if not self.min_area_m2 < self.max_area_m2:
            raise ValueError("min area must be below max area")


@dataclass(frozen=True)
class Candidate:
    id: str
    polygon: list[tuple[float, float]]   # closed ring, last vertex joins first
    area_m2: float
    elev_var: float
    median_p: float
    horseshoe: Correction | None = None
    status: str = "proposed"             # proposed | filtered | accepted | rejected
    reason: str | None = None

    def centroid(self) -> tuple[float, float]:
        return polygon_centroid(self.polygon)


# -- contour extraction --------------------------------------------------------

# Directed marching-squares segments per corner configuration, traversing with
# the above-threshold region on the left. Corners: 1=BL 2=BR 4=TR 8=TL; edges
# of the square with lower-left node (r, c): B/R/T/L. Saddle cases (5, 10) are
# listed as (center_above, center_below) pairs.
_CASES = {
    1: [("B", "L")], 2: [("R", "B")], 4: [("T", "R")], 8: [("L", "T")],
    3: [("R", "L")], 6: [("T", "B")], 12: [("L", "R")], 9: [("B", "T")],
    14: [("L", "B")], 13: [("B", "R")], 11: [("R", "T")], 7: [("T", "L")],
}
_SADDLE = {
    5: ([("B", "R"), ("T", "L")], [("B", "L"), ("T", "R")]),
    10: ([("L", "B"), ("R", "T")], [("R", "B"), ("L", "T")]),
}


def _edge_key(side: str, r: int, c: int):
    if side == "B":
        return ("h", r, c)
    if side == "T":
        return ("h", r + 1, c)
    if side == "L":
        return ("v", r, c)
    return ("v", r, c + 1)


def contours(p: Grid, threshold: float, with_holes: bool = False):
    """Closed level-set polygons of the regions with values above ``threshold``.

    Vertices are linearly interpolated along cell-center edges and returned
    in world coordinates, counterclockwise for outer boundaries. Interior
    holes are dropped unless ``with_holes`` is set, in which case the result
    is ``(outer rings, hole rings)``. The raster is padded with a
    below-threshold ring so regions touching the boundary still close.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    v = np.full((p.height + 2, p.width + 2), threshold - 1.0, dtype=np.float64)
    v[1:-1, 1:-1] = p.values
    inside = v > threshold

    config = (inside[:-1, :-1].astype(np.int8) + 2 * inside[:-1, 1:]
              + 4 * inside[1:, 1:] + 8 * inside[1:, :-1])
    rows, cols = np.nonzero((config != 0) & (config != 15))

    links: dict = {}
    for r, c in zip(rows.tolist(), cols.tolist()):
        cfg = int(config[r, c])
        if cfg in _SADDLE:
            center = (v[r, c] + v[r, c + 1] + v[r + 1, c] + v[r + 1, c + 1]) / 4.0
            segs = _SADDLE[cfg][0] if center > threshold else _SADDLE[cfg][1]
        else:
            segs = _CASES[cfg]
        for frm, to in segs:
            links[_edge_key(frm, r, c)] = _edge_key(to, r, c)

    def vertex(key):
        kind, r, c = key
        if kind == "h":
            v1, v2 = v[r, c], v[r, c + 1]
            t = (threshold - v1) / (v2 - v1)
            node_r, node_c = float(r), c + t
        else:
            v1, v2 = v[r, c], v[r + 1, c]
            t = (threshold - v1) / (v2 - v1)
            node_r, node_c = r + t, float(c)
        # padded node (r, c) sits at the center of cell (r-1, c-1)
        return (p.origin_x + (node_c - 0.5) * p.cell_size,
                p.origin_y + (node_r - 0.5) * p.cell_size)

    outers, holes = [], []
    seen = set()
    for start in links:
        if start in seen:
            continue
        ring_keys = [start]
        seen.add(start)
        nxt = links[start]
        while nxt != start:
            ring_keys.append(nxt)
            seen.add(nxt)
            nxt = links[nxt]
        ring = [vertex(k) for k in ring_keys]
        # inside-on-the-left traversal: outer boundaries come out
        # counterclockwise, holes clockwise
        (outers if polygon_area(ring) > 0 else holes).append(ring)
    if with_holes:
        return outers, holes
    return outers


def polygon_area(ring) -> float:
    """Signed shoelace area; positive for counterclockwise rings."""
    area = 0.0
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        area += x1 * y2 - x2 * y1
    return area / 2.0


def polygon_centroid(ring) -> tuple[float, float]:
    a = polygon_area(ring)
    if abs(a) < 1e-12:
        xs = [pt[0] for pt in ring]
        ys = [pt[1] for pt in ring]
        return (sum(xs) / len(xs), sum(ys) / len(ys))
    cx = cy = 0.0
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        cross = x1 * y2 - x2 * y1
        cx += (x1 + x2) * cross
        cy += (y1 + y2) * cross
    return (cx / (6.0 * a), cy / (6.0 * a))


def point_in_polygon(ring, x: float, y: float) -> bool:
    """Even-odd rule with half-open vertical intervals (y1 <= y < y2)."""
    inside = False
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if (y1 <= y) != (y2 <= y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x_cross > x:
                inside = not inside
    return inside


def cells_inside(ring, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """(rows, cols) of cells whose centers fall inside the ring."""
    xs = np.array([pt[0] for pt in ring])
    ys = np.array([pt[1] for pt in ring])
    cs = grid.cell_size
    c0 = max(0, int(np.floor((xs.min() - grid.origin_x) / cs)))
    c1 = min(grid.width, int(np.ceil((xs.max() - grid.origin_x) / cs)) + 1)
    r0 = max(0, int(np.floor((ys.min() - grid.origin_y) / cs)))
    r1 = min(grid.height, int(np.ceil((ys.max() - grid.origin_y) / cs)) + 1)
    if c0 >= c1 or r0 >= r1:
        return np.array([], dtype=int), np.array([], dtype=int)
    center_x = grid.center_xs()[c0:c1]
    rows_out, cols_out = [], []
    n = len(ring)
    for r in range(r0, r1):
        cy = grid.origin_y + (r + 0.5) * cs
        crossings = []
        for i in range(n):
            x1, y1 = ring[i]
            x2, y2 = ring[(i + 1) % n]
            if (y1 <= cy) != (y2 <= cy):
                crossings.append(x1 + (cy - y1) * (x2 - x1) / (y2 - y1))
        if not crossings:
            continue
        crossings = np.sort(np.array(crossings))
        greater = len(crossings) - np.searchsorted(crossings, center_x, side="right")
        hit = np.nonzero(greater % 2 == 1)[0]
        rows_out.extend([r] * len(hit))
        cols_out.extend((hit + c0).tolist())
    return np.array(rows_out, dtype=int), np.array(cols_out, dtype=int)


def candidate_stats(ring, p: Grid, dem: Grid) -> tuple[float, float, float]:
    """(area m^2, population elevation variance, lower-median probability)."""
    rows, cols = cells_inside(ring, p)
    if len(rows) == 0:
        raise DegenerateCandidateError("polygon encloses no cell centers")
    area = len(rows) * p.cell_size ** 2
    heights = dem.values[rows, cols].astype(np.float64)
    variance = float(((heights - heights.mean()) ** 2).mean())
    probs = np.sort(p.values[rows, cols].astype(np.float64))
    median = float(probs[(len(probs) - 1) // 2])
    return area, variance, median


def filter_candidates(candidates: list[Candidate], cfg: FilterConfig) -> list[Candidate]:
    """Tag each candidate as proposed or filtered(reason). Idempotent."""
    out = []
    for cand in candidates:
        if cand.area_m2 < cfg.min_area_m2:
            status, reason = "filtered", "too_small"
        elif cand.area_m2 > cfg.max_area_m2:
            status, reason = "filtered", "too_large"
        elif cand.elev_var < cfg.min_elev_var_m2:
            status, reason = "filtered", "flat"
        elif cand.median_p < cfg.median_threshold:
            status, reason = "filtered", "low_median"
        else:
            status, reason = "proposed", None
        out.append(replace(cand, status=status, reason=reason))
    return out


# -- Gaussian mixture ------------------------------------------------------------


@dataclass(frozen=True)
class GmmResult:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihoods: list[float]


def _log_gauss(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    diff = x - mean
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
    inv = np.array([[cov[1, 1], -cov[0, 1]], [-cov[1, 0], cov[0, 0]]]) / det
    maha = (diff @ inv * diff).sum(axis=1)
    return -0.5 * (maha + np.log(det) + 2.0 * np.log(2.0 * np.pi))


def gmm_em(points, k: int = 2, tol: float = 1e-9, max_iter: int = 200,
           rng: Rng | None = None) -> GmmResult:
    """Expectation-maximization with full 2x2 covariances.

    Initialization is deterministic: means start at the points with extreme
    projections onto the cloud's principal axis, so ``rng`` is unused and
    only kept for signature stability. Covariances carry a small diagonal
    regularizer scaled to the data spread.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ValueError("points must be (n, 2)")
    distinct = np.unique(x, axis=0)
    if len(distinct) < k:
        raise DegenerateFitError(f"need at least {k} distinct points, have {len(distinct)}")

    scale2 = max(x[:, 0].var(), x[:, 1].var())
    reg = 1e-6 * scale2 * np.eye(2)
    center = x.mean(axis=0)
    cov0 = (x - center).T @ (x - center) / len(x) + reg
    eigvals, eigvecs = np.linalg.eigh(cov0)
    axis = eigvecs[:, int(np.argmax(eigvals))]
    proj = x @ axis
    order = np.argsort(proj, kind="stable")
    picks = [order[0], order[-1]] if k == 2 else \
        [order[int(round(i * (len(x) - 1) / (k - 1)))] for i in range(k)]
    means = x[picks].copy()
    covs = np.stack([cov0.copy() for _ in range(k)])
    weights = np.full(k, 1.0 / k)

    lls: list[float] = []
    for _ in range(max_iter):
        log_resp = np.stack([np.log(weights[j]) + _log_gauss(x, means[j], covs[j])
                             for j in range(k)], axis=1)
        peak = log_resp.max(axis=1, keepdims=True)
        log_norm = peak[:, 0] + np.log(np.exp(log_resp - peak).sum(axis=1))
        ll = float(log_norm.sum())
        resp = np.exp(log_resp - log_norm[:, None])
        if lls and ll < lls[-1] - 1e-9 * max(1.0, abs(ll)):
            raise AssertionError("EM log-likelihood decreased")
        done = bool(lls) and ll - lls[-1] < tol
        lls.append(ll)
        if done:
            break
        mass = resp.sum(axis=0)
        weights = mass / len(x)
        for j in range(k):
            means[j] = (resp[:, j:j + 1] * x).sum(axis=0) / mass[j]
            diff = x - means[j]
            covs[j] = (resp[:, j:j + 1] * diff).T @ diff / mass[j] + reg
    return GmmResult(weights=weights, means=means, covariances=covs,
                     log_likelihoods=lls)


# -- horseshoe fitting ------------------------------------------------------------

def expand_polygon(cand: Candidate, p: Grid, cfg: FilterConfig):
    """Re-contour around the candidate at the lower threshold for context."""
    xs = [pt[0] for pt in cand.polygon]
    ys = [pt[1] for pt in cand.polygon]
    cs = p.cell_size
    m = cfg.margin_cells
    c0 = max(0, int((min(xs) - p.origin_x) / cs) - m)
    c1 = min(p.width, int((max(xs) - p.origin_x) / cs) + m + 1)
    r0 = max(0, int((min(ys) - p.origin_y) / cs) - m)
    r1 = min(p.height, int((max(ys) - p.origin_y) / cs) + m + 1)
    window = crop_grid(p, r0, c0, r1 - r0, c1 - c0)
    cx, cy = cand.centroid()
    for ring in contours(window, cfg.contour_threshold_lo):
        if point_in_polygon(ring, cx, cy):
            return ring
    return list(cand.polygon)


def fit_horseshoe(cand: Candidate, p: Grid, dem: Grid, cfg: FilterConfig,
                  rng: Rng) -> Correction:
    """Fit spine-plus-width horseshoe geometry to a proposed candidate.

    Cell centers of the elevation crop around the (expanded) polygon are
    sampled with probability proportional to depth below the crop's maximum
    height; a 2-component mixture locates the two depressions the correction
    connects. Raises FitFailedError when the fit collapses.
    """
    expanded = expand_polygon(cand, p, cfg)
    xs = [pt[0] for pt in expanded]
    ys = [pt[1] for pt in expanded]
    cs = dem.cell_size
    c0 = max(0, int((min(xs) - dem.origin_x) / cs))
    c1 = min(dem.width, int(np.ceil((max(xs) - dem.origin_x) / cs)) + 1)
    r0 = max(0, int((min(ys) - dem.origin_y) / cs))
    r1 = min(dem.height, int(np.ceil((max(ys) - dem.origin_y) / cs)) + 1)
    window = crop_grid(dem, r0, c0, max(r1 - r0, 1), max(c1 - c0, 1))

    heights = window.values.astype(np.float64)
    q = np.maximum(0.0, heights.max() - heights).ravel()
    total = q.sum()
    if total <= 0.0:
        raise FitFailedError("crop is flat; nothing to sample")
    cdf = np.cumsum(q / total)
    draws = np.array([rng.random() for _ in range(cfg.gmm_samples)])
    idx = np.searchsorted(cdf, draws, side="right")
    idx = np.minimum(idx, q.size - 1)
    rows, cols = np.divmod(idx, window.width)
    pts = np.stack([window.origin_x + (cols + 0.5) * cs,
                    window.origin_y + (rows + 0.5) * cs], axis=1)

    try:
        fit = gmm_em(pts, k=2)
    except DegenerateFitError as exc:
        raise FitFailedError(str(exc)) from exc
    m1, m2 = fit.means
    if tuple(m2) < tuple(m1):
        m1, m2 = m2, m1
    if float(np.hypot(*(m2 - m1))) < cs:
        raise FitFailedError("mixture components collapsed onto one depression")

    direction = (m2 - m1) / np.hypot(*(m2 - m1))
    normal = np.array([-direction[1], direction[0]])
    proj = np.array(cand.polygon) @ normal
    width = float(proj.max() - proj.min())
    width = max(width, 0.5 * cs)
    return Correction(id=f"{cand.id}:fit", kind="horseshoe",
                      p0=(float(m1[0]), float(m1[1])),
                      p1=(float(m2[0]), float(m2[1])), width=width)


def extract_candidates(p: Grid, dem: Grid, cfg: FilterConfig,
                       seed: int = 0) -> list[Candidate]:
    """Run contours, stats, filters and horseshoe fits over a probability map."""
    rings = contours(p, cfg.contour_threshold)
    candidates = []
    for i, ring in enumerate(rings):
        cid = f"c{i:04d}"
        try:
            area, variance, median = candidate_stats(ring, p, dem)
        except DegenerateCandidateError:
            continue
        candidates.append(Candidate(id=cid, polygon=ring, area_m2=area,
                                    elev_var=variance, median_p=median))
    candidates = filter_candidates(candidates, cfg)
    out = []
    for cand in candidates:
        if cand.status != "proposed":
            out.append(cand)
            continue
        try:
            shoe = fit_horseshoe(cand, p, dem, cfg, Rng(seed).fork("fit", cand.id))
        except FitFailedError:
            shoe = None
        out.append(replace(cand, horseshoe=shoe))
    return out


# -- candidate JSON lines ----------------------------------------------------------

def candidate_to_json(cand: Candidate) -> dict:
    obj = {
        "id": cand.id,
        "polygon": [[float(x), float(y)] for x, y in cand.polygon],
        "area_m2": cand.area_m2,
        "elev_var": cand.elev_var,
        "median_p": cand.median_p,
        "horseshoe": None if cand.horseshoe is None else {
            "p0": list(cand.horseshoe.p0), "p1": list(cand.horseshoe.p1),
            "width": cand.horseshoe.width},
        "status": cand.status,
    }
    if cand.reason is not None:
        obj["reason"] = cand.reason
    return obj


def candidate_from_json(obj: dict) -> Candidate:
    shoe = obj.get("horseshoe")
    horseshoe = None
    if shoe is not None:
        horseshoe = Correction(id=f"{obj['id']}:fit", kind="horseshoe",
                               p0=tuple(shoe["p0"]), p1=tuple(shoe["p1"]),
                               width=float(shoe["width"]))
    return Candidate(id=obj["id"],
                     polygon=[(float(x), float(y)) for x, y in obj["polygon"]],
                     area_m2=float(obj["area_m2"]),
                     elev_var=float(obj["elev_var"]),
                     median_p=float(obj["median_p"]),
                     horseshoe=horseshoe, status=obj.get("status", "proposed"),
                     reason=obj.get("reason"))


def write_candidates(candidates, path) -> None:
    with open(path, "w") as fh:
        for cand in candidates:
            fh.write(json.dumps(candidate_to_json(cand)) + "\n")


def read_candidates(path) -> list[Candidate]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(candidate_from_json(json.loads(line)))
    return out
