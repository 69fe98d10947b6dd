"""Detection quality: cell-level AUC, region-level matching, PR curves,
and selection of bootstrap locations from near-boundary false positives."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .extract import Candidate
from .labels import Correction

BOOTSTRAP_RANGE = (0.435, 0.45)


class UndefinedAucError(Exception):
    """All cells share one class; ranking quality is undefined."""


def tile_auc(predictions, labels) -> float:
    """Probability a random positive cell outranks a random negative one.

    Cells are pooled across all tiles; ties are handled with midranks, so a
    constant predictor scores exactly 0.5.
    """
    if len(predictions) != len(labels):
        raise ValueError("one label mask per prediction")
    scores = np.concatenate([
        (p.values if hasattr(p, "values") else np.asarray(p)).ravel()
        for p in predictions]).astype(np.float64)
    truth = np.concatenate([
        (l.grid.values if hasattr(l, "grid") else
         (l.values if hasattr(l, "values") else np.asarray(l))).ravel()
        for l in labels]) > 0.5
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAucError("need at least one positive and one negative cell")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(truth.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    rank_positions = np.arange(1, truth.size + 1, dtype=np.float64)
    while i < truth.size:
        j = i
        while j + 1 < truth.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = rank_positions[i:j + 1].mean()
        i = j + 1
    pos_rank_sum = ranks[truth].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def tile_auc_histogram(predictions, labels, bins: int = 4096) -> float:
    """Binned approximation of tile_auc over the [0, 1] score range."""
    scores = np.concatenate([
        (p.values if hasattr(p, "values") else np.asarray(p)).ravel()
        for p in predictions]).astype(np.float64)
    truth = np.concatenate([
        (l.grid.values if hasattr(l, "grid") else
         (l.values if hasattr(l, "values") else np.asarray(l))).ravel()
        for l in labels]) > 0.5
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAucError("need at least one positive and one negative cell")
    idx = np.clip((scores * bins).astype(int), 0, bins - 1)
    pos_hist = np.bincount(idx[truth], minlength=bins).astype(np.float64)
    neg_hist = np.bincount(idx[~truth], minlength=bins).astype(np.float64)
    neg_below = np.concatenate([[0.0], np.cumsum(neg_hist)[:-1]])
    wins = (pos_hist * (neg_below + 0.5 * neg_hist)).sum()
    return float(wins / (n_pos * n_neg))


@dataclass(frozen=True)
class MatchResult:
    pairs: list[tuple[str, str, float]]     # (proposal id, truth id, meters)
    unmatched_proposals: list[str]
    unmatched_truths: list[str]

    @property
    def tp(self) -> int:
        return len(self.pairs)

    @property
    def fp(self) -> int:
        return len(self.unmatched_proposals)

    @property
    def fn(self) -> int:
        return len(self.unmatched_truths)


def truth_center(truth: Correction) -> tuple[float, float]:
    return truth.centroid()


def match_detections(proposals: list[Candidate], truths: list[Correction],
                     radius_m: float = 25.0) -> MatchResult:
    """Greedy one-to-one pairing by increasing center distance.

    Only pairs closer than ``radius_m`` are considered; leftovers are false
    positives / false negatives. Distance ties break on (proposal, truth)
    ids so results are reproducible.
    """
    edges = []
    centers = {c.id: c.centroid() for c in proposals}
    for cand in proposals:
        px, py = centers[cand.id]
        for truth in truths:
            tx, ty = truth_center(truth)
            d = float(np.hypot(px - tx, py - ty))
            if d < radius_m:
                edges.append((d, cand.id, truth.id))
    edges.sort()
    used_p: set[str] = set()
    used_t: set[str] = set()
    pairs = []
    for d, pid, tid in edges:
        if pid in used_p or tid in used_t:
            continue
        pairs.append((pid, tid, d))
        used_p.add(pid)
        used_t.add(tid)
    return MatchResult(
        pairs=pairs,
        unmatched_proposals=[c.id for c in proposals if c.id not in used_p],
        unmatched_truths=[t.id for t in truths if t.id not in used_t])


@dataclass(frozen=True)
class PRCurve:
    thresholds: list[float]
    precisions: list[float]
    recalls: list[float]
    mp: float
    max_recall: float
    mp_over_precision: float = 0.0   # sum of delta-recall / precision
    counts: dict = field(default_factory=dict)


def pr_curve(proposals: list[Candidate], truths: list[Correction],
             radius_m: float = 25.0) -> PRCurve:
    """Precision/recall swept over the distinct median-probability thresholds.

    mp is the recall-weighted average precision, sum of
    (recall_n - recall_{n-1}) * precision_n over points ordered by growing
    recall. ``mp_over_precision`` divides by precision instead of
    multiplying; it is reported for comparison but exceeds 1 for any
    imperfect detector.
    """
    if not truths:
        raise ValueError("pr_curve needs at least one ground-truth correction")
    if not proposals:
        return PRCurve([], [], [], 0.0, 0.0, 0.0,
                       counts={"tp": 0, "fp": 0, "fn": len(truths)})
    thresholds = sorted({c.median_p for c in proposals})
    precisions, recalls = [], []
    for t in thresholds:
        kept = [c for c in proposals if c.median_p >= t]
        match = match_detections(kept, truths, radius_m)
        precisions.append(match.tp / len(kept) if kept else 1.0)
        recalls.append(match.tp / len(truths))
    # integrate in order of increasing recall (= decreasing threshold)
    mp = 0.0
    literal = 0.0
    prev_recall = 0.0
    for t, p, r in sorted(zip(thresholds, precisions, recalls),
                          key=lambda row: (row[2], -row[0])):
        delta = r - prev_recall
        if delta > 0:
            mp += delta * p
            if p > 0:
                literal += delta / p
            prev_recall = r
    full = match_detections(proposals, truths, radius_m)
    return PRCurve(thresholds=thresholds, precisions=precisions,
                   recalls=recalls, mp=mp, max_recall=full.tp / len(truths),
                   mp_over_precision=literal,
                   counts={"tp": full.tp, "fp": full.fp, "fn": full.fn})


def bootstrap_sample(candidates: list[Candidate], p, match: MatchResult,
                     prob_range: tuple[float, float] = BOOTSTRAP_RANGE
                     ) -> list[tuple[float, float]]:
    """Centroids of false positives whose median probability sits in the
    closed ``prob_range``.

    False positives scoring above the range are deliberately left out: on
    inspection those tend to be real corrections missing from the truth
    list, and training against them as negatives would hurt. Points are
    clipped to candidates whose centroid lies on the raster ``p`` when one
    is provided.
    """
    lo, hi = prob_range
    fp_ids = set(match.unmatched_proposals)
    out = []
    for cand in candidates:
        if cand.id not in fp_ids or not (lo <= cand.median_p <= hi):
            continue
        cx, cy = cand.centroid()
        if p is not None:
            b = p.bounds()
            if not (b.min_x <= cx <= b.max_x and b.min_y <= cy <= b.max_y):
                continue
        out.append((cx, cy))
    return out


def report_to_json(curve: PRCurve, auc: float | None = None) -> dict:
    return {
        "auc": auc,
        "max_recall": curve.max_recall,
        "mP": curve.mp,
        "curve": [{"t": t, "precision": p, "recall": r}
                  for t, p, r in zip(curve.thresholds, curve.precisions,
                                     curve.recalls)],
        "tp": curve.counts.get("tp", 0),
        "fp": curve.counts.get("fp", 0),
        "fn": curve.counts.get("fn", 0),
    }


def write_report(curve: PRCurve, path, auc: float | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(report_to_json(curve, auc), fh, indent=2, sort_keys=True)
