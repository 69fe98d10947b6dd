"""Verdict log and the fold that turns review decisions into training data.

Verdicts are an append-only JSON-lines log; candidate state is always
derived by folding the log (latest verdict per candidate wins). Rejected
candidates become negative tile centers, merged with the automatic
near-boundary false-positive sample; accepted candidates contribute their
fitted horseshoes to the truth set for the next training round.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .evaluation import MatchResult, bootstrap_sample, BOOTSTRAP_RANGE
from .extract import Candidate
from .labels import Correction


@dataclass(frozen=True)
class Verdict:
    candidate_id: str
    verdict: str          # "accept" | "reject"
    reviewer: str
    ts: float             # UTC seconds

    def __post_init__(self):
        if self.verdict not in ("accept", "reject"):
            raise ValueError(f"invalid verdict {self.verdict!r}")


def append_verdict(path, verdict: Verdict) -> None:
    with open(path, "a") as fh:
        fh.write(json.dumps({
            "candidate_id": verdict.candidate_id, "verdict": verdict.verdict,
            "reviewer": verdict.reviewer, "ts": verdict.ts}) + "\n")


def read_verdicts(path) -> list[Verdict]:
    """Parse the log; a partial trailing line is dropped with a warning."""
    out = []
    try:
        with open(path) as fh:
            lines = fh.read().split("\n")
    except FileNotFoundError:
        return out
    for i, line in enumerate(lines):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            out.append(Verdict(candidate_id=obj["candidate_id"],
                               verdict=obj["verdict"],
                               reviewer=obj.get("reviewer", ""),
                               ts=float(obj["ts"])))
        except (ValueError, KeyError):
            if i == len(lines) - 1:
                warnings.warn(f"{path}: dropping partial trailing verdict line")
            else:
                raise ValueError(f"{path}: corrupt verdict on line {i + 1}")
    return out


def fold_verdicts(verdicts: list[Verdict]) -> dict[str, Verdict]:
    """Latest verdict per candidate; ties on timestamp go to the later line."""
    state: dict[str, Verdict] = {}
    for v in verdicts:
        cur = state.get(v.candidate_id)
        if cur is None or v.ts >= cur.ts:
            state[v.candidate_id] = v
    return state


def export_bootstrap(verdicts: list[Verdict], candidates: list[Candidate],
                     match: MatchResult | None = None,
                     prob_range: tuple[float, float] = BOOTSTRAP_RANGE,
                     dedup_m: float = 10.0,
                     ) -> tuple[list[tuple[float, float]], list[Correction]]:
    """(negative tile centers, extra truth corrections) for the next round.

    Negatives: centroids of reviewer-rejected candidates, merged with the
    automatic range-rule sample (false positives from ``match`` when given),
    deduplicated within ``dedup_m`` meters. Truths: the fitted horseshoes of
    reviewer-accepted candidates. Verdicts naming unknown candidates are
    skipped with a warning; accepted candidates never appear as negatives.
    """
    by_id = {c.id: c for c in candidates}
    state = fold_verdicts(verdicts)
    accepted_ids = set()
    negatives: list[tuple[float, float]] = []
    truths: list[Correction] = []
    for cid in sorted(state):
        verdict = state[cid]
        cand = by_id.get(cid)
        if cand is None:
            warnings.warn(f"verdict for unknown candidate {cid!r} skipped")
            continue
        if verdict.verdict == "accept":
            accepted_ids.add(cid)
            if cand.horseshoe is not None:
                truths.append(cand.horseshoe)
        else:
            negatives.append(cand.centroid())
    if match is not None:
        auto = bootstrap_sample(
            [c for c in candidates if c.id not in accepted_ids
             and c.id not in state],
            None, match, prob_range)
        negatives.extend(auto)

    deduped: list[tuple[float, float]] = []
    for pt in negatives:
        if all(np.hypot(pt[0] - q[0], pt[1] - q[1]) >= dedup_m for q in deduped):
            deduped.append(pt)
    return deduped, truths
