import warnings

import pytest

from hydrofix.evaluation import MatchResult
from hydrofix.extract import Candidate
from hydrofix.labels import Correction
from hydrofix.review import (Verdict, append_verdict, export_bootstrap,
                             fold_verdicts, read_verdicts)


def cand(cid, cx, cy, median=0.44, shoe=True):
    ring = [(cx - 1, cy - 1), (cx + 1, cy - 1), (cx + 1, cy + 1), (cx - 1, cy + 1)]
    horseshoe = Correction(f"{cid}:fit", "horseshoe", p0=(cx - 2, cy),
                           p1=(cx + 2, cy), width=1.0) if shoe else None
    return Candidate(id=cid, polygon=ring, area_m2=4.0, elev_var=0.5,
                     median_p=median, horseshoe=horseshoe)


def test_verdict_log_roundtrip(tmp_path):
    path = tmp_path / "verdicts.jsonl"
    append_verdict(path, Verdict("c1", "accept", "ann", 100.0))
    append_verdict(path, Verdict("c2", "reject", "bob", 101.0))
    back = read_verdicts(path)
    assert [v.candidate_id for v in back] == ["c1", "c2"]
    assert back[0].verdict == "accept" and back[1].reviewer == "bob"


def test_verdict_log_missing_file(tmp_path):
    assert read_verdicts(tmp_path / "nope.jsonl") == []


def test_partial_trailing_line_dropped_with_warning(tmp_path):
    path = tmp_path / "verdicts.jsonl"
    append_verdict(path, Verdict("c1", "accept", "ann", 100.0))
    with open(path, "a") as fh:
        fh.write('{"candidate_id": "c2", "verd')  # torn write
    with pytest.warns(UserWarning):
        back = read_verdicts(path)
    assert len(back) == 1


def test_corrupt_interior_line_raises(tmp_path):
    path = tmp_path / "verdicts.jsonl"
    with open(path, "w") as fh:
        fh.write("garbage\n")
        fh.write('{"candidate_id": "c1", "verdict": "accept", "reviewer": "a", "ts": 1.0}\n')
    with pytest.raises(ValueError):
        read_verdicts(path)


def test_invalid_verdict_value_rejected():
    with pytest.raises(ValueError):
        Verdict("c1", "maybe", "ann", 1.0)


def test_fold_latest_wins():
    verdicts = [
        Verdict("c1", "accept", "ann", 100.0),
        Verdict("c1", "reject", "bob", 200.0),
        Verdict("c2", "reject", "ann", 50.0),
        Verdict("c2", "accept", "ann", 50.0),  # tie: later line wins
    ]
    state = fold_verdicts(verdicts)
    assert state["c1"].verdict == "reject"
    assert state["c2"].verdict == "accept"


def test_export_accept_grows_truths():
    c = cand("c1", 10.0, 10.0)
    negatives, truths = export_bootstrap(
        [Verdict("c1", "accept", "ann", 1.0)], [c])
    assert negatives == []
    assert len(truths) == 1 and truths[0].kind == "horseshoe"


def test_export_reject_then_accept_counts_accepted():
    c = cand("c1", 10.0, 10.0)
    verdicts = [Verdict("c1", "reject", "ann", 1.0),
                Verdict("c1", "accept", "ann", 2.0)]
    negatives, truths = export_bootstrap(verdicts, [c])
    assert negatives == [] and len(truths) == 1


def test_export_reject_becomes_negative_center():
    c = cand("c1", 10.0, 10.0)
    negatives, truths = export_bootstrap(
        [Verdict("c1", "reject", "ann", 1.0)], [c])
    assert truths == []
    assert negatives == [(10.0, 10.0)]


def test_export_empty_log_uses_range_rule_only():
    candidates = [cand("c1", 10.0, 10.0, median=0.44),
                  cand("c2", 100.0, 10.0, median=0.9)]
    match = MatchResult(pairs=[], unmatched_proposals=["c1", "c2"],
                        unmatched_truths=[])
    negatives, truths = export_bootstrap([], candidates, match=match)
    assert negatives == [(10.0, 10.0)]  # c2's median is above the range
    assert truths == []


def test_export_dedup_within_10m():
    candidates = [cand("c1", 10.0, 10.0, median=0.44),
                  cand("c2", 14.0, 10.0, median=0.44)]
    match = MatchResult(pairs=[], unmatched_proposals=["c1", "c2"],
                        unmatched_truths=[])
    verdicts = [Verdict("c1", "reject", "ann", 1.0)]
    negatives, _ = export_bootstrap(verdicts, candidates, match=match)
    assert negatives == [(10.0, 10.0)]  # c2's centroid is 4 m away: deduped


def test_export_unknown_candidate_skipped_with_warning():
    with pytest.warns(UserWarning):
        negatives, truths = export_bootstrap(
            [Verdict("ghost", "accept", "ann", 1.0)], [cand("c1", 0.0, 0.0)])
    assert negatives == [] and truths == []


def test_export_accepted_never_negative():
    candidates = [cand("c1", 10.0, 10.0, median=0.44)]
    match = MatchResult(pairs=[], unmatched_proposals=["c1"],
                        unmatched_truths=[])
    negatives, truths = export_bootstrap(
        [Verdict("c1", "accept", "ann", 1.0)], candidates, match=match)
    assert negatives == [] and len(truths) == 1


def test_export_accept_without_horseshoe_contributes_nothing():
    c = cand("c1", 10.0, 10.0, shoe=False)
    negatives, truths = export_bootstrap(
        [Verdict("c1", "accept", "ann", 1.0)], [c])
    assert truths == [] and negatives == []
