"""HTTP review service: browse candidates, submit verdicts, export bootstrap.

Endpoints (all JSON, UTF-8):

    GET  /api/candidates?status=pending|accepted|rejected|all
    GET  /api/candidates/{id}            full candidate + context crop
    POST /api/candidates/{id}/verdict    {"verdict":"accept"|"reject","reviewer":s}
    GET  /api/stats                      counts per status + reviewer throughput
    GET  /api/export/bootstrap           negative centers + accepted horseshoes

Anything else is served from the static UI directory when one is configured.
Verdicts append to a JSON-lines log through a single lock; candidate status
is always the fold of that log over the immutable candidate list.
"""

from __future__ import annotations

import json
import re
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .evaluation import match_detections
from .extract import Candidate
from .labels import Correction
from .raster import Grid, crop as crop_grid, downsample_2x
from .review import Verdict, append_verdict, export_bootstrap, fold_verdicts, read_verdicts

CROP_MAX = 128


class ReviewStore:
    """Candidate list, rasters and the verdict log behind the API."""

    def __init__(self, candidates: list[Candidate], prob: Grid, dem: Grid,
                 truths: list[Correction], verdict_log: Path,
                 match_radius_m: float = 25.0,
                 bootstrap_range: tuple[float, float] = (0.435, 0.45)):
        self.candidates = candidates
        self.by_id = {c.id: c for c in candidates}
        self.prob = prob
        self.dem = dem
        self.truths = truths
        self.verdict_log = Path(verdict_log)
        self.match_radius_m = match_radius_m
        self.bootstrap_range = bootstrap_range
        self._lock = threading.Lock()
        self._verdicts = read_verdicts(self.verdict_log)

    # -- verdict fold --------------------------------------------------------

    def verdict_state(self) -> dict[str, Verdict]:
        with self._lock:
            return fold_verdicts(list(self._verdicts))

    def add_verdict(self, candidate_id: str, verdict: str, reviewer: str) -> Verdict:
        v = Verdict(candidate_id=candidate_id, verdict=verdict,
                    reviewer=reviewer, ts=time.time())
        with self._lock:
            append_verdict(self.verdict_log, v)
            self._verdicts.append(v)
        return v

    def status_of(self, cand: Candidate, state: dict[str, Verdict]) -> str:
        v = state.get(cand.id)
        if v is not None:
            return "accepted" if v.verdict == "accept" else "rejected"
        return "pending" if cand.status == "proposed" else cand.status

    # -- queries ---------------------------------------------------------------

    def summaries(self, want: str) -> list[dict]:
        state = self.verdict_state()
        rows = []
        for cand in self.candidates:
            status = self.status_of(cand, state)
            if want != "all" and status != want:
                continue
            cx, cy = cand.centroid()
            rows.append({"id": cand.id, "centroid": [cx, cy],
                         "area_m2": cand.area_m2, "median_p": cand.median_p,
                         "status": status})
        if want == "pending":
            rows.sort(key=lambda r: (abs(r["median_p"] - 0.5), r["id"]))
        return rows

    def detail(self, cand_id: str) -> dict | None:
        cand = self.by_id.get(cand_id)
        if cand is None:
            return None
        state = self.verdict_state()
        xs = [p[0] for p in cand.polygon]
        ys = [p[1] for p in cand.polygon]
        cs = self.prob.cell_size
        margin = 12
        c0 = max(0, int((min(xs) - self.prob.origin_x) / cs) - margin)
        c1 = min(self.prob.width, int((max(xs) - self.prob.origin_x) / cs) + margin + 1)
        r0 = max(0, int((min(ys) - self.prob.origin_y) / cs) - margin)
        r1 = min(self.prob.height, int((max(ys) - self.prob.origin_y) / cs) + margin + 1)
        dem_crop = crop_grid(self.dem, r0, c0, r1 - r0, c1 - c0)
        prob_crop = crop_grid(self.prob, r0, c0, r1 - r0, c1 - c0)
        while dem_crop.width > CROP_MAX or dem_crop.height > CROP_MAX:
            if dem_crop.width % 2 or dem_crop.height % 2:
                dem_crop = crop_grid(dem_crop, 0, 0,
                                     dem_crop.height - dem_crop.height % 2,
                                     dem_crop.width - dem_crop.width % 2)
                prob_crop = crop_grid(prob_crop, 0, 0,
                                      dem_crop.height, dem_crop.width)
            dem_crop = downsample_2x(dem_crop)
            prob_crop = downsample_2x(prob_crop)

        def local(pt):
            return [(pt[0] - dem_crop.origin_x) / dem_crop.cell_size - 0.5,
                    (pt[1] - dem_crop.origin_y) / dem_crop.cell_size - 0.5]

        shoe = None
        if cand.horseshoe is not None:
            shoe = {"p0": local(cand.horseshoe.p0), "p1": local(cand.horseshoe.p1),
                    "width": cand.horseshoe.width / dem_crop.cell_size}
        payload = {
            "id": cand.id, "status": self.status_of(cand, state),
            "area_m2": cand.area_m2, "elev_var": cand.elev_var,
            "median_p": cand.median_p,
            "dem": [[float(v) for v in row] for row in dem_crop.values],
            "prob": [[float(v) for v in row] for row in prob_crop.values],
            "polygon": [local(p) for p in cand.polygon],
            "horseshoe": shoe,
            "world_origin": [dem_crop.origin_x, dem_crop.origin_y],
            "cell_size": dem_crop.cell_size,
        }
        return payload

    def stats(self) -> dict:
        state = self.verdict_state()
        counts = {"pending": 0, "accepted": 0, "rejected": 0, "filtered": 0}
        for cand in self.candidates:
            status = self.status_of(cand, state)
            counts[status] = counts.get(status, 0) + 1
        with self._lock:
            throughput: dict[str, int] = {}
            for v in self._verdicts:
                throughput[v.reviewer] = throughput.get(v.reviewer, 0) + 1
            total = len(self._verdicts)
        return {"counts": counts, "reviewers": throughput, "verdicts": total}

    def export(self) -> dict:
        with self._lock:
            verdicts = list(self._verdicts)
        proposals = [c for c in self.candidates if c.status == "proposed"]
        match = match_detections(proposals, self.truths, self.match_radius_m)
        negatives, truths = export_bootstrap(verdicts, self.candidates,
                                             match=match,
                                             prob_range=self.bootstrap_range)
        return {
            "negatives": [[x, y] for x, y in negatives],
            "extra_truths": [{"id": t.id, "p0": list(t.p0), "p1": list(t.p1),
                              "width": t.width} for t in truths],
        }


_ROUTE_DETAIL = re.compile(r"^/api/candidates/([^/]+)$")
_ROUTE_VERDICT = re.compile(r"^/api/candidates/([^/]+)/verdict$")

_CONTENT_TYPES = {".html": "text/html", ".js": "text/javascript",
                  ".css": "text/css", ".map": "application/json",
                  ".json": "application/json"}


def make_handler(store: ReviewStore, ui_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _json(self, payload, code: int = 200):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            url = urlparse(self.path)
            if url.path == "/api/candidates":
                want = parse_qs(url.query).get("status", ["pending"])[0]
                if want not in ("pending", "accepted", "rejected", "all"):
                    return self._json({"error": f"bad status {want!r}"}, 400)
                return self._json(store.summaries(want))
            if url.path == "/api/stats":
                return self._json(store.stats())
            if url.path == "/api/export/bootstrap":
                return self._json(store.export())
            m = _ROUTE_DETAIL.match(url.path)
            if m:
                payload = store.detail(m.group(1))
                if payload is None:
                    return self._json({"error": "unknown candidate"}, 404)
                return self._json(payload)
            return self._static(url.path)

        def do_POST(self):
            m = _ROUTE_VERDICT.match(urlparse(self.path).path)
            if not m:
                return self._json({"error": "not found"}, 404)
            cand_id = m.group(1)
            if cand_id not in store.by_id:
                return self._json({"error": "unknown candidate"}, 404)
            try:
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length) or b"{}")
                verdict = body["verdict"]
                reviewer = body["reviewer"]
                if verdict not in ("accept", "reject") or not isinstance(reviewer, str):
                    raise ValueError
            except (ValueError, KeyError, json.JSONDecodeError):
                return self._json({"error": "body must be "
                                   '{"verdict":"accept"|"reject","reviewer":str}'}, 400)
            store.add_verdict(cand_id, verdict, reviewer)
            self.send_response(204)
            self.send_header("Content-Length", "0")
            self.end_headers()

        def _static(self, path: str):
            if ui_dir is None:
                return self._json({"error": "not found"}, 404)
            rel = path.lstrip("/") or "index.html"
            target = (ui_dir / rel).resolve()
            if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
                return self._json({"error": "not found"}, 404)
            body = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type",
                             _CONTENT_TYPES.get(target.suffix, "application/octet-stream"))
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    return Handler


def serve_review(store: ReviewStore, port: int = 8765,
                 ui_dir: Path | None = None) -> ThreadingHTTPServer:
    """Bind the review server; caller runs serve_forever()/shutdown()."""
    handler = make_handler(store, ui_dir)
    return ThreadingHTTPServer(("127.0.0.1", port), handler)
