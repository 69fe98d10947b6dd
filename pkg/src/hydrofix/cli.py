"""Command-line entry point.

    hydrofix <synth|features|train|predict|extract|eval|bootstrap|serve>
             --config <file> [--out <dir>] [--seed <u64>] [--threshold <f>]

Stage-specific flags: --region for predict/extract/eval, --bootstrap for
train, --verdicts/--candidates for bootstrap, --port/--ui for serve.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import pipeline
from .extract import read_candidates
from .pipeline import ConfigError, PipelineConfig, load_config
from .raster import read_grid
from .server import ReviewStore, serve_review

COMMANDS = ("synth", "features", "train", "predict", "extract", "eval",
            "bootstrap", "serve")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hydrofix",
        description="detect hydrological corrections in elevation models")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="pipeline config JSON")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, help="seed override")
    parser.add_argument("--threshold", type=float,
                        help="median-probability filter override")
    parser.add_argument("--region", default="eval/region000",
                        help="region path under synth/ for predict/extract/eval")
    parser.add_argument("--bootstrap", help="bootstrap.json for retraining")
    parser.add_argument("--verdicts", help="verdict log for the bootstrap stage")
    parser.add_argument("--candidates", help="candidates file for verdict folding")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--ui", help="static UI bundle directory")
    parser.add_argument("--quiet", action="store_true")
    return parser


def apply_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out=args.out)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.threshold is not None:
        cfg = dataclasses.replace(cfg, filter=dataclasses.replace(
            cfg.filter, median_threshold=args.threshold))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(cfg.out)
    say = (lambda *a: None) if args.quiet else print
    try:
        if args.command == "synth":
            counts = pipeline.stage_synth(cfg, out_dir)
            say(f"synth: truths per split {counts}")
        elif args.command == "features":
            n = pipeline.stage_features(cfg, out_dir)
            say(f"features: {n} regions updated")
        elif args.command == "train":
            bootstrap = Path(args.bootstrap) if args.bootstrap else None
            progress = None if args.quiet else (
                lambda e, tr, vl: print(f"epoch {e}: train {tr:.4f} val {vl:.4f}"))
            report = pipeline.stage_train(cfg, out_dir, bootstrap_file=bootstrap,
                                          progress=progress)
            say(f"train: val tile AUC {report['val_tile_auc']:.4f}")
        elif args.command == "predict":
            path = pipeline.stage_predict(cfg, out_dir, region=args.region)
            say(f"predict: wrote {path}")
        elif args.command == "extract":
            path = pipeline.stage_extract(cfg, out_dir, region=args.region)
            cands = read_candidates(path)
            kept = sum(1 for c in cands if c.status == "proposed")
            say(f"extract: {len(cands)} contours, {kept} proposed -> {path}")
        elif args.command == "eval":
            report = pipeline.stage_eval(cfg, out_dir, region=args.region)
            say(f"eval: max recall {report['max_recall']:.3f} mP {report['mP']:.3f} "
                f"(tp {report['tp']} fp {report['fp']} fn {report['fn']})")
        elif args.command == "bootstrap":
            verdicts = Path(args.verdicts) if args.verdicts else None
            cands = Path(args.candidates) if args.candidates else None
            path = pipeline.stage_bootstrap(cfg, out_dir, verdict_log=verdicts,
                                            candidates_path=cands,
                                            region_for_verdicts=args.region)
            payload = json.loads(path.read_text())
            say(f"bootstrap: {len(payload['negatives'])} negatives, "
                f"{len(payload['extra_truths'])} extra truths -> {path}")
        elif args.command == "serve":
            store = _make_store(cfg, out_dir, args.region)
            ui = Path(args.ui) if args.ui else _default_ui_dir()
            server = serve_review(store, port=args.port, ui_dir=ui)
            say(f"review service on http://127.0.0.1:{args.port}/ "
                f"(ui: {ui if ui else 'none'})")
            try:
                server.serve_forever()
            except KeyboardInterrupt:
                server.shutdown()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # stage failure -> nonzero exit
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return 1
    return 0


def _make_store(cfg: PipelineConfig, out_dir: Path, region: str) -> ReviewStore:
    cands = read_candidates(out_dir / "extract" / region / "candidates.jsonl")
    prob = read_grid(out_dir / "predict" / region / "p.hcr")
    dem = read_grid(out_dir / "predict" / region / "dem.hcr")
    truths = pipeline.load_region_truths(out_dir / "synth" / region)
    (out_dir / "review").mkdir(parents=True, exist_ok=True)
    return ReviewStore(cands, prob, dem, truths,
                       verdict_log=out_dir / "review" / "verdicts.jsonl",
                       match_radius_m=cfg.eval.match_radius_m,
                       bootstrap_range=(cfg.bootstrap.lo, cfg.bootstrap.hi))


def _default_ui_dir() -> Path | None:
    for base in (Path.cwd(), Path(__file__).resolve().parents[2]):
        candidate = base / "frontend" / "dist"
        if candidate.is_dir():
            return candidate
    return None


if __name__ == "__main__":
    sys.exit(main())
