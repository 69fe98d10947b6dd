"""Configuration, stage wiring and on-disk layout for the full pipeline.

Every stage is a pure function of its on-disk inputs plus the JSON config,
so any stage can be rerun in isolation. A run manifest (config hash, seed,
package version) is written next to every stage's outputs.

Region directories hold dem.hcr, rivers.json, roads.json, truths.jsonl and
optional feature rasters. The synth stage creates train/, val/ and eval/
region sets; later stages reference them by relative path.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import (bootstrap_sample, match_detections, pr_curve,
                         report_to_json, tile_auc)
from .extract import (FilterConfig, extract_candidates, read_candidates,
                      write_candidates)
from .features import (FeatureStack, fill_depth, flow_accumulation,
                       rasterize_polylines, read_polylines, write_polylines)
from .labels import (Correction, build_dataset, read_corrections,
                     write_corrections)
from .mosaic import MosaicConfig, predict_region
from .net import (ModelSpec, TrainConfig, load_checkpoint, save_adam_state,
                  save_checkpoint, train)
from .net.model import forward_batch
from .net.ops import sigmoid
from .raster import Grid, downsample_2x, read_grid, write_grid
from .review import export_bootstrap, read_verdicts
from .rng import derive_seed
from .synth import SynthParams, synth_terrain

FEATURE_CHOICES = ("elevation", "flow", "fill", "vectors")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class SynthConfig:
    train_regions: int = 100
    val_regions: int = 25
    region_size: int = 224
    eval_size: int = 512
    eval_rivers: int = 4
    eval_roads: int = 4
    cell_size: float = 1.0
    rivers: int = 2
    roads: int = 2
    embankment_height: float = 3.0
    valley_depth: float = 4.0
    culvert_prob: float = 1.0
    noise_amplitude: float = 0.15
    hill_count: int = 24

    def __post_init__(self):
        if min(self.train_regions, self.val_regions, self.rivers, self.roads,
               self.eval_rivers, self.eval_roads, self.hill_count) < 0:
            raise ValueError("counts must be non-negative")
        if min(self.region_size, self.eval_size) < 1 or self.cell_size <= 0:
            raise ValueError("sizes must be positive")
        if not 0.0 <= self.culvert_prob <= 1.0:
            raise ValueError("culvert_prob must be in [0, 1]")
        if self.embankment_height <= 0 or self.valley_depth <= 0:
            raise ValueError("heights must be positive")


@dataclass(frozen=True)
class EvalConfig:
    match_radius_m: float = 25.0

    def __post_init__(self):
        if self.match_radius_m <= 0:
            raise ValueError("match_radius_m must be positive")


@dataclass(frozen=True)
class BootstrapConfig:
    lo: float = 0.435
    hi: float = 0.45
    contour_threshold: float = 0.4   # below lo so borderline medians exist
    dedup_m: float = 10.0

    def __post_init__(self):
        if not 0.0 < self.lo <= self.hi < 1.0:
            raise ValueError("need 0 < lo <= hi < 1")
        if not 0.0 < self.contour_threshold <= self.lo:
            raise ValueError("contour_threshold must be in (0, lo]")
        if self.dedup_m < 0:
            raise ValueError("dedup_m must be non-negative")


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    out: str = "run"
    features: tuple[str, ...] = ("elevation",)
    tile_cells: int = 128
    line_half_width: float = 0.8
    synth: SynthConfig = field(default_factory=SynthConfig)
    model: ModelSpec = field(default_factory=ModelSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    mosaic: MosaicConfig = field(default_factory=MosaicConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)


def _build(cls, obj: dict, path: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in obj.items():
        if key not in fields:
            raise ConfigError(f"{path}.{key}: unknown field")
        ftype = fields[key].type
        nested = {"synth": SynthConfig, "model": ModelSpec, "train": TrainConfig,
                  "mosaic": MosaicConfig, "filter": FilterConfig,
                  "eval": EvalConfig, "bootstrap": BootstrapConfig}.get(key)
        if nested is not None:
            if not isinstance(value, dict):
                raise ConfigError(f"{path}.{key}: expected an object")
            kwargs[key] = _build(nested, value, f"{path}.{key}")
        elif key == "features":
            bad = [v for v in value if v not in FEATURE_CHOICES]
            if bad or (value and value[0] != "elevation"):
                raise ConfigError(f"{path}.features: must start with 'elevation' "
                                  f"and use only {FEATURE_CHOICES}")
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
        del ftype
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path) -> PipelineConfig:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return _build(PipelineConfig, obj, "config")


def config_to_dict(cfg: PipelineConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_hash(cfg: PipelineConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_manifest(out_dir: Path, cfg: PipelineConfig, command: str) -> None:
    manifest = {
        "command": command,
        "config_sha256": config_hash(cfg),
        "seed": cfg.seed,
        "version": __version__,
        "created_utc": time.time(),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"manifest_{command}.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


# -- region directories -------------------------------------------------------

def write_region(dir_path: Path, world) -> None:
    dir_path.mkdir(parents=True, exist_ok=True)
    write_grid(world.dem, dir_path / "dem.hcr")
    write_polylines(world.rivers, dir_path / "rivers.json")
    write_polylines(world.roads, dir_path / "roads.json")
    write_corrections(world.truths, dir_path / "truths.jsonl")


def load_region_stack(dir_path: Path, features: tuple[str, ...]) -> FeatureStack:
    layers = [read_grid(dir_path / "dem.hcr")]
    names = ["elevation"]
    for name in features[1:]:
        layer_path = dir_path / f"{name}.hcr"
        if not layer_path.exists():
            raise ConfigError(f"{layer_path}: feature raster missing; "
                              f"run the features stage first")
        layers.append(read_grid(layer_path))
        names.append(name)
    return FeatureStack(layers=tuple(layers), names=tuple(names))


def load_region_truths(dir_path: Path) -> list[Correction]:
    return read_corrections(dir_path / "truths.jsonl")


def region_dirs(out_dir: Path, split: str) -> list[Path]:
    base = out_dir / "synth" / split
    if not base.exists():
        return []
    return sorted(d for d in base.iterdir() if d.is_dir())


# -- stages --------------------------------------------------------------------

def stage_synth(cfg: PipelineConfig, out_dir: Path) -> dict:
    s = cfg.synth
    counts = {}
    for split, n, size, rivers, roads in (
            ("train", s.train_regions, s.region_size, s.rivers, s.roads),
            ("val", s.val_regions, s.region_size, s.rivers, s.roads),
            ("eval", 1, s.eval_size, s.eval_rivers, s.eval_roads)):
        total = 0
        for i in range(n):
            params = SynthParams(
                size=size, cell_size=s.cell_size, n_rivers=rivers,
                n_roads=roads, embankment_height=s.embankment_height,
                valley_depth=s.valley_depth, culvert_prob=s.culvert_prob,
                noise_amplitude=s.noise_amplitude, hill_count=s.hill_count,
                seed=derive_seed(cfg.seed, split, i))
            world = synth_terrain(params)
            write_region(out_dir / "synth" / split / f"region{i:03d}", world)
            total += len(world.truths)
        counts[split] = total
    write_manifest(out_dir, cfg, "synth")
    return counts


def stage_features(cfg: PipelineConfig, out_dir: Path) -> int:
    wanted = set(cfg.features[1:])
    done = 0
    for split in ("train", "val", "eval"):
        for rdir in region_dirs(out_dir, split):
            dem = read_grid(rdir / "dem.hcr")
            if "flow" in wanted:
                write_grid(flow_accumulation(dem), rdir / "flow.hcr")
            if "fill" in wanted:
                write_grid(fill_depth(dem), rdir / "fill.hcr")
            if "vectors" in wanted:
                lines = read_polylines(rdir / "rivers.json") + \
                    read_polylines(rdir / "roads.json")
                write_grid(rasterize_polylines(lines, dem, 2.0 * dem.cell_size),
                           rdir / "vectors.hcr")
            done += 1
    write_manifest(out_dir, cfg, "features")
    return done


def _split_tiles(cfg: PipelineConfig, out_dir: Path, split: str,
                 extra_truths: dict[str, list] | None = None):
    tiles = []
    for rdir in region_dirs(out_dir, split):
        stack = load_region_stack(rdir, cfg.features)
        truths = load_region_truths(rdir)
        if extra_truths:
            truths = truths + extra_truths.get(f"{split}/{rdir.name}", [])
        if not truths:
            continue
        tiles.extend(build_dataset(
            stack, truths, cfg.tile_cells,
            seed=derive_seed(cfg.seed, split, rdir.name),
            line_half_width=cfg.line_half_width))
    return tiles


def stage_train(cfg: PipelineConfig, out_dir: Path,
                bootstrap_file: Path | None = None,
                progress=None) -> dict:
    # bootstrap entries name regions as "split/regionNNN"
    extras: dict[str, list] = {}
    extra_truths: dict[str, list] = {}
    if bootstrap_file is not None:
        payload = json.loads(Path(bootstrap_file).read_text())
        for entry in payload.get("negatives", []):
            extras.setdefault(entry["region"], []).append(
                (tuple(entry["point"]), entry.get("provenance", "bootstrapped")))
        for entry in payload.get("extra_truths", []):
            corr = Correction(id=entry["id"], kind="horseshoe",
                              p0=tuple(entry["p0"]), p1=tuple(entry["p1"]),
                              width=float(entry["width"]))
            extra_truths.setdefault(entry["region"], []).append(corr)

    train_tiles = _split_tiles(cfg, out_dir, "train", extra_truths)
    for region, entries in sorted(extras.items()):
        rdir = out_dir / "synth" / region
        stack = load_region_stack(rdir, cfg.features)
        region_truths = load_region_truths(rdir) + extra_truths.get(region, [])
        accepted = extra_truths.get(region, []) if not region.startswith("train/") else []
        train_tiles.extend(build_dataset(
            stack, accepted, cfg.tile_cells, extra_centers=entries,
            seed=derive_seed(cfg.seed, "extras", region),
            line_half_width=cfg.line_half_width, label_truths=region_truths))
    val_tiles = _split_tiles(cfg, out_dir, "val")
    if not train_tiles or not val_tiles:
        raise ConfigError("no training or validation tiles; run synth first")

    spec = dataclasses.replace(cfg.model, in_features=len(cfg.features))
    params, history, state = train(train_tiles, val_tiles, spec, cfg.train,
                                   progress=progress, with_state=True)
    save_checkpoint(out_dir / "model.hcm", params, spec, cfg.train.gamma)
    save_adam_state(out_dir / "model.adam.hcm", state, spec, cfg.train.gamma)

    preds = []
    for i in range(0, len(val_tiles), 32):
        chunk = val_tiles[i:i + 32]
        logits, _ = forward_batch(params, spec,
                                  np.stack([t.features for t in chunk]))
        preds.extend(sigmoid(logits[j, :, :, 0]) for j in range(len(chunk)))
    auc = tile_auc(preds, [t.label for t in val_tiles])

    report = {"epochs": history, "val_tile_auc": auc,
              "train_tiles": len(train_tiles), "val_tiles": len(val_tiles)}
    with open(out_dir / "train_report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    write_manifest(out_dir, cfg, "train")
    return report


def predict_on_region(cfg: PipelineConfig, rdir: Path, params, spec) -> Grid:
    stack = load_region_stack(rdir, cfg.features)
    down = FeatureStack(
        layers=tuple(downsample_2x(g) for g in stack.layers),
        names=stack.names)
    return predict_region(params, spec, down, cfg.mosaic)


def stage_predict(cfg: PipelineConfig, out_dir: Path,
                  region: str = "eval/region000") -> Path:
    params, spec, _ = load_checkpoint(out_dir / "model.hcm")
    rdir = out_dir / "synth" / region
    prob = predict_on_region(cfg, rdir, params, spec)
    dest = out_dir / "predict" / region
    dest.mkdir(parents=True, exist_ok=True)
    write_grid(prob, dest / "p.hcr")
    write_grid(downsample_2x(read_grid(rdir / "dem.hcr")), dest / "dem.hcr")
    write_manifest(out_dir, cfg, "predict")
    return dest / "p.hcr"


def stage_extract(cfg: PipelineConfig, out_dir: Path,
                  region: str = "eval/region000",
                  contour_threshold: float | None = None) -> Path:
    pdir = out_dir / "predict" / region
    prob = read_grid(pdir / "p.hcr")
    dem = read_grid(pdir / "dem.hcr")
    fcfg = cfg.filter
    if contour_threshold is not None:
        fcfg = dataclasses.replace(fcfg, contour_threshold=contour_threshold)
    cands = extract_candidates(prob, dem, fcfg, seed=cfg.seed)
    dest = out_dir / "extract" / region
    dest.mkdir(parents=True, exist_ok=True)
    write_candidates(cands, dest / "candidates.jsonl")
    write_manifest(out_dir, cfg, "extract")
    return dest / "candidates.jsonl"


def stage_eval(cfg: PipelineConfig, out_dir: Path,
               region: str = "eval/region000") -> dict:
    cands = read_candidates(out_dir / "extract" / region / "candidates.jsonl")
    truths = load_region_truths(out_dir / "synth" / region)
    proposals = [c for c in cands if c.status == "proposed"]
    curve = pr_curve(proposals, truths, cfg.eval.match_radius_m)
    report = report_to_json(curve)
    dest = out_dir / "eval" / region
    dest.mkdir(parents=True, exist_ok=True)
    with open(dest / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    write_manifest(out_dir, cfg, "eval")
    return report


def stage_bootstrap(cfg: PipelineConfig, out_dir: Path,
                    verdict_log: Path | None = None,
                    candidates_path: Path | None = None,
                    region_for_verdicts: str = "eval/region000") -> Path:
    """Collect negative tile centers (and reviewed truths) for retraining.

    Runs prediction + extraction at the bootstrap contour threshold over
    every training region, keeps false positives whose median probability
    falls in the configured range, and folds in reviewer verdicts when a
    log is present.
    """
    params, spec, _ = load_checkpoint(out_dir / "model.hcm")
    bcfg = cfg.bootstrap
    fcfg = dataclasses.replace(cfg.filter, contour_threshold=bcfg.contour_threshold)

    negatives = []
    for rdir in region_dirs(out_dir, "train"):
        prob = predict_on_region(cfg, rdir, params, spec)
        dem = downsample_2x(read_grid(rdir / "dem.hcr"))
        cands = extract_candidates(prob, dem, fcfg, seed=cfg.seed)
        proposals = [c for c in cands if c.status == "proposed"]
        truths = load_region_truths(rdir)
        match = match_detections(proposals, truths, cfg.eval.match_radius_m)
        for pt in bootstrap_sample(proposals, prob, match, (bcfg.lo, bcfg.hi)):
            negatives.append({"region": f"train/{rdir.name}",
                              "point": [pt[0], pt[1]],
                              "provenance": "bootstrapped"})

    extra_truths = []
    if verdict_log is not None and Path(verdict_log).exists():
        verdicts = read_verdicts(verdict_log)
        cands = read_candidates(candidates_path) if candidates_path else []
        neg_pts, accepted = export_bootstrap(verdicts, cands,
                                             match=None, dedup_m=bcfg.dedup_m)
        for pt in neg_pts:
            negatives.append({"region": region_for_verdicts,
                              "point": [pt[0], pt[1]],
                              "provenance": "verdict-negative"})
        for corr in accepted:
            extra_truths.append({"region": region_for_verdicts,
                                 "id": corr.id, "p0": list(corr.p0),
                                 "p1": list(corr.p1), "width": corr.width})

    payload = {"negatives": negatives, "extra_truths": extra_truths}
    dest = out_dir / "bootstrap.json"
    with open(dest, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    write_manifest(out_dir, cfg, "bootstrap")
    return dest
