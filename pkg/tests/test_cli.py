import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from hydrofix.cli import main
from hydrofix.pipeline import ConfigError, load_config
from hydrofix.extract import write_candidates, Candidate
from hydrofix.labels import read_corrections
from hydrofix.raster import read_grid


def write_cfg(tmp_path, **overrides):
    cfg = {
        "seed": 77,
        "out": str(tmp_path / "run"),
        "features": ["elevation"],
        "tile_cells": 64,
        "synth": {"train_regions": 2, "val_regions": 1, "region_size": 128,
                  "eval_size": 128, "eval_rivers": 1, "eval_roads": 1,
                  "rivers": 1, "roads": 1},
        "model": {"depth": 2, "base_channels": 2},
        "train": {"epochs": 1, "batch_size": 2},
        "mosaic": {"stride": 16},
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_unknown_config_field_reports_path(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"seed": 1, "bogus": 2}))
    assert main(["synth", "--config", str(path)]) == 2
    err = capsys.readouterr().err
    assert "config.bogus" in err


def test_nested_config_error_reports_path(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"synth": {"culvert_prob": 2.0}}))
    assert main(["synth", "--config", str(path)]) == 2
    assert "config.synth" in capsys.readouterr().err


def test_invalid_json_reported(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text("{nope")
    assert main(["synth", "--config", str(path)]) == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_features_config_must_start_with_elevation(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"features": ["flow"]}))
    assert main(["synth", "--config", str(path)]) == 2
    assert "config.features" in capsys.readouterr().err


def test_missing_model_fails_with_nonzero_exit(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["predict", "--config", str(cfg), "--quiet"]) == 1


def test_synth_writes_regions_and_manifest(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["synth", "--config", str(cfg), "--quiet"]) == 0
    out = tmp_path / "run"
    assert (out / "synth/train/region000/dem.hcr").exists()
    assert (out / "synth/train/region001/truths.jsonl").exists()
    assert (out / "synth/val/region000/rivers.json").exists()
    assert (out / "synth/eval/region000/dem.hcr").exists()
    manifest = json.loads((out / "manifest_synth.json").read_text())
    assert manifest["seed"] == 77
    assert len(manifest["config_sha256"]) == 64


def test_synth_rerun_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["synth", "--config", str(cfg), "--quiet"]) == 0
    dem_path = tmp_path / "run/synth/train/region000/dem.hcr"
    first = dem_path.read_bytes()
    truths_first = (tmp_path / "run/synth/train/region000/truths.jsonl").read_bytes()
    assert main(["synth", "--config", str(cfg), "--quiet"]) == 0
    assert dem_path.read_bytes() == first
    assert (tmp_path / "run/synth/train/region000/truths.jsonl").read_bytes() == truths_first


def test_full_tiny_chain(tmp_path):
    cfg = write_cfg(tmp_path)
    for cmd in ("synth", "features", "train", "predict", "extract", "eval"):
        assert main([cmd, "--config", str(cfg), "--quiet"]) == 0, cmd
    out = tmp_path / "run"
    assert (out / "model.hcm").exists()
    report = json.loads((out / "train_report.json").read_text())
    assert len(report["epochs"]) == 1
    assert report["train_tiles"] > 0
    p = read_grid(out / "predict/eval/region000/p.hcr")
    assert (p.values >= 0).all() and (p.values <= 1).all()
    eval_report = json.loads((out / "eval/eval/region000/report.json").read_text())
    assert set(eval_report) >= {"max_recall", "mP", "curve", "tp", "fp", "fn"}


def test_train_rerun_is_deterministic(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["synth", "--config", str(cfg), "--quiet"]) == 0
    assert main(["train", "--config", str(cfg), "--quiet"]) == 0
    first = (tmp_path / "run/model.hcm").read_bytes()
    assert main(["train", "--config", str(cfg), "--quiet"]) == 0
    assert (tmp_path / "run/model.hcm").read_bytes() == first


def test_eval_self_match_is_perfect(tmp_path):
    cfg_path = write_cfg(tmp_path)
    assert main(["synth", "--config", str(cfg_path), "--quiet"]) == 0
    out = tmp_path / "run"
    truths = read_corrections(out / "synth/eval/region000/truths.jsonl")
    assert truths
    cands = []
    for i, t in enumerate(truths):
        cx, cy = t.centroid()
        ring = [(cx - 2, cy - 2), (cx + 2, cy - 2), (cx + 2, cy + 2), (cx - 2, cy + 2)]
        cands.append(Candidate(id=f"p{i}", polygon=ring, area_m2=16.0,
                               elev_var=1.0, median_p=0.9))
    dest = out / "extract/eval/region000"
    dest.mkdir(parents=True)
    write_candidates(cands, dest / "candidates.jsonl")
    assert main(["eval", "--config", str(cfg_path), "--quiet"]) == 0
    report = json.loads((out / "eval/eval/region000/report.json").read_text())
    assert report["max_recall"] == 1.0
    assert all(pt["precision"] == 1.0 for pt in report["curve"])
    assert report["fp"] == 0 and report["fn"] == 0


def test_seed_override_changes_world(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["synth", "--config", str(cfg), "--quiet"]) == 0
    base = (tmp_path / "run/synth/train/region000/dem.hcr").read_bytes()
    assert main(["synth", "--config", str(cfg), "--seed", "123", "--quiet"]) == 0
    assert (tmp_path / "run/synth/train/region000/dem.hcr").read_bytes() != base


def test_out_override(tmp_path):
    cfg = write_cfg(tmp_path)
    other = tmp_path / "elsewhere"
    assert main(["synth", "--config", str(cfg), "--out", str(other), "--quiet"]) == 0
    assert (other / "synth/train/region000/dem.hcr").exists()


def test_load_config_rejects_bad_nested_type(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": "tiny"}))
    with pytest.raises(ConfigError):
        load_config(path)


def test_train_writes_optimizer_sibling(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["synth", "--config", str(cfg), "--quiet"]) == 0
    assert main(["train", "--config", str(cfg), "--quiet"]) == 0
    from hydrofix.net.checkpoint import load_adam_state
    state = load_adam_state(tmp_path / "run/model.adam.hcm")
    assert state.t > 0
    assert any(k.endswith("neck.k") for k in state.m)


def test_synth_truth_count_matches_analytic_crossings(tmp_path):
    from hydrofix.features import read_polylines
    from hydrofix.synth import crossings
    cfg = write_cfg(tmp_path)
    assert main(["synth", "--config", str(cfg), "--quiet"]) == 0
    rdir = tmp_path / "run/synth/eval/region000"
    rivers = read_polylines(rdir / "rivers.json")
    roads = read_polylines(rdir / "roads.json")
    truths = read_corrections(rdir / "truths.jsonl")
    # fixture uses culvert probability 1: one truth per deduplicated crossing
    assert len(truths) == len(crossings(rivers, roads, min_separation=10.0))
    assert len(truths) > 0
