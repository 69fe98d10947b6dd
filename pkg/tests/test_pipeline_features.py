import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from hydrofix import pipeline
from hydrofix.net import load_checkpoint
from hydrofix.raster import read_grid


@pytest.fixture(scope="module")
def multifeature_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("mf")
    cfg = pipeline.PipelineConfig(
        seed=31,
        out=str(out),
        features=("elevation", "flow", "fill", "vectors"),
        tile_cells=64,
        synth=pipeline.SynthConfig(train_regions=2, val_regions=1,
                                   region_size=128, eval_size=128,
                                   eval_rivers=1, eval_roads=1,
                                   rivers=1, roads=1),
        model=dataclasses.replace(pipeline.PipelineConfig().model,
                                  depth=2, base_channels=2),
        train=dataclasses.replace(pipeline.PipelineConfig().train,
                                  epochs=1, batch_size=2),
        mosaic=dataclasses.replace(pipeline.PipelineConfig().mosaic, stride=16),
    )
    pipeline.stage_synth(cfg, out)
    pipeline.stage_features(cfg, out)
    return cfg, out


def test_feature_rasters_written(multifeature_run):
    cfg, out = multifeature_run
    rdir = out / "synth/train/region000"
    for name in ("flow", "fill", "vectors"):
        g = read_grid(rdir / f"{name}.hcr")
        assert (g.width, g.height) == (128, 128)
    vectors = read_grid(rdir / "vectors.hcr")
    assert set(np.unique(vectors.values)).issubset({0.0, 1.0})
    assert vectors.values.sum() > 0
    fill = read_grid(rdir / "fill.hcr")
    assert (fill.values >= 0).all()


def test_missing_feature_raster_is_reported(multifeature_run, tmp_path):
    cfg, out = multifeature_run
    rdir = out / "synth/train/region000"
    (rdir / "flow.hcr").rename(tmp_path / "flow.hcr")
    try:
        with pytest.raises(pipeline.ConfigError):
            pipeline.load_region_stack(rdir, cfg.features)
    finally:
        (tmp_path / "flow.hcr").rename(rdir / "flow.hcr")


def test_multifeature_train_predict(multifeature_run):
    cfg, out = multifeature_run
    pipeline.stage_train(cfg, out)
    params, spec, _ = load_checkpoint(out / "model.hcm")
    assert spec.in_features == 4
    assert "enc3.stem.k" in params
    pipeline.stage_predict(cfg, out)
    p = read_grid(out / "predict/eval/region000/p.hcr")
    assert (p.values >= 0).all() and (p.values <= 1).all()
    report = json.loads((out / "train_report.json").read_text())
    assert report["train_tiles"] > 0
