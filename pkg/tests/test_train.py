import numpy as np
import pytest

from hydrofix.features import FeatureStack
from hydrofix.labels import Correction, build_dataset
from hydrofix.net import (DivergenceError, ModelSpec, TrainConfig,
                          init_params, load_checkpoint, save_checkpoint, train)
from hydrofix.net.checkpoint import (CheckpointError, load_adam_state,
                                     save_adam_state)
from hydrofix.net.adam import AdamState

from conftest import random_grid


def tiny_dataset(rng, n=6, region_size=48, tile_cells=16):
    region = FeatureStack(layers=(random_grid(rng, region_size, region_size),),
                          names=("elevation",))
    truths = []
    for i in range(n):
        x = 8.0 + (i * 5) % 30
        y = 8.0 + (i * 7) % 30
        truths.append(Correction(f"t{i}", "horseshoe", p0=(x, y),
                                 p1=(x + 4.0, y), width=2.0))
    return build_dataset(region, truths, tile_cells=tile_cells)


def test_zero_epochs_returns_initial_params(rng_np):
    tiles = tiny_dataset(rng_np)
    spec = ModelSpec(depth=1, base_channels=2, in_features=1)
    cfg = TrainConfig(epochs=0, batch_size=2, seed=9)
    params, history = train(tiles[:4], tiles[4:], spec, cfg)
    assert history == []
    want = init_params(spec, seed=9)
    for name in want:
        assert np.array_equal(params[name], want[name])


def test_fixed_seed_reproduces_history(rng_np):
    tiles = tiny_dataset(rng_np)
    spec = ModelSpec(depth=1, base_channels=2, in_features=1)
    cfg = TrainConfig(epochs=3, batch_size=2, seed=4, learning_rate=1e-3)
    params_a, hist_a = train(tiles[:4], tiles[4:], spec, cfg)
    params_b, hist_b = train(tiles[:4], tiles[4:], spec, cfg)
    assert hist_a == hist_b
    for name in params_a:
        assert np.array_equal(params_a[name], params_b[name])


def test_best_params_track_lowest_validation(rng_np):
    tiles = tiny_dataset(rng_np)
    spec = ModelSpec(depth=1, base_channels=2, in_features=1)
    cfg = TrainConfig(epochs=4, batch_size=2, seed=4, learning_rate=1e-3)
    _, history = train(tiles[:4], tiles[4:], spec, cfg)
    assert len(history) == 4
    assert all(np.isfinite(h["val_loss"]) for h in history)


def test_divergence_raises(rng_np):
    tiles = tiny_dataset(rng_np)
    spec = ModelSpec(depth=1, base_channels=2, in_features=1)
    params = init_params(spec, seed=1)
    params["neck.k"] = params["neck.k"] + np.nan
    cfg = TrainConfig(epochs=1, batch_size=2, seed=1)
    with pytest.raises(DivergenceError):
        train(tiles[:4], tiles[4:], spec, cfg, params=params)


def test_empty_sets_rejected(rng_np):
    spec = ModelSpec(depth=1, base_channels=2, in_features=1)
    with pytest.raises(ValueError):
        train([], [], spec, TrainConfig(epochs=1))


# -- checkpoints -----------------------------------------------------------------

def test_checkpoint_roundtrip_bit_exact(tmp_path):
    spec = ModelSpec(depth=2, base_channels=3, in_features=2)
    params = init_params(spec, seed=31)
    path = tmp_path / "model.hcm"
    save_checkpoint(path, params, spec, gamma=2.0)
    back, back_spec, gamma = load_checkpoint(path)
    assert back_spec == spec
    assert gamma == 2.0
    assert set(back) == set(params)
    for name in params:
        assert back[name].tobytes() == params[name].tobytes()
    save_checkpoint(tmp_path / "again.hcm", back, back_spec, gamma)
    assert (tmp_path / "again.hcm").read_bytes() == path.read_bytes()


def test_adam_state_roundtrip(tmp_path):
    spec = ModelSpec(depth=1, base_channels=2, in_features=1)
    params = init_params(spec, seed=2)
    state = AdamState.initial(params)
    state.t = 17
    state.m["neck.k"] += 0.25
    path = tmp_path / "opt.hcm"
    save_adam_state(path, state, spec, gamma=2.0)
    back = load_adam_state(path)
    assert back.t == 17
    for name in state.m:
        assert back.m[name].tobytes() == state.m[name].astype(np.float32).tobytes()
        assert back.v[name].tobytes() == state.v[name].astype(np.float32).tobytes()


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "junk.hcm"
    path.write_bytes(b"NOPE" + b"\0" * 40)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_truncated(tmp_path):
    spec = ModelSpec(depth=1, base_channels=2, in_features=1)
    params = init_params(spec, seed=2)
    path = tmp_path / "model.hcm"
    save_checkpoint(path, params, spec, gamma=1.0)
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
