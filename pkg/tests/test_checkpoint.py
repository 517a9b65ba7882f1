import json

import numpy as np
import pytest

from mcdrop import (CheckpointFormatError, TrainConfig, load_checkpoint,
                    save_checkpoint, train)

from conftest import tiny_net


def test_round_trip_reproduces_forward_bitwise(tmp_path, blobs):
    net = tiny_net(input_dim=2, hidden=((8, "relu"),), alpha=0.3, beta=0.2,
                   seed=1)
    train(net, blobs.X, blobs.y, TrainConfig(max_epochs=3, seed=1))
    x = blobs.X[0]
    before_det = net.forward(x)
    before_sto = net.forward(x, mode="stochastic", pass_seed=42)

    path = save_checkpoint(tmp_path / "ckpt.json", net)
    loaded = load_checkpoint(path).network

    assert np.array_equal(loaded.forward(x), before_det)
    assert np.array_equal(loaded.forward(x, mode="stochastic", pass_seed=42),
                          before_sto)


def test_optimizer_and_rng_state_round_trip(tmp_path, blobs):
    net = tiny_net(input_dim=2, hidden=((6, "relu"),), seed=2)
    rng = np.random.default_rng(5)
    _, _, state = train(net, blobs.X, blobs.y,
                        TrainConfig(max_epochs=2, seed=5), rng=rng)

    path = save_checkpoint(tmp_path / "ckpt.json", net, state, rng)
    ckpt = load_checkpoint(path)

    for v1, v2 in zip(state.vw, ckpt.optimizer_state.vw):
        assert np.array_equal(v1, v2)
    restored = ckpt.make_rng()
    assert np.array_equal(rng.random(8), restored.random(8))


def test_unknown_format_version_rejected(tmp_path):
    net = tiny_net()
    path = save_checkpoint(tmp_path / "ckpt.json", net)
    doc = json.loads(path.read_text())
    doc["format_version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)


def test_missing_version_rejected(tmp_path):
    path = tmp_path / "ckpt.json"
    path.write_text("{}")
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)
