import numpy as np
import pytest

from mcdrop import Dataset, Network, NetworkConfig, TrainConfig, train
from mcdrop.data import generate_synthetic


def tiny_net(input_dim=3, num_classes=2, hidden=((5, "relu"),), alpha=0.0,
             beta=0.0, l2=0.0, seed=0):
    cfg = NetworkConfig(
        input_dim=input_dim, num_classes=num_classes,
        hidden_layers=list(hidden), alpha=alpha, beta=beta,
        l2_lambda=l2, seed=seed,
    )
    return Network(cfg)


def desk_train_cfg(**overrides):
    """Trainer settings that converge from scratch on tiny datasets.

    The library defaults mirror a fine-tuning protocol (lr 0.001); training a
    fresh network on a few hundred points needs a larger step.
    """
    base = dict(learning_rate=0.05, momentum=0.9, lr_decay_factor=0.1,
                lr_decay_every_epochs=10, batch_size=64, max_epochs=25,
                seed=0)
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="session")
def blobs():
    """Linearly separable two-class blobs (far-apart means)."""
    return generate_synthetic(200, 2, bayes_error=1e-4, seed=7, name="blobs")


@pytest.fixture(scope="session")
def overlap_benchmark():
    """Overlapping Gaussians with a 10% optimal error rate."""
    return generate_synthetic(1200, 2, bayes_error=0.10, seed=11,
                              name="overlap")


@pytest.fixture(scope="session")
def trained_dropout_net(overlap_benchmark):
    """A dropout-equipped model fitted on the overlap benchmark."""
    ds = overlap_benchmark
    net = Network(NetworkConfig(
        input_dim=ds.input_dim, num_classes=2,
        hidden_layers=[(16, "relu")], alpha=0.2, beta=0.2,
        l2_lambda=1e-4, seed=3,
    ))
    train(net, ds.X, ds.y, desk_train_cfg(max_epochs=20, seed=3))
    return net


def split_xy(dataset: Dataset, n_train):
    return (dataset.X[:n_train], dataset.y[:n_train],
            dataset.X[n_train:], dataset.y[n_train:])
