"""SGD training with momentum and step learning-rate decay."""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import TrainingDivergedError, ValidationError
from .nn import Network, _check_labels

__all__ = [
    "TrainConfig",
    "EpochRecord",
    "SgdState",
    "learning_rate_at",
    "train",
    "GridSearchResult",
    "grid_search_dropout",
]


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    momentum: float = 0.9
    lr_decay_factor: float = 0.1
    lr_decay_every_epochs: int = 5
    batch_size: int = 64
    max_epochs: int = 25
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValidationError("momentum must be in [0, 1)")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be at least 1")
        if self.lr_decay_every_epochs < 1:
            raise ValidationError("lr_decay_every_epochs must be at least 1")
        if self.max_epochs < 0:
            raise ValidationError("max_epochs must be non-negative")

    def to_dict(self):
        return {
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "lr_decay_factor": self.lr_decay_factor,
            "lr_decay_every_epochs": self.lr_decay_every_epochs,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    learning_rate: float
    loss: float
    accuracy: float

    def to_dict(self):
        return {
            "epoch": self.epoch,
            "learning_rate": self.learning_rate,
            "loss": self.loss,
            "accuracy": self.accuracy,
        }


@dataclass
class SgdState:
    """Momentum buffers, one per weight/bias tensor."""

    vw: list = field(default_factory=list)
    vb: list = field(default_factory=list)

    @classmethod
    def zeros(cls, net: Network):
        return cls(
            vw=[np.zeros_like(w) for w in net.weights],
            vb=[np.zeros_like(b) for b in net.biases],
        )


def learning_rate_at(cfg: TrainConfig, epoch: int) -> float:
    """Step schedule: decays after each block of lr_decay_every_epochs epochs."""
    return cfg.learning_rate * cfg.lr_decay_factor ** (
        epoch // cfg.lr_decay_every_epochs
    )


def train(net: Network, X, y, cfg: TrainConfig, state: SgdState = None,
          rng: np.random.Generator = None):
    """Train ``net`` in place; returns (net, trace, state).

    The trace holds one EpochRecord per completed epoch with the
    deterministic full-set loss and accuracy.  A fixed cfg.seed reproduces
    the trajectory bit for bit.  Incomplete trailing mini-batches are used.
    """
    X = np.asarray(X, dtype=np.float64)
    y = _check_labels(y, net.config.num_classes)
    if X.shape[0] == 0:
        raise ValidationError("cannot train on an empty dataset")
    if X.shape[0] != len(y):
        raise ValidationError("data and labels differ in length")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if state is None:
        state = SgdState.zeros(net)

    n = X.shape[0]
    momentum = cfg.momentum
    trace = []
    for epoch in range(cfg.max_epochs):
        lr = learning_rate_at(cfg, epoch)
        perm = rng.permutation(n)
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[start:start + cfg.batch_size]
            masks = net.draw_masks(rng, len(idx))
            try:
                net.forward_batch(X[idx], mode="stochastic", masks=masks,
                                  record=True)
                w_grads, b_grads = net.backward(y[idx])
            except ValidationError as exc:
                raise TrainingDivergedError(
                    f"training diverged at epoch {epoch}, batch {bi}: {exc}",
                    epoch=epoch, batch=bi,
                ) from exc
            for i in range(len(net.weights)):
                state.vw[i] = momentum * state.vw[i] - lr * w_grads[i]
                state.vb[i] = momentum * state.vb[i] - lr * b_grads[i]
                net.weights[i] += state.vw[i]
                net.biases[i] += state.vb[i]
        epoch_loss = net.loss(X, y)
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(
                f"training diverged: non-finite loss {epoch_loss} after epoch "
                f"{epoch}", epoch=epoch,
            )
        trace.append(EpochRecord(epoch, lr, epoch_loss, net.accuracy(X, y)))
    return net, trace, state


@dataclass
class GridSearchResult:
    alphas: list
    betas: list
    accuracy: np.ndarray  # (len(alphas), len(betas)) mean CV accuracy
    best_alpha: float
    best_beta: float
    best_accuracy: float

    def to_dict(self):
        return {
            "alphas": list(self.alphas),
            "betas": list(self.betas),
            "accuracy": self.accuracy.tolist(),
            "best_alpha": self.best_alpha,
            "best_beta": self.best_beta,
            "best_accuracy": self.best_accuracy,
        }


def _fold_seed(seed, fold):
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def grid_search_dropout(X, y, base_config, train_cfg, alphas, betas, folds,
                        seed=0):
    """Cross-validated accuracy over a dropout-rate grid.

    Each (alpha, beta) pair is scored by k-fold CV with folds and per-fold
    seeds shared across pairs, so identical pairs score identically.  The
    best pair is the argmax; ties go to the lexicographically smaller
    (alpha, beta).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if folds < 2:
        raise ValidationError("folds must be at least 2")
    if X.shape[0] < folds:
        raise ValidationError(
            f"dataset of {X.shape[0]} samples cannot be split into {folds} folds"
        )
    for rates, name in ((alphas, "alphas"), (betas, "betas")):
        for r in rates:
            if not 0.0 <= r < 1.0:
                raise ValidationError(f"{name} entries must be in [0, 1), got {r}")

    n = X.shape[0]
    perm = np.random.default_rng(seed).permutation(n)
    fold_indices = [perm[f::folds] for f in range(folds)]

    accuracy = np.zeros((len(alphas), len(betas)))
    for ai, a in enumerate(alphas):
        for bi, b in enumerate(betas):
            fold_accs = []
            for f in range(folds):
                val_idx = fold_indices[f]
                train_idx = np.concatenate(
                    [fold_indices[g] for g in range(folds) if g != f]
                )
                fold_seed = _fold_seed(seed, f)
                net = Network(replace(base_config, alpha=a, beta=b,
                                      seed=fold_seed))
                train(net, X[train_idx], y[train_idx],
                      replace(train_cfg, seed=fold_seed))
                fold_accs.append(net.accuracy(X[val_idx], y[val_idx]))
            accuracy[ai, bi] = float(np.mean(fold_accs))

    best = max(
        ((accuracy[ai, bi], -a, -b, a, b)
         for ai, a in enumerate(alphas) for bi, b in enumerate(betas)),
        key=lambda t: (t[0], t[1], t[2]),
    )
    return GridSearchResult(
        alphas=list(alphas), betas=list(betas), accuracy=accuracy,
        best_alpha=best[3], best_beta=best[4], best_accuracy=float(best[0]),
    )
