import numpy as np
import pytest

from mcdrop import (Network, NetworkConfig, TrainConfig,
                    TrainingDivergedError, ValidationError,
                    grid_search_dropout, learning_rate_at, train)

from conftest import desk_train_cfg, tiny_net


def lda_accuracy(X, y):
    """Closed-form linear discriminant; no gradient descent involved."""
    mu0, mu1 = X[y == 0].mean(axis=0), X[y == 1].mean(axis=0)
    pooled = np.cov(X[y == 0].T) * (np.sum(y == 0) - 1)
    pooled += np.cov(X[y == 1].T) * (np.sum(y == 1) - 1)
    pooled /= len(y) - 2
    w = np.linalg.solve(pooled, mu1 - mu0)
    threshold = w @ (mu0 + mu1) / 2
    return float(np.mean((X @ w > threshold).astype(int) == y))


class TestLearningRateSchedule:
    def test_step_decay_blocks(self):
        cfg = TrainConfig(learning_rate=0.001, lr_decay_factor=0.1,
                          lr_decay_every_epochs=5)
        rates = [learning_rate_at(cfg, e) for e in range(12)]
        assert rates[:5] == [0.001] * 5
        assert rates[5:10] == pytest.approx([0.0001] * 5)
        assert rates[10] == pytest.approx(1e-5)

    def test_trace_records_the_schedule(self, blobs):
        net = tiny_net(input_dim=2, hidden=((4, "relu"),))
        cfg = TrainConfig(max_epochs=7, lr_decay_every_epochs=3, seed=0)
        _, trace, _ = train(net, blobs.X, blobs.y, cfg)
        assert [r.learning_rate for r in trace] == [
            learning_rate_at(cfg, e) for e in range(7)
        ]


class TestTrain:
    def test_separable_blobs_reach_high_accuracy(self, blobs):
        # the closed-form discriminant confirms separability first
        assert lda_accuracy(blobs.X, blobs.y) >= 0.99
        net = tiny_net(input_dim=2, hidden=((8, "relu"),), seed=1)
        _, trace, _ = train(net, blobs.X, blobs.y,
                            desk_train_cfg(max_epochs=25, seed=1))
        assert trace[-1].accuracy >= 0.99
        assert len(trace) == 25

    def test_zero_epochs_leave_network_at_initialisation(self, blobs):
        net = tiny_net(input_dim=2, hidden=((6, "relu"),), seed=4)
        before = [w.copy() for w in net.weights]
        _, trace, _ = train(net, blobs.X, blobs.y,
                            TrainConfig(max_epochs=0, seed=0))
        assert trace == []
        for w, orig in zip(net.weights, before):
            assert np.array_equal(w, orig)

    def test_same_seed_gives_bit_identical_weights(self, blobs):
        results = []
        for _ in range(2):
            net = tiny_net(input_dim=2, hidden=((8, "relu"),), alpha=0.3,
                           beta=0.2, seed=2)
            _, trace, _ = train(net, blobs.X, blobs.y,
                                desk_train_cfg(max_epochs=5, seed=9))
            results.append((net, trace))
        for w1, w2 in zip(results[0][0].weights, results[1][0].weights):
            assert np.array_equal(w1, w2)
        assert [r.loss for r in results[0][1]] == [r.loss for r in results[1][1]]

    def test_divergence_aborts_with_diagnostic(self, blobs):
        net = tiny_net(input_dim=2, hidden=((8, "relu"),), seed=0)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(TrainingDivergedError):
                train(net, blobs.X, blobs.y,
                      TrainConfig(learning_rate=1e12, max_epochs=5, seed=0))

    def test_empty_dataset_rejected(self):
        net = tiny_net(input_dim=2)
        with pytest.raises(ValidationError):
            train(net, np.zeros((0, 2)), np.array([], dtype=int),
                  TrainConfig(max_epochs=1))


class TestGridSearch:
    def base(self, blobs):
        return NetworkConfig(input_dim=2, num_classes=2,
                             hidden_layers=[(8, "relu")], seed=0)

    def test_degenerate_grid_equals_plain_cv_accuracy(self, blobs):
        result = grid_search_dropout(
            blobs.X, blobs.y, self.base(blobs),
            desk_train_cfg(max_epochs=15, seed=0),
            alphas=[0.0], betas=[0.0], folds=2,
        )
        assert result.accuracy.shape == (1, 1)
        assert result.accuracy[0, 0] >= 0.99
        assert (result.best_alpha, result.best_beta) == (0.0, 0.0)

    def test_identical_pairs_score_identically(self, blobs):
        result = grid_search_dropout(
            blobs.X, blobs.y, self.base(blobs),
            desk_train_cfg(max_epochs=5, seed=0),
            alphas=[0.3, 0.3], betas=[0.2], folds=2,
        )
        assert result.accuracy[0, 0] == result.accuracy[1, 0]

    def test_ties_break_to_smaller_pair(self, blobs):
        # blobs are easy enough that every pair reaches the same accuracy
        result = grid_search_dropout(
            blobs.X, blobs.y, self.base(blobs),
            desk_train_cfg(max_epochs=12, seed=0),
            alphas=[0.3, 0.1], betas=[0.2, 0.0], folds=2,
        )
        ties = np.flatnonzero(result.accuracy == result.best_accuracy)
        if len(ties) > 1:
            pairs = sorted(
                (a, b)
                for ai, a in enumerate(result.alphas)
                for bi, b in enumerate(result.betas)
                if result.accuracy[ai, bi] == result.best_accuracy
            )
            assert (result.best_alpha, result.best_beta) == pairs[0]

    def test_too_many_folds_rejected(self, blobs):
        with pytest.raises(ValidationError):
            grid_search_dropout(blobs.X[:3], blobs.y[:3], self.base(blobs),
                                TrainConfig(max_epochs=1), alphas=[0.0],
                                betas=[0.0], folds=5)

    def test_single_fold_rejected(self, blobs):
        with pytest.raises(ValidationError):
            grid_search_dropout(blobs.X, blobs.y, self.base(blobs),
                                TrainConfig(max_epochs=1), alphas=[0.0],
                                betas=[0.0], folds=1)
