from types import SimpleNamespace

import numpy as np
import pytest

from mcdrop import (ActiveLearner, ALConfig, McConfig, NetworkConfig,
                    OracleError, SimulatedOracle, SplitSpec, TrainConfig,
                    acquire, al_run, compare_strategies, generate_synthetic,
                    labels_to_target, split)
from mcdrop.active import resume


def stub(sample_id, sigma, mu=None):
    return SimpleNamespace(
        sample_id=sample_id, scalar_uncertainty=sigma,
        mu=np.asarray(mu if mu is not None else [1 - sigma, sigma]),
    )


def benchmark_splits(seed=0, n=320):
    ds = generate_synthetic(n, 2, bayes_error=0.1, seed=seed)
    return split(ds, SplitSpec(train=0.0, val=0.2, test=0.3, pool=0.5,
                               seed=seed))


def al_cfg(pool_ds, **overrides):
    base = dict(
        network=NetworkConfig(
            input_dim=pool_ds.input_dim, num_classes=2,
            hidden_layers=[(8, "relu")], alpha=0.25, beta=0.25,
            l2_lambda=1e-4, seed=0,
        ),
        tau=0.005,
        initial_labelled_fraction=0.1,
        mc=McConfig(T=12, base_seed=0),
        train=TrainConfig(learning_rate=0.05, lr_decay_every_epochs=10,
                          max_epochs=10, seed=0),
        seed=0,
    )
    base.update(overrides)
    return ALConfig(**base)


class TestAcquire:
    def pool(self):
        return [stub("a", 0.3), stub("b", 0.15), stub("c", 0.05)]

    def cfg(self, **over):
        defaults = dict(
            network=NetworkConfig(input_dim=2, num_classes=2,
                                  hidden_layers=[(4, "relu")]),
            tau=0.1, seed=0,
        )
        defaults.update(over)
        return ALConfig(**defaults)

    def test_variance_ranks_qualifiers_descending(self):
        picked = acquire(self.pool(), self.cfg(tau=0.1), kappa=2)
        assert picked == ["a", "b"]

    def test_tau_floor_filters_candidates(self):
        picked = acquire(self.pool(), self.cfg(tau=0.2), kappa=2)
        assert picked == ["a"]

    def test_random_with_full_budget_returns_shuffled_pool(self):
        cfg = self.cfg(strategy="random", seed=3)
        picked = acquire(self.pool(), cfg, kappa=3)
        assert sorted(picked) == ["a", "b", "c"]
        assert acquire(self.pool(), cfg, kappa=3) == picked

    def test_least_confidence_ranks_by_max_mu(self):
        pool = [stub("a", 0.0, mu=[0.95, 0.05]),
                stub("b", 0.0, mu=[0.55, 0.45]),
                stub("c", 0.0, mu=[0.70, 0.30])]
        cfg = self.cfg(strategy="least_confidence")
        assert acquire(pool, cfg, kappa=2) == ["b", "c"]

    def test_empty_pool_gives_empty_result(self):
        assert acquire([], self.cfg(), kappa=5) == []

    def test_default_budget_is_pool_over_40(self):
        pool = [stub(i, 0.5) for i in range(100)]
        assert len(acquire(pool, self.cfg(tau=0.0))) == 3  # ceil(100/40)


class FailingOracle(SimulatedOracle):
    def __init__(self, source, fail_on):
        super().__init__(source)
        self.fail_on = set(fail_on)

    def label(self, sample_id):
        if int(sample_id) in self.fail_on:
            raise OracleError(f"simulated outage for {sample_id}")
        return super().label(sample_id)


class TestStep:
    def test_step_before_start_is_a_state_error(self):
        from mcdrop import StateError

        s = benchmark_splits()
        learner = ActiveLearner(s.pool, s.val, al_cfg(s.pool, kappa=5))
        with pytest.raises(StateError):
            learner.step()

    def test_step_moves_budgeted_ids_and_records_history(self):
        s = benchmark_splits()
        learner = ActiveLearner(s.pool, s.val, al_cfg(s.pool, kappa=5),
                                test_data=s.test)
        learner.start()
        before_pool = set(learner.state.pool)
        acquired = learner.step()
        assert 0 < len(acquired) <= 5
        assert set(acquired) <= before_pool
        assert set(acquired) <= set(learner.state.labelled)
        assert learner.state.iteration == 1
        assert len(learner.state.history) == 2
        # conservation of the labelled/pool universe
        assert len(learner.state.labelled) + len(learner.state.pool) == \
            learner.state.initial_total

    def test_empty_acquisition_only_bumps_iteration(self):
        s = benchmark_splits()
        cfg = al_cfg(s.pool, tau=10.0, fallback_on_empty=False, kappa=5)
        learner = ActiveLearner(s.pool, s.val, cfg, test_data=s.test)
        learner.start()
        weights_before = [w.copy() for w in learner.net.weights]
        labelled_before = dict(learner.state.labelled)
        acquired = learner.step()
        assert acquired == []
        assert learner.state.iteration == 1
        assert learner.state.labelled == labelled_before
        assert len(learner.state.history) == 1  # no new record
        for w, orig in zip(learner.net.weights, weights_before):
            assert np.array_equal(w, orig)

    def test_fallback_acquires_top_sigma_when_nothing_qualifies(self):
        s = benchmark_splits()
        cfg = al_cfg(s.pool, tau=10.0, fallback_on_empty=True, kappa=5)
        learner = ActiveLearner(s.pool, s.val, cfg, test_data=s.test)
        learner.start()
        assert len(learner.step()) == 5

    def test_oracle_failure_leaves_state_untouched(self):
        s = benchmark_splits()
        cfg = al_cfg(s.pool, kappa=5)
        probe = ActiveLearner(s.pool, s.val, al_cfg(s.pool, kappa=5))
        probe.start()
        will_acquire = set(probe.step())

        oracle = FailingOracle(s.pool, fail_on=[sorted(will_acquire)[0]])
        learner = ActiveLearner(s.pool, s.val, cfg, oracle=oracle)
        learner.start()
        pool_before = set(learner.state.pool)
        labelled_before = dict(learner.state.labelled)
        iteration_before = learner.state.iteration
        with pytest.raises(OracleError):
            learner.step()
        assert learner.state.pool == pool_before
        assert learner.state.labelled == labelled_before
        assert learner.state.iteration == iteration_before

    def test_full_pool_acquisition_exhausts_in_one_step(self):
        s = benchmark_splits(n=160)
        cfg = al_cfg(s.pool, strategy="random",
                     kappa=len(s.pool), target_accuracy=1.0, patience=10)
        result = al_run(s.pool, s.val, cfg, test_data=s.test)
        assert result.stop_reason == "pool_exhausted"
        assert result.history[-1].labelled_fraction == 1.0
        assert len(result.history) == 2  # initial record plus one step

    def test_acquired_samples_sit_near_the_boundary(self):
        # a well-fitted model concentrates uncertainty at the class
        # boundary, so acquisitions should sit closer to it than the pool;
        # an undertrained one does not, hence the generous initial set
        s = benchmark_splits(n=1600)
        cfg = al_cfg(s.pool, kappa=8, initial_labelled_fraction=0.5,
                     mc=McConfig(T=40, base_seed=0),
                     train=TrainConfig(learning_rate=0.05,
                                       lr_decay_every_epochs=15,
                                       batch_size=16, max_epochs=25, seed=0))
        learner = ActiveLearner(s.pool, s.val, cfg, test_data=s.test)
        learner.start()
        acquired = learner.step()
        axis = np.ones(2) / np.sqrt(2)
        pool_proj = np.abs(s.pool.X @ axis)
        acq_proj = np.abs(s.pool.by_ids(acquired).X @ axis)
        assert acq_proj.mean() < pool_proj.mean()


class TestRun:
    def test_zero_target_stops_after_patience_block(self):
        s = benchmark_splits()
        result = al_run(s.pool, s.val,
                        al_cfg(s.pool, target_accuracy=0.0, patience=1))
        assert result.stop_reason == "target_met"
        assert len(result.history) == 1

    def test_patience_requires_consecutive_iterations(self):
        s = benchmark_splits()
        result = al_run(s.pool, s.val,
                        al_cfg(s.pool, target_accuracy=0.0, patience=2))
        assert result.stop_reason == "target_met"
        assert len(result.history) == 2

    def test_run_is_bit_reproducible(self):
        s = benchmark_splits()
        cfg = al_cfg(s.pool, kappa=20, target_accuracy=0.85, patience=2,
                     seed=7)
        learners = []
        for _ in range(2):
            learner = ActiveLearner(s.pool, s.val, cfg, test_data=s.test)
            learner.run()
            learners.append(learner)
        assert learners[0].state_checksum() == learners[1].state_checksum()
        h0 = [r.to_dict() for r in learners[0].state.history]
        h1 = [r.to_dict() for r in learners[1].state.history]
        assert h0 == h1

    def test_no_test_leakage_and_disjoint_sets(self):
        s = benchmark_splits()
        result = al_run(s.pool, s.val, al_cfg(s.pool, kappa=30,
                                              target_accuracy=0.8),
                        test_data=s.test)
        labelled = set(result.state.labelled)
        assert labelled.isdisjoint(set(int(i) for i in s.test.ids))
        assert labelled.isdisjoint(result.state.pool)
        assert set(result.state.val_ids).isdisjoint(labelled)

    def test_diverged_finetune_is_recorded_and_run_continues(self):
        s = benchmark_splits(n=160)
        cfg = al_cfg(s.pool, kappa=40, target_accuracy=1.0, patience=99,
                     finetune_learning_rate=1e12, finetune_epochs=40,
                     train=TrainConfig(learning_rate=0.05, batch_size=8,
                                       max_epochs=10, seed=0))
        learner = ActiveLearner(s.pool, s.val, cfg, test_data=s.test)
        learner.start()
        weights_before = [w.copy() for w in learner.net.weights]
        with np.errstate(over="ignore", invalid="ignore"):
            learner.step()
        record = learner.state.history[-1]
        assert record.diverged is True
        # the pre-step weights survive and the loop can keep going
        for w, orig in zip(learner.net.weights, weights_before):
            assert np.array_equal(w, orig)
        assert learner.step() or learner.state.pool == set()

    def test_deterministic_model_falls_through_to_exhaustion(self):
        s = benchmark_splits(n=160)
        cfg = al_cfg(
            s.pool, kappa=30, tau=0.01, target_accuracy=1.0, patience=99,
            network=NetworkConfig(input_dim=2, num_classes=2,
                                  hidden_layers=[(8, "relu")], alpha=0.0,
                                  beta=0.0, seed=0),
        )
        learner = ActiveLearner(s.pool, s.val, cfg, test_data=s.test)
        summaries = [stub(i, 0.0) for i in range(10)]
        assert acquire(summaries, cfg, kappa=5) == []  # sigma == 0 < tau
        result = learner.run()
        assert result.stop_reason == "pool_exhausted"


class TestManifestResume:
    def test_resume_matches_uninterrupted_run(self, tmp_path):
        s = benchmark_splits(n=240)
        # target out of reach for this validation set: both runs exhaust
        # the pool, so the resumed run must land on the same endpoint
        cfg = al_cfg(s.pool, kappa=25, target_accuracy=0.99, patience=2,
                     seed=5)

        full = ActiveLearner(s.pool, s.val, cfg, test_data=s.test)
        full.run()

        partial = ActiveLearner(s.pool, s.val, cfg, test_data=s.test)
        partial.start()
        partial.step()
        partial.step()
        manifest = partial.write_manifest(tmp_path / "manifest.json",
                                          tmp_path / "ckpt.json")

        resumed = resume(manifest, s.pool, s.val, test_data=s.test)
        resumed.run()
        assert resumed.state_checksum() == full.state_checksum()

    def test_resume_rejects_mismatched_data(self, tmp_path):
        s = benchmark_splits(n=240)
        cfg = al_cfg(s.pool, kappa=25)
        learner = ActiveLearner(s.pool, s.val, cfg, test_data=s.test)
        learner.start()
        manifest = learner.write_manifest(tmp_path / "m.json",
                                          tmp_path / "c.json")
        other = benchmark_splits(seed=9, n=240)
        with pytest.raises(Exception):
            resume(manifest, other.pool, s.val, test_data=s.test)


class TestCompareStrategies:
    def test_identical_random_strategies_coincide(self):
        s = benchmark_splits(n=200)
        cfg = al_cfg(s.pool, kappa=30, target_accuracy=0.8, patience=1)
        comparison = compare_strategies(
            s.pool, s.val, cfg, ["random"], seeds=[3], test_data=s.test)
        rerun = compare_strategies(
            s.pool, s.val, cfg, ["random"], seeds=[3], test_data=s.test)
        a = comparison.results[("random", 3)]
        b = rerun.results[("random", 3)]
        assert [r.to_dict() for r in a.history] == \
            [r.to_dict() for r in b.history]

    def test_single_strategy_equals_plain_run(self):
        s = benchmark_splits(n=200)
        cfg = al_cfg(s.pool, kappa=30, target_accuracy=0.8, patience=1,
                     strategy="least_confidence", seed=4)
        comparison = compare_strategies(
            s.pool, s.val, cfg, ["least_confidence"], seeds=[4],
            test_data=s.test)
        direct = al_run(s.pool, s.val, cfg, test_data=s.test)
        got = comparison.results[("least_confidence", 4)]
        assert [r.to_dict() for r in got.history] == \
            [r.to_dict() for r in direct.history]

    def test_labels_to_target_finds_first_crossing(self):
        records = [
            SimpleNamespace(labelled_fraction=0.1, test_accuracy=0.6),
            SimpleNamespace(labelled_fraction=0.2, test_accuracy=0.85),
            SimpleNamespace(labelled_fraction=0.3, test_accuracy=0.9),
        ]
        assert labels_to_target(records, 0.85) == 0.2
        assert labels_to_target(records, 0.95) is None
