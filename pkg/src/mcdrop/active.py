"""Pool-based active learning driven by MC-dropout uncertainty.

The loop trains on a small labelled seed set, scores the unlabelled pool, has
an oracle label the most uncertain samples, fine-tunes, and stops early once
validation accuracy holds a target for a configured number of consecutive
iterations (or the pool runs out).

Every random decision is drawn from a stream derived from (cfg.seed,
stream tag, iteration), so a run is bit-reproducible and can resume from its
manifest plus checkpoint without replaying earlier iterations.
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .data import Dataset
from .errors import OracleError, StateError, TrainingDivergedError, ValidationError
from .mc import McConfig, mc_predict_batch
from .nn import Network, NetworkConfig
from .train import SgdState, TrainConfig, train

STRATEGIES = ("mc_dropout_variance", "least_confidence", "random")

# stream tags for deriving per-purpose RNG seeds from cfg.seed
_INIT, _SCORE, _FINETUNE, _ACQUIRE = 0, 1, 2, 3


def derive_seed(seed, *parts):
    return int(np.random.SeedSequence([seed, *parts]).generate_state(1)[0])


@dataclass
class ALConfig:
    network: NetworkConfig
    kappa: int = None                   # None: ceil(|initial pool| / 40)
    tau: float = 0.02
    strategy: str = "mc_dropout_variance"
    target_accuracy: float = 1.0
    patience: int = 2
    initial_labelled_fraction: float = 0.06
    mc: McConfig = field(default_factory=McConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    fallback_on_empty: bool = True      # top-kappa by sigma when no sigma > tau
    retrain_from_scratch: bool = False
    finetune_epochs: int = None         # None: max(5, train.max_epochs // 5)
    finetune_learning_rate: float = None  # None: train.learning_rate

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValidationError(
                f"strategy must be one of {STRATEGIES}, got {self.strategy!r}"
            )
        if not 0.0 <= self.target_accuracy <= 1.0:
            raise ValidationError("target_accuracy must be in [0, 1]")
        if self.patience < 0:
            raise ValidationError("patience must be non-negative")
        if self.kappa is not None and self.kappa < 1:
            raise ValidationError("kappa must be positive when given")
        if not 0.0 < self.initial_labelled_fraction < 1.0:
            raise ValidationError("initial_labelled_fraction must be in (0, 1)")
        if self.tau < 0:
            raise ValidationError("tau must be non-negative")

    def resolved_finetune_epochs(self):
        if self.finetune_epochs is not None:
            return self.finetune_epochs
        return max(5, self.train.max_epochs // 5)

    def resolved_finetune_lr(self):
        if self.finetune_learning_rate is not None:
            return self.finetune_learning_rate
        return self.train.learning_rate

    def to_dict(self):
        return {
            "network": self.network.to_dict(),
            "kappa": self.kappa,
            "tau": self.tau,
            "strategy": self.strategy,
            "target_accuracy": self.target_accuracy,
            "patience": self.patience,
            "initial_labelled_fraction": self.initial_labelled_fraction,
            "mc": self.mc.to_dict(),
            "train": self.train.to_dict(),
            "seed": self.seed,
            "fallback_on_empty": self.fallback_on_empty,
            "retrain_from_scratch": self.retrain_from_scratch,
            "finetune_epochs": self.finetune_epochs,
            "finetune_learning_rate": self.finetune_learning_rate,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["network"] = NetworkConfig.from_dict(d["network"])
        d["mc"] = McConfig.from_dict(d["mc"])
        d["train"] = TrainConfig.from_dict(d["train"])
        return cls(**d)


@dataclass
class IterationRecord:
    iteration: int
    labelled_fraction: float
    n_labelled: int
    acquired_ids: list
    val_accuracy: float
    test_accuracy: float = None
    diverged: bool = False

    def to_dict(self):
        return {
            "iteration": self.iteration,
            "labelled_fraction": self.labelled_fraction,
            "n_labelled": self.n_labelled,
            "acquired_ids": [int(i) for i in self.acquired_ids],
            "val_accuracy": self.val_accuracy,
            "test_accuracy": self.test_accuracy,
            "diverged": self.diverged,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class ALState:
    labelled: dict                 # sample_id -> label
    pool: set                      # unlabelled sample_ids
    val_ids: tuple
    iteration: int = 0
    history: list = field(default_factory=list)
    initial_total: int = None      # |initial labelled| + |initial pool|

    def __post_init__(self):
        if self.initial_total is None:
            self.initial_total = len(self.labelled) + len(self.pool)

    @property
    def labelled_fraction(self):
        return len(self.labelled) / self.initial_total

    def check_invariants(self, test_ids=()):
        labelled_ids = set(self.labelled)
        val_ids = set(self.val_ids)
        if labelled_ids & self.pool:
            raise StateError("labelled and pool sets overlap")
        if val_ids & (labelled_ids | self.pool):
            raise StateError("validation ids leaked into labelled/pool")
        if set(test_ids) & labelled_ids:
            raise StateError("test ids leaked into the labelled set")
        if len(self.labelled) + len(self.pool) != self.initial_total:
            raise StateError("labelled + pool no longer cover the initial universe")


class SimulatedOracle:
    """Consistent oracle backed by held-out ground truth."""

    def __init__(self, source):
        if isinstance(source, Dataset):
            self._labels = {int(i): int(l) for i, l in zip(source.ids, source.y)}
        else:
            self._labels = {int(k): int(v) for k, v in dict(source).items()}

    def label(self, sample_id):
        try:
            return self._labels[int(sample_id)]
        except KeyError:
            raise OracleError(f"no ground truth for sample {sample_id}") from None

    def begin_batch(self, summaries, payloads, iteration):
        pass

    def end_batch(self):
        pass


def acquire(summaries, cfg: ALConfig, kappa=None, iteration=0):
    """Select at most kappa sample ids from pool summaries per cfg.strategy.

    mc_dropout_variance keeps only qualifiers with sigma > cfg.tau, ranked by
    sigma descending; least_confidence ranks by max posterior-mean probability
    ascending; random permutes uniformly.  Ties break on ascending sample_id
    and results are deterministic given cfg.seed and the iteration number.
    """
    if not summaries:
        return []
    k = kappa if kappa is not None else cfg.kappa
    if k is None:
        k = math.ceil(len(summaries) / 40)
    if cfg.strategy == "mc_dropout_variance":
        quals = [s for s in summaries if s.scalar_uncertainty > cfg.tau]
        quals.sort(key=lambda s: (-s.scalar_uncertainty, s.sample_id))
        return [s.sample_id for s in quals[:k]]
    if cfg.strategy == "least_confidence":
        ranked = sorted(summaries, key=lambda s: (s.mu.max(), s.sample_id))
        return [s.sample_id for s in ranked[:k]]
    rng = np.random.default_rng([cfg.seed, _ACQUIRE, iteration])
    order = rng.permutation(len(summaries))
    return [summaries[i].sample_id for i in order[:k]]


@dataclass
class ALResult:
    history: list
    state: ALState
    network: Network
    optimizer_state: SgdState
    stop_reason: str
    kappa: int

    def history_table(self):
        return [r.to_dict() for r in self.history]


class ActiveLearner:
    """Owns one active-learning run: model, state, oracle, and data access."""

    def __init__(self, pool_data: Dataset, val_data: Dataset, cfg: ALConfig,
                 oracle=None, test_data: Dataset = None, state: ALState = None,
                 network: Network = None, optimizer_state: SgdState = None,
                 on_iteration=None):
        self.pool_data = pool_data
        self.val_data = val_data
        self.test_data = test_data
        self.cfg = cfg
        self.oracle = oracle if oracle is not None else SimulatedOracle(pool_data)
        self.on_iteration = on_iteration
        self.stop_reason = None

        if state is not None:
            self.state = state
            if network is None:
                raise ValidationError("resuming a state needs its network")
            self.net = network
            self.opt_state = optimizer_state or SgdState.zeros(network)
            self.kappa = cfg.kappa or math.ceil(len(state.pool) / 40)
            self._started = True
        else:
            self.state = self._seed_initial_state()
            self.kappa = cfg.kappa or math.ceil(len(self.state.pool) / 40)
            self.net = Network(replace(cfg.network,
                                       seed=derive_seed(cfg.seed, _INIT)))
            self.opt_state = SgdState.zeros(self.net)
            self._started = False

    def _seed_counts(self):
        counts = {}
        for cls in np.unique(self.pool_data.y):
            n_c = int((self.pool_data.y == cls).sum())
            counts[int(cls)] = max(1, round(self.cfg.initial_labelled_fraction * n_c))
        return counts

    def _seed_initial_state(self):
        """Stratified initial labelled set; at least one sample per class.

        The seed set is pre-labelled by construction (it is the initial
        labelled dataset), so its labels come from the pool data itself; the
        oracle is only consulted for samples acquired later.
        """
        rng = np.random.default_rng([self.cfg.seed, _INIT])
        label_of = {int(i): int(l) for i, l in
                    zip(self.pool_data.ids, self.pool_data.y)}
        seed_ids = []
        for cls, k_c in sorted(self._seed_counts().items()):
            idx = np.flatnonzero(self.pool_data.y == cls)
            picked = rng.permutation(idx)[:k_c]
            seed_ids.extend(int(self.pool_data.ids[i]) for i in picked)
        labelled = {sid: label_of[sid] for sid in sorted(seed_ids)}
        pool = set(int(i) for i in self.pool_data.ids) - set(labelled)
        return ALState(labelled=labelled, pool=pool,
                       val_ids=tuple(int(i) for i in self.val_data.ids))

    # -- data access -------------------------------------------------------

    def _labelled_arrays(self):
        ids = sorted(self.state.labelled)
        X = self.pool_data.by_ids(ids).X
        y = np.array([self.state.labelled[i] for i in ids], dtype=np.int64)
        return X, y

    def _evaluate(self):
        val_acc = self.net.accuracy(self.val_data.X, self.val_data.y)
        test_acc = None
        if self.test_data is not None and len(self.test_data):
            test_acc = self.net.accuracy(self.test_data.X, self.test_data.y)
        return val_acc, test_acc

    def _record(self, acquired_ids, diverged=False):
        val_acc, test_acc = self._evaluate()
        self.state.history.append(IterationRecord(
            iteration=self.state.iteration,
            labelled_fraction=self.state.labelled_fraction,
            n_labelled=len(self.state.labelled),
            acquired_ids=list(acquired_ids),
            val_accuracy=val_acc,
            test_accuracy=test_acc,
            diverged=diverged,
        ))
        test_ids = self.test_data.ids if self.test_data is not None else ()
        self.state.check_invariants(test_ids=test_ids)
        if self.on_iteration is not None:
            self.on_iteration(self)

    # -- the loop ----------------------------------------------------------

    def start(self):
        """Train on the initial labelled set and record iteration 0."""
        if self._started:
            return
        X, y = self._labelled_arrays()
        cfg = replace(self.cfg.train, seed=derive_seed(self.cfg.seed, _INIT, 1))
        train(self.net, X, y, cfg, state=self.opt_state)
        self._record(acquired_ids=[])
        self._started = True

    def score_pool(self, iteration):
        pool_ids = sorted(self.state.pool)
        X = self.pool_data.by_ids(pool_ids).X
        mc_cfg = replace(self.cfg.mc,
                         base_seed=derive_seed(self.cfg.seed, _SCORE, iteration))
        return mc_predict_batch(self.net, X, mc_cfg, sample_ids=pool_ids)

    def step(self):
        """One acquisition round; returns the list of acquired ids.

        An empty acquisition (nothing above tau, fallback disabled) bumps the
        iteration counter and changes nothing else.  Oracle failure aborts the
        step with no state mutation at all.
        """
        if not self._started:
            raise StateError("step() requires a trained model; call start()")
        if not self.state.pool:
            return []
        iteration = self.state.iteration + 1
        summaries = self.score_pool(iteration)
        acquired = acquire(summaries, self.cfg, kappa=self.kappa,
                           iteration=iteration)
        if (not acquired and self.cfg.fallback_on_empty
                and self.cfg.strategy == "mc_dropout_variance"):
            ranked = sorted(summaries,
                            key=lambda s: (-s.scalar_uncertainty, s.sample_id))
            acquired = [s.sample_id for s in ranked[:self.kappa]]
        if not acquired:
            self.state.iteration = iteration
            return []

        by_id = {s.sample_id: s for s in summaries}
        payloads = [row.tolist() for row in self.pool_data.by_ids(acquired).X]
        self.oracle.begin_batch([by_id[sid] for sid in acquired], payloads,
                                iteration)
        try:
            labels = {sid: self.oracle.label(sid) for sid in acquired}
        finally:
            self.oracle.end_batch()

        self.state.pool.difference_update(acquired)
        self.state.labelled.update(labels)
        self.state.iteration = iteration

        diverged = self._finetune(iteration)
        self._record(acquired_ids=acquired, diverged=diverged)
        return acquired

    def _finetune(self, iteration):
        X, y = self._labelled_arrays()
        seed = derive_seed(self.cfg.seed, _FINETUNE, iteration)
        if self.cfg.retrain_from_scratch:
            self.net = Network(replace(self.cfg.network, seed=seed))
            self.opt_state = SgdState.zeros(self.net)
            cfg = replace(self.cfg.train, seed=seed)
        else:
            cfg = replace(self.cfg.train, seed=seed,
                          max_epochs=self.cfg.resolved_finetune_epochs(),
                          learning_rate=self.cfg.resolved_finetune_lr())
        snapshot = ([w.copy() for w in self.net.weights],
                    [b.copy() for b in self.net.biases])
        try:
            train(self.net, X, y, cfg, state=self.opt_state)
            return False
        except TrainingDivergedError:
            # keep the last usable weights, reset momentum, carry on
            self.net.set_parameters(*snapshot)
            self.opt_state = SgdState.zeros(self.net)
            return True

    def _target_streak(self):
        streak = 0
        for record in self.state.history:
            if record.val_accuracy >= self.cfg.target_accuracy:
                streak += 1
            else:
                streak = 0
        return streak

    def run(self) -> ALResult:
        """Run to early stop, pool exhaustion, or a stalled acquisition."""
        self.start()
        required = max(1, self.cfg.patience)
        while True:
            if self._target_streak() >= required:
                self.stop_reason = "target_met"
                break
            if not self.state.pool:
                self.stop_reason = "pool_exhausted"
                break
            acquired = self.step()
            if not acquired:
                self.stop_reason = "stalled"
                break
        return ALResult(
            history=list(self.state.history), state=self.state,
            network=self.net, optimizer_state=self.opt_state,
            stop_reason=self.stop_reason, kappa=self.kappa,
        )

    # -- persistence -------------------------------------------------------

    def state_checksum(self):
        """Digest of labelled set, pool, iteration, and network weights."""
        import hashlib

        h = hashlib.sha256()
        for sid in sorted(self.state.labelled):
            h.update(f"{sid}:{self.state.labelled[sid]};".encode())
        h.update(",".join(str(i) for i in sorted(self.state.pool)).encode())
        h.update(str(self.state.iteration).encode())
        for w in self.net.weights:
            h.update(w.tobytes())
        for b in self.net.biases:
            h.update(b.tobytes())
        return h.hexdigest()

    def write_manifest(self, manifest_path, checkpoint_path):
        save_checkpoint(checkpoint_path, self.net, self.opt_state)
        doc = {
            "schema_version": 1,
            "config": self.cfg.to_dict(),
            "kappa": self.kappa,
            "split_checksums": {
                "pool": self.pool_data.checksum(),
                "val": self.val_data.checksum(),
                "test": self.test_data.checksum() if self.test_data else None,
            },
            "labelled": {str(k): int(v) for k, v in self.state.labelled.items()},
            "pool_ids": sorted(int(i) for i in self.state.pool),
            "iteration": self.state.iteration,
            "initial_total": self.state.initial_total,
            "history": [r.to_dict() for r in self.state.history],
            "stop_reason": self.stop_reason,
            "checkpoint": str(checkpoint_path),
            "state_checksum": self.state_checksum(),
        }
        Path(manifest_path).write_text(json.dumps(doc, sort_keys=True, indent=2))
        return manifest_path


def resume(manifest_path, pool_data, val_data, test_data=None, oracle=None):
    """Rebuild an ActiveLearner from a manifest plus its checkpoint."""
    doc = json.loads(Path(manifest_path).read_text())
    if doc.get("schema_version") != 1:
        raise ValidationError("unknown manifest schema_version")
    expected = doc["split_checksums"]
    if pool_data.checksum() != expected["pool"]:
        raise ValidationError("pool dataset does not match the manifest checksum")
    if val_data.checksum() != expected["val"]:
        raise ValidationError("val dataset does not match the manifest checksum")
    if expected.get("test") and (test_data is None
                                 or test_data.checksum() != expected["test"]):
        raise ValidationError("test dataset does not match the manifest checksum")

    cfg = ALConfig.from_dict(doc["config"])
    ckpt = load_checkpoint(doc["checkpoint"])
    state = ALState(
        labelled={int(k): int(v) for k, v in doc["labelled"].items()},
        pool=set(doc["pool_ids"]),
        val_ids=tuple(int(i) for i in val_data.ids),
        iteration=doc["iteration"],
        history=[IterationRecord.from_dict(r) for r in doc["history"]],
        initial_total=doc["initial_total"],
    )
    learner = ActiveLearner(
        pool_data, val_data, cfg, oracle=oracle, test_data=test_data,
        state=state, network=ckpt.network,
        optimizer_state=ckpt.optimizer_state,
    )
    learner.kappa = doc["kappa"]
    return learner


def al_run(pool_data, val_data, cfg, oracle=None, test_data=None) -> ALResult:
    """Convenience wrapper: build an ActiveLearner and run it."""
    return ActiveLearner(pool_data, val_data, cfg, oracle=oracle,
                         test_data=test_data).run()


def labels_to_target(history, target, key="test_accuracy"):
    """Smallest labelled fraction whose record meets the target accuracy."""
    for record in history:
        acc = getattr(record, key)
        if acc is not None and acc >= target:
            return record.labelled_fraction
    return None


@dataclass
class StrategyComparison:
    results: dict            # (strategy, seed) -> ALResult
    labels_to_target: dict   # strategy -> {"mean", "std", "values"}
    target: float

    def summary_table(self):
        return {
            strategy: dict(stats)
            for strategy, stats in self.labels_to_target.items()
        }


def compare_strategies(pool_data, val_data, cfg_base: ALConfig, strategies,
                       seeds, test_data=None, target=None,
                       oracle_factory=None) -> StrategyComparison:
    """Run each strategy over the same seeds and splits.

    The labels-to-target statistic is the labelled fraction at which test
    accuracy (validation when no test set is given) first reaches ``target``
    (default cfg_base.target_accuracy).
    """
    if not strategies:
        raise ValidationError("strategies must be non-empty")
    target = cfg_base.target_accuracy if target is None else target
    key = "test_accuracy" if test_data is not None else "val_accuracy"
    results = {}
    stats = {}
    for strategy in strategies:
        fractions = []
        for seed in seeds:
            cfg = replace(cfg_base, strategy=strategy, seed=seed)
            oracle = oracle_factory(pool_data) if oracle_factory else None
            result = al_run(pool_data, val_data, cfg, oracle=oracle,
                            test_data=test_data)
            results[(strategy, seed)] = result
            fractions.append(labels_to_target(result.history, target, key=key))
        defined = [f for f in fractions if f is not None]
        stats[strategy] = {
            "mean": float(np.mean(defined)) if defined else None,
            "std": float(np.std(defined)) if defined else None,
            "values": fractions,
            "reached": len(defined),
        }
    return StrategyComparison(results=results, labels_to_target=stats,
                              target=target)
