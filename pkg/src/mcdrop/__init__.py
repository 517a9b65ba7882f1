"""MC-dropout uncertainty toolkit.

Small dropout classifiers, Monte Carlo predictive uncertainty, classification
with rejection, and an uncertainty-guided active-learning loop with simulated
or human label oracles.
"""

from .active import (ALConfig, ALResult, ALState, ActiveLearner, acquire,
                     al_run, compare_strategies, labels_to_target, resume,
                     SimulatedOracle)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import (Dataset, DatasetMeta, SplitSpec, Splits, dataset_meta,
                   generate_synthetic, load_csv, load_idx_images, save_csv,
                   split, standardize)
from .errors import (CheckpointFormatError, DimensionError, FormatError,
                     McdropError, OracleError, ParseError, StateError,
                     TrainingDivergedError, ValidationError)
from .mc import (McConfig, Outcome, PosteriorSummary, classify_outcome,
                 dump_posteriors, load_posteriors, mc_predict,
                 mc_predict_batch, posterior_histogram, sigma_from_samples)
from .nn import LayerSpec, Network, NetworkConfig, softmax
from .rejection import (ConfusionCounts, PartitionCounts, Prf1,
                        RejectionMetrics, RejectionPolicy, apply_policy,
                        confusion_counts, export_curve_csv, partition_counts,
                        prf1, referral_curve, rejection_metrics,
                        threshold_sweep)
from .train import (EpochRecord, GridSearchResult, SgdState, TrainConfig,
                    grid_search_dropout, learning_rate_at, train)

__version__ = "0.1.0"
