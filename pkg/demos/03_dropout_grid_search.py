"""Cross-validated search over the two dropout rates.

Scores a small (alpha, beta) grid by k-fold accuracy and reports the best
pair, mirroring the tuning protocol used to pick the rates elsewhere.
"""

from mcdrop import NetworkConfig, TrainConfig, grid_search_dropout
from mcdrop.data import generate_grid_mixture, standardize, split, SplitSpec

dataset = generate_grid_mixture(600, seed=3)
splits = standardize(split(dataset, SplitSpec(train=1.0, val=0.0, test=0.0,
                                              pool=0.0, seed=3)))
X, y = splits.train.X, splits.train.y

result = grid_search_dropout(
    X, y,
    base_config=NetworkConfig(2, 2, [(24, "relu"), (24, "relu")],
                              l2_lambda=5e-4, seed=0),
    train_cfg=TrainConfig(learning_rate=0.05, lr_decay_every_epochs=40,
                          max_epochs=60, batch_size=16, seed=0),
    alphas=[0.0, 0.2, 0.5],
    betas=[0.0, 0.2, 0.4],
    folds=5,
)

print("mean 5-fold accuracy by (alpha, beta):")
header = "alpha\\beta " + "  ".join(f"{b:>6}" for b in result.betas)
print(" " + header)
for ai, alpha in enumerate(result.alphas):
    row = "  ".join(f"{result.accuracy[ai, bi]:6.3f}"
                    for bi in range(len(result.betas)))
    print(f"  {alpha:<9} {row}")
print(f"\nbest pair: alpha={result.best_alpha}, beta={result.best_beta} "
      f"({result.best_accuracy:.3f})")
