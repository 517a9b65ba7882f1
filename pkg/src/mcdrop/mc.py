"""Monte Carlo dropout: posterior mean/dispersion over T stochastic passes.

Per-sample randomness is drawn from a stream seeded by (base_seed,
sample_id); pass t consumes row t of each mask block.  Identical
(checkpoint, base_seed, T, sample_id) therefore reproduce a summary bit for
bit, and batch evaluation of a sample equals a single-sample call with the
same id, independent of batch order.
"""

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ValidationError

SIGMA_FORMULAS = ("paper_literal", "sample_std")


@dataclass
class McConfig:
    T: int = 100
    base_seed: int = 0
    sigma_formula: str = "paper_literal"

    def __post_init__(self):
        if self.T < 2:
            raise ValidationError("T must be at least 2 to estimate sigma")
        if self.sigma_formula not in SIGMA_FORMULAS:
            raise ValidationError(
                f"sigma_formula must be one of {SIGMA_FORMULAS}, "
                f"got {self.sigma_formula!r}"
            )

    def to_dict(self):
        return {"T": self.T, "base_seed": self.base_seed,
                "sigma_formula": self.sigma_formula}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def sigma_from_samples(samples, formula):
    """Per-class dispersion of a (T, d_y) sample matrix.

    ``paper_literal`` scales the root sum of squared deviations by 1/(T-1);
    ``sample_std`` is the usual sqrt of the unbiased variance.  The two
    differ exactly by a factor sqrt(T-1).
    """
    T = samples.shape[0]
    mu = samples.mean(axis=0)
    # corrected two-pass sum of squares: identical rows give exactly zero
    dev = samples - mu
    dev -= dev.mean(axis=0)
    ss = (dev ** 2).sum(axis=0)
    if formula == "paper_literal":
        return np.sqrt(ss) / (T - 1)
    if formula == "sample_std":
        return np.sqrt(ss / (T - 1))
    raise ValidationError(f"unknown sigma formula {formula!r}")


@dataclass
class PosteriorSummary:
    """Posterior predictive summary of one input over T stochastic passes."""

    sample_id: int
    T: int
    samples: np.ndarray          # (T, d_y) softmax rows
    mu: np.ndarray               # (d_y,) column mean of samples
    sigma: np.ndarray            # (d_y,) dispersion per sigma formula
    predicted_class: int
    scalar_uncertainty: float    # sigma of the predicted class
    sigma_formula: str = "paper_literal"

    @classmethod
    def from_samples(cls, sample_id, samples, sigma_formula="paper_literal"):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] < 2:
            raise ValidationError(
                f"samples must be a (T >= 2, d_y) matrix, got {samples.shape}"
            )
        row_sums = samples.sum(axis=1)
        if np.max(np.abs(row_sums - 1.0)) > 1e-9:
            raise ValidationError("each sample row must sum to 1 within 1e-9")
        mu = samples.mean(axis=0)
        sigma = sigma_from_samples(samples, sigma_formula)
        predicted = int(np.argmax(mu))
        return cls(
            sample_id=int(sample_id),
            T=samples.shape[0],
            samples=samples,
            mu=mu,
            sigma=sigma,
            predicted_class=predicted,
            scalar_uncertainty=float(sigma[predicted]),
            sigma_formula=sigma_formula,
        )

    def to_dict(self, full=False):
        d = {
            "sample_id": self.sample_id,
            "T": self.T,
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "predicted_class": self.predicted_class,
            "scalar_uncertainty": self.scalar_uncertainty,
            "sigma_formula": self.sigma_formula,
        }
        if full:
            d["samples"] = self.samples.tolist()
        return d


def mc_predict(net, x, cfg: McConfig, sample_id=0):
    """PosteriorSummary for one input from T stochastic forward passes."""
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng([cfg.base_seed, int(sample_id)])
    masks = net.draw_masks(rng, cfg.T)
    tiled = np.broadcast_to(x, (cfg.T, x.shape[-1]))
    samples = net.forward_batch(tiled, mode="stochastic", masks=masks)
    return PosteriorSummary.from_samples(sample_id, samples, cfg.sigma_formula)


def mc_predict_batch(net, xs, cfg: McConfig, sample_ids=None):
    """Order-preserving per-sample summaries; empty input gives []."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.shape[0] == 0:
        return []
    if sample_ids is None:
        sample_ids = range(xs.shape[0])
    sample_ids = list(sample_ids)
    if len(sample_ids) != xs.shape[0]:
        raise ValidationError("sample_ids must match the number of inputs")
    return [
        mc_predict(net, xs[i], cfg, sample_id=sample_ids[i])
        for i in range(xs.shape[0])
    ]


def posterior_histogram(summary: PosteriorSummary, bins: int):
    """Histogram of the T softmax samples per class on uniform [0, 1] bins.

    Returns (counts, edges) with counts of shape (d_y, bins); each class row
    sums to T.  The final bin includes 1.0.
    """
    if bins < 1:
        raise ValidationError("bins must be at least 1")
    d_y = summary.samples.shape[1]
    # edges as k/bins so probabilities sitting exactly on a decimal edge
    # fall into the upper bin; the last bin is closed at 1
    edges = np.arange(bins + 1) / bins
    idx = np.searchsorted(edges, summary.samples, side="right") - 1
    idx = np.clip(idx, 0, bins - 1)
    counts = np.stack([
        np.bincount(idx[:, k], minlength=bins) for k in range(d_y)
    ])
    return counts, edges


class Outcome(str, Enum):
    CORRECT_CERTAIN = "correct_certain"
    CORRECT_UNCERTAIN = "correct_uncertain"
    INCORRECT_CERTAIN = "incorrect_certain"
    INCORRECT_UNCERTAIN = "incorrect_uncertain"


def classify_outcome(summary: PosteriorSummary, true_label, tau):
    """Four-state outcome: correctness crossed with certainty at tau.

    A prediction counts as certain when scalar_uncertainty <= tau (the
    boundary value is accepted).
    """
    if tau < 0:
        raise ValidationError("tau must be non-negative")
    correct = summary.predicted_class == int(true_label)
    certain = summary.scalar_uncertainty <= tau
    if correct:
        return Outcome.CORRECT_CERTAIN if certain else Outcome.CORRECT_UNCERTAIN
    return Outcome.INCORRECT_CERTAIN if certain else Outcome.INCORRECT_UNCERTAIN


def dump_posteriors(path, summaries, full=False):
    """Write one JSON document per line, optionally with the samples matrix."""
    with Path(path).open("w") as fh:
        for s in summaries:
            fh.write(json.dumps(s.to_dict(full=full), sort_keys=True))
            fh.write("\n")
    return path


def load_posteriors(path):
    """Read a posterior dump back as a list of dicts."""
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line]
