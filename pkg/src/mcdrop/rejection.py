"""Classification with rejection: referral policies and partition metrics.

Partition letters follow the usual reject-option bookkeeping: A and M are
the correctly and incorrectly classified samples, N and R the retained
(non-referred) and referred ones.  All metric functions return None for
genuinely undefined ratios instead of raising, so sweeps stay plottable.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError

POLICY_KINDS = ("threshold", "informed_fraction", "random_fraction")


@dataclass(frozen=True)
class RejectionPolicy:
    kind: str
    tau: float = None
    fraction: float = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValidationError(
                f"kind must be one of {POLICY_KINDS}, got {self.kind!r}"
            )
        if self.kind == "threshold":
            if self.tau is None or self.tau < 0:
                raise ValidationError("threshold policy needs tau >= 0")
        else:
            if self.fraction is None or not 0.0 <= self.fraction <= 1.0:
                raise ValidationError(
                    f"fraction must be in [0, 1], got {self.fraction}"
                )

    def to_dict(self):
        return {"kind": self.kind, "tau": self.tau,
                "fraction": self.fraction, "seed": self.seed}


def apply_policy(summaries, policy: RejectionPolicy):
    """Split summaries into (retained_ids, referred_ids).

    threshold:          refer sigma > tau (sigma == tau is retained).
    informed_fraction:  refer the round(fraction*n) most uncertain samples,
                        ties broken by ascending sample_id.
    random_fraction:    refer a seeded uniform sample of the same size.
    """
    if policy.kind != "threshold" and not summaries:
        raise ValidationError("fraction policies need a non-empty input")
    ids = [s.sample_id for s in summaries]
    if policy.kind == "threshold":
        referred = [s.sample_id for s in summaries
                    if s.scalar_uncertainty > policy.tau]
    elif policy.kind == "informed_fraction":
        k = round(policy.fraction * len(summaries))
        ranked = sorted(summaries,
                        key=lambda s: (-s.scalar_uncertainty, s.sample_id))
        referred = [s.sample_id for s in ranked[:k]]
    else:
        k = round(policy.fraction * len(summaries))
        rng = np.random.default_rng(policy.seed)
        picked = rng.choice(len(summaries), size=k, replace=False)
        referred = [ids[i] for i in picked]
    referred_set = set(referred)
    retained = [i for i in ids if i not in referred_set]
    return retained, referred


@dataclass
class PartitionCounts:
    """Cardinalities of the A/M/N/R partition and their intersections."""

    correct: int              # |A|
    incorrect: int            # |M|
    retained: int             # |N|
    referred: int             # |R|
    correct_retained: int     # |A n N|
    correct_referred: int     # |A n R|
    incorrect_retained: int   # |M n N|
    incorrect_referred: int   # |M n R|

    @property
    def total(self):
        return self.correct + self.incorrect

    def validate(self):
        ok = (
            self.correct + self.incorrect == self.retained + self.referred
            and self.correct_retained + self.correct_referred == self.correct
            and self.incorrect_retained + self.incorrect_referred == self.incorrect
            and self.correct_retained + self.incorrect_retained == self.retained
            and self.correct_referred + self.incorrect_referred == self.referred
            and min(
                self.correct, self.incorrect, self.retained, self.referred,
                self.correct_retained, self.correct_referred,
                self.incorrect_retained, self.incorrect_referred,
            ) >= 0
        )
        if not ok:
            raise ValidationError(f"inconsistent partition counts: {self}")
        return self

    def to_dict(self):
        return {
            "A": self.correct, "M": self.incorrect,
            "N": self.retained, "R": self.referred,
            "A_and_N": self.correct_retained, "A_and_R": self.correct_referred,
            "M_and_N": self.incorrect_retained, "M_and_R": self.incorrect_referred,
        }


def partition_counts(predictions, true_labels, referred_ids, sample_ids=None):
    """PartitionCounts from aligned prediction/label arrays and referred ids."""
    predictions = np.asarray(predictions)
    true_labels = np.asarray(true_labels)
    if predictions.shape != true_labels.shape or predictions.ndim != 1:
        raise ValidationError(
            f"predictions {predictions.shape} and labels {true_labels.shape} "
            "must be aligned 1-D arrays"
        )
    n = len(predictions)
    if sample_ids is None:
        sample_ids = np.arange(n)
    sample_ids = np.asarray(sample_ids)
    if sample_ids.shape != predictions.shape:
        raise ValidationError("sample_ids must align with predictions")
    referred_set = set(int(i) for i in referred_ids)
    unknown = referred_set - set(int(i) for i in sample_ids)
    if unknown:
        raise ValidationError(f"referred ids not in sample_ids: {sorted(unknown)}")

    correct = predictions == true_labels
    referred = np.array([int(i) in referred_set for i in sample_ids])
    return PartitionCounts(
        correct=int(correct.sum()),
        incorrect=int((~correct).sum()),
        retained=int((~referred).sum()),
        referred=int(referred.sum()),
        correct_retained=int((correct & ~referred).sum()),
        correct_referred=int((correct & referred).sum()),
        incorrect_retained=int((~correct & ~referred).sum()),
        incorrect_referred=int((~correct & referred).sum()),
    ).validate()


@dataclass
class RejectionMetrics:
    nra: float        # |A n N| / |N|, None when nothing is retained
    cq: float         # (|A n N| + |M n R|) / (|N| + |R|)
    rq: float         # |M n R| |A| / (|A n R| |M|); inf or None when degenerate

    def to_dict(self):
        rq = self.rq
        if rq is not None and np.isinf(rq):
            rq = "inf"
        return {"NRA": self.nra, "CQ": self.cq, "RQ": rq}


def rejection_metrics(pc: PartitionCounts) -> RejectionMetrics:
    """NRA, CQ and RQ with sentinel values for degenerate denominators.

    RQ is +inf when referral caught misclassifications without sacrificing a
    single correct sample, and None when the ratio is 0/0 (no errors at all,
    or nothing informative referred).
    """
    nra = pc.correct_retained / pc.retained if pc.retained > 0 else None
    denom = pc.retained + pc.referred
    cq = (pc.correct_retained + pc.incorrect_referred) / denom if denom else None
    rq_num = pc.incorrect_referred * pc.correct
    rq_den = pc.correct_referred * pc.incorrect
    if rq_den == 0:
        rq = float("inf") if rq_num > 0 else None
    else:
        rq = rq_num / rq_den
    return RejectionMetrics(nra=nra, cq=cq, rq=rq)


@dataclass
class ConfusionCounts:
    """Binary confusion counts over the retained samples.

    ``retained_total`` defaults to the four counts' sum; it can be passed
    explicitly to reproduce published rows whose counts do not add up to
    their stated sample number.
    """

    tp: int
    tn: int
    fp: int
    fn: int
    retained_total: int = None

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValidationError("confusion counts must be non-negative")
        if self.retained_total is None:
            self.retained_total = self.tp + self.tn + self.fp + self.fn

    def to_dict(self):
        return {"TP": self.tp, "TN": self.tn, "FP": self.fp, "FN": self.fn,
                "retained_total": self.retained_total}


def confusion_counts(predictions, true_labels, retained_ids=None,
                     sample_ids=None, positive_class=1):
    """ConfusionCounts on the retained subset (all samples when None)."""
    predictions = np.asarray(predictions)
    true_labels = np.asarray(true_labels)
    n = len(predictions)
    if sample_ids is None:
        sample_ids = np.arange(n)
    if retained_ids is None:
        keep = np.ones(n, dtype=bool)
    else:
        retained_set = set(int(i) for i in retained_ids)
        keep = np.array([int(i) in retained_set for i in sample_ids])
    pred = predictions[keep] == positive_class
    true = true_labels[keep] == positive_class
    return ConfusionCounts(
        tp=int((pred & true).sum()),
        tn=int((~pred & ~true).sum()),
        fp=int((pred & ~true).sum()),
        fn=int((~pred & true).sum()),
    )


@dataclass
class Prf1:
    precision: float
    recall: float
    f1: float
    accuracy: float
    macro_precision: float = None
    macro_recall: float = None
    macro_f1: float = None

    def to_dict(self):
        return {
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "accuracy": self.accuracy, "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall, "macro_f1": self.macro_f1,
        }


def _ratio(num, den):
    return num / den if den > 0 else None


def _f1(p, r):
    if p is None or r is None or p + r == 0:
        return None
    return 2 * p * r / (p + r)


def prf1(cc: ConfusionCounts) -> Prf1:
    """Precision/recall/F1 on the positive class, plus macro-averaged twins.

    Degenerate denominators yield None rather than an error.
    """
    precision = _ratio(cc.tp, cc.tp + cc.fp)
    recall = _ratio(cc.tp, cc.tp + cc.fn)
    f1 = _f1(precision, recall)
    accuracy = _ratio(cc.tp + cc.tn, cc.retained_total)
    neg_precision = _ratio(cc.tn, cc.tn + cc.fn)
    neg_recall = _ratio(cc.tn, cc.tn + cc.fp)

    def _macro(a, b):
        return None if a is None or b is None else (a + b) / 2

    return Prf1(
        precision=precision, recall=recall, f1=f1, accuracy=accuracy,
        macro_precision=_macro(precision, neg_precision),
        macro_recall=_macro(recall, neg_recall),
        macro_f1=_macro(f1, _f1(neg_precision, neg_recall)),
    )


@dataclass
class CurvePoint:
    """Metrics of one (fraction, mode, seed) evaluation."""

    fraction: float
    mode: str
    seed: int
    referred: int
    nra: float
    cq: float
    rq: float
    accuracy: float

    def to_dict(self):
        rq = "inf" if self.rq is not None and np.isinf(self.rq) else self.rq
        return {"fraction": self.fraction, "mode": self.mode, "seed": self.seed,
                "referred": self.referred, "NRA": self.nra, "CQ": self.cq,
                "RQ": rq, "accuracy": self.accuracy}


@dataclass
class CurveRow:
    """Seed-aggregated metrics at one referral fraction."""

    fraction: float
    mode: str
    n_seeds: int
    nra_mean: float
    nra_std: float
    cq_mean: float
    cq_std: float
    rq_mean: float
    rq_std: float
    accuracy_mean: float
    accuracy_std: float

    def to_dict(self):
        d = {"fraction": self.fraction, "mode": self.mode,
             "n_seeds": self.n_seeds}
        for name in ("nra", "cq", "rq", "accuracy"):
            for stat in ("mean", "std"):
                v = getattr(self, f"{name}_{stat}")
                if v is not None and not np.isfinite(v):
                    v = "inf"
                d[f"{name}_{stat}"] = v
        return d


def _aggregate(values):
    """Mean/std over seeds; None values are excluded, inf propagates to mean."""
    defined = [v for v in values if v is not None]
    if not defined:
        return None, None
    if any(np.isinf(v) for v in defined):
        return float("inf"), None
    arr = np.asarray(defined, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def _curve_point(summaries, true_labels, policy, fraction, mode, seed):
    retained_ids, referred_ids = apply_policy(summaries, policy)
    predictions = np.array([s.predicted_class for s in summaries])
    ids = np.array([s.sample_id for s in summaries])
    pc = partition_counts(predictions, true_labels, referred_ids,
                          sample_ids=ids)
    metrics = rejection_metrics(pc)
    return CurvePoint(
        fraction=fraction, mode=mode, seed=seed, referred=pc.referred,
        nra=metrics.nra, cq=metrics.cq, rq=metrics.rq,
        # retained-set accuracy; coincides with NRA by definition
        accuracy=metrics.nra,
    )


def referral_curve(summaries, true_labels, fractions, mode="informed",
                   seeds=(0,)):
    """Referral-fraction sweep; returns (aggregated rows, raw points).

    Informed referral is deterministic, so it is evaluated once per fraction;
    random referral is evaluated per seed and aggregated as mean/std.
    """
    if mode not in ("informed", "random"):
        raise ValidationError(f"mode must be informed or random, got {mode!r}")
    true_labels = np.asarray(true_labels)
    rows, raw = [], []
    for fraction in fractions:
        if not 0.0 <= fraction <= 1.0:
            raise ValidationError(f"fractions must lie in [0, 1], got {fraction}")
        if mode == "informed":
            points = [_curve_point(
                summaries, true_labels,
                RejectionPolicy(kind="informed_fraction", fraction=fraction),
                fraction, mode, seed=None,
            )]
        else:
            points = [_curve_point(
                summaries, true_labels,
                RejectionPolicy(kind="random_fraction", fraction=fraction,
                                seed=seed),
                fraction, mode, seed=seed,
            ) for seed in seeds]
        raw.extend(points)
        nra = _aggregate([p.nra for p in points])
        cq = _aggregate([p.cq for p in points])
        rq = _aggregate([p.rq for p in points])
        acc = _aggregate([p.accuracy for p in points])
        rows.append(CurveRow(
            fraction=fraction, mode=mode, n_seeds=len(points),
            nra_mean=nra[0], nra_std=nra[1], cq_mean=cq[0], cq_std=cq[1],
            rq_mean=rq[0], rq_std=rq[1],
            accuracy_mean=acc[0], accuracy_std=acc[1],
        ))
    return rows, raw


@dataclass
class SweepRow:
    tau: float
    rejected: int
    retained: int
    confusion: ConfusionCounts
    metrics: Prf1

    def to_dict(self):
        return {"tau": self.tau, "rejected": self.rejected,
                "retained": self.retained, "confusion": self.confusion.to_dict(),
                "metrics": self.metrics.to_dict()}


def threshold_sweep(summaries, true_labels, taus, positive_class=1):
    """Per-threshold referral table; taus must be sorted ascending."""
    taus = list(taus)
    if any(b < a for a, b in zip(taus, taus[1:])):
        raise ValidationError("taus must be sorted ascending")
    true_labels = np.asarray(true_labels)
    predictions = np.array([s.predicted_class for s in summaries])
    ids = np.array([s.sample_id for s in summaries])
    rows = []
    for tau in taus:
        retained_ids, referred_ids = apply_policy(
            summaries, RejectionPolicy(kind="threshold", tau=tau)
        )
        cc = confusion_counts(predictions, true_labels, retained_ids,
                              sample_ids=ids, positive_class=positive_class)
        rows.append(SweepRow(
            tau=tau, rejected=len(referred_ids), retained=len(retained_ids),
            confusion=cc, metrics=prf1(cc),
        ))
    return rows


def export_curve_csv(path, points):
    """One CSV row per (fraction, mode, seed) evaluation."""
    fields = ["fraction", "mode", "seed", "referred", "NRA", "CQ", "RQ",
              "accuracy"]
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for p in points:
            writer.writerow(p.to_dict())
    return path
