"""Dataset generation, ingestion, splitting, and normalisation.

Datasets are immutable after load: float64 feature matrix, int64 labels, and
stable integer sample ids that the uncertainty, rejection, and AL modules key
their bookkeeping on.
"""

import csv
import hashlib
import struct
import urllib.request
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .errors import FormatError, ParseError, ValidationError
from .tensor import require_finite


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    ids: np.ndarray = None
    name: str = "dataset"
    num_classes: int = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValidationError(
                f"X {self.X.shape} and y {self.y.shape} must align"
            )
        require_finite(self.X, "features")
        if self.ids is None:
            self.ids = np.arange(len(self.y), dtype=np.int64)
        else:
            self.ids = np.asarray(self.ids, dtype=np.int64)
            if self.ids.shape != self.y.shape:
                raise ValidationError("ids must align with labels")
        if self.y.size and self.y.min() < 0:
            raise ValidationError("labels must be non-negative integers")
        if self.num_classes is None:
            self.num_classes = int(self.y.max()) + 1 if self.y.size else 0
        elif self.y.size and self.y.max() >= self.num_classes:
            raise ValidationError(
                f"label {self.y.max()} out of range for {self.num_classes} classes"
            )

    def __len__(self):
        return len(self.y)

    @property
    def input_dim(self):
        return self.X.shape[1]

    def subset(self, indices, name=None):
        indices = np.asarray(indices)
        return Dataset(
            X=self.X[indices], y=self.y[indices], ids=self.ids[indices],
            name=name or self.name, num_classes=self.num_classes,
        )

    def by_ids(self, wanted_ids, name=None):
        """Rows for the given sample ids, in the order given."""
        index_of = {int(i): k for k, i in enumerate(self.ids)}
        try:
            rows = [index_of[int(i)] for i in wanted_ids]
        except KeyError as exc:
            raise ValidationError(f"unknown sample id {exc.args[0]}") from exc
        return self.subset(np.array(rows, dtype=np.int64), name=name)

    def checksum(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.ids).tobytes())
        h.update(np.ascontiguousarray(self.y).tobytes())
        h.update(np.ascontiguousarray(self.X).tobytes())
        return h.hexdigest()


@dataclass
class DatasetMeta:
    name: str
    input_dim: int
    num_classes: int
    size: int
    split_checksums: dict = field(default_factory=dict)
    normalization: dict = None

    def to_dict(self):
        return {
            "name": self.name, "input_dim": self.input_dim,
            "num_classes": self.num_classes, "size": self.size,
            "split_checksums": dict(self.split_checksums),
            "normalization": self.normalization,
        }


def generate_synthetic(n, input_dim, class_means=None, class_covariances=None,
                       bayes_error=None, seed=0, name="synthetic"):
    """Two-class Gaussian mixture with a controllable overlap.

    ``class_means`` is (2, d) for one component per class, or (2, k, d) for a
    k-component mixture per class (components equally weighted).
    Alternatively pass a ``bayes_error`` target: single components are then
    placed symmetrically on the all-ones axis with unit covariance so the
    optimal error rate equals the target.  Classes are balanced and rows
    shuffled.
    """
    if n < 2:
        raise ValidationError("need at least 2 samples")
    if bayes_error is not None:
        if not 0.0 <= bayes_error < 0.5:
            raise ValidationError("bayes_error must be in [0, 0.5)")
        if class_means is not None:
            raise ValidationError("give class_means or bayes_error, not both")
        # distance between means such that Phi(-delta/2) equals the target
        delta = 2.0 * NormalDist().inv_cdf(1.0 - bayes_error)
        axis = np.ones(input_dim) / np.sqrt(input_dim)
        class_means = np.stack([-0.5 * delta * axis, 0.5 * delta * axis])
    if class_means is None:
        raise ValidationError("either class_means or bayes_error is required")
    class_means = np.asarray(class_means, dtype=np.float64)
    if class_means.ndim == 2:
        class_means = class_means[:, None, :]
    if class_means.ndim != 3 or class_means.shape[0] != 2 \
            or class_means.shape[2] != input_dim:
        raise ValidationError(
            f"class_means must be (2, {input_dim}) or (2, k, {input_dim}), "
            f"got {class_means.shape}"
        )

    if class_covariances is None:
        covs = [np.eye(input_dim), np.eye(input_dim)]
    else:
        covs = np.asarray(class_covariances, dtype=np.float64)
        if covs.shape == (input_dim, input_dim):
            covs = [covs, covs]
        elif covs.shape == (2, input_dim, input_dim):
            covs = [covs[0], covs[1]]
        else:
            raise ValidationError(
                "class_covariances must be (d, d) or (2, d, d)"
            )
        for c in covs:
            if not np.allclose(c, c.T, atol=1e-12):
                raise ValidationError("covariance must be symmetric")
            if np.linalg.eigvalsh(c).min() < -1e-10:
                raise ValidationError("covariance must be positive semi-definite")

    rng = np.random.default_rng(seed)
    n0 = n // 2
    counts = (n0, n - n0)
    blocks = []
    for c in (0, 1):
        comps = rng.integers(0, class_means.shape[1], size=counts[c])
        noise = rng.multivariate_normal(np.zeros(input_dim), covs[c],
                                        size=counts[c], method="svd")
        blocks.append(class_means[c][comps] + noise)
    X = np.vstack(blocks)
    y = np.concatenate([np.zeros(counts[0], dtype=np.int64),
                        np.ones(counts[1], dtype=np.int64)])
    perm = rng.permutation(n)
    return Dataset(X=X[perm], y=y[perm], name=name, num_classes=2)


# XOR component separation giving a ~10% optimal error rate (unit covariance)
XOR_SEPARATION_10PCT = 1.6


def generate_grid_mixture(n, seed=0, grid=3, separation=1.72, name="grid"):
    """Alternating-class grid of unit Gaussians; ~0.10 optimal error rate.

    Components sit on a grid x grid lattice with spacing 2*separation and
    classes assigned by cell parity (one surplus cell of class 0 is dropped
    to keep the mixture balanced).  At the default spacing the optimal error
    rate is ~0.10 and every cell border contributes reducible mistakes, so
    small labelled sets leave visible headroom.
    """
    offs = np.arange(grid) * 2.0 * separation
    offs = offs - offs.mean()
    c0, c1 = [], []
    for i in range(grid):
        for j in range(grid):
            (c0 if (i + j) % 2 == 0 else c1).append([offs[i], offs[j]])
    k = min(len(c0), len(c1))
    means = np.array([c0[:k], c1[:k]])
    return generate_synthetic(n, 2, class_means=means, seed=seed, name=name)


def generate_moons_mixture(n, seed=0, radius=4.0, lift=0.32, noise=1.3,
                           components=8, name="moons"):
    """Two interleaved crescents built from Gaussian components.

    Each class is a chain of ``components`` equal-weight Gaussians along a
    half-circle arc; the lower arc is shifted so the arms interleave.  At the
    default geometry the optimal error rate is ~0.10, concentrated along the
    thin band where the arms face each other, so predictive uncertainty
    tracks reducible boundary structure rather than ambient noise.
    """
    t = np.linspace(0.0, np.pi, components)
    upper = np.stack([radius * np.cos(t), radius * np.sin(t)], axis=1)
    lower = np.stack([radius - radius * np.cos(t),
                      -radius * np.sin(t) + radius * lift], axis=1)
    cov = np.eye(2) * noise ** 2
    return generate_synthetic(n, 2, class_means=np.array([upper, lower]),
                              class_covariances=cov, seed=seed, name=name)


def generate_pocket_benchmark(n, seed=0, name="pocket"):
    """Easy class pair plus a hard XOR pocket; optimal error rate ~0.10.

    Half of each class sits in a far-separated pair (learnable from a few
    dozen labels); the other half forms a tight XOR mixture around (0, 8)
    with a local optimal error near 0.2.  Overall optimal error is ~0.10,
    errors and predictive uncertainty both concentrate in the pocket, and
    accuracy keeps improving only as the pocket boundary gets sampled, which
    makes the benchmark discriminate acquisition strategies.
    """
    a = 1.2
    means = np.array([
        [[-5.0, 0.0], [-5.0, 0.0], [-a, 8 - a], [a, 8 + a]],
        [[5.0, 0.0], [5.0, 0.0], [a, 8 - a], [-a, 8 + a]],
    ])
    return generate_synthetic(n, 2, class_means=means, seed=seed, name=name)


def generate_xor_mixture(n, input_dim, separation=XOR_SEPARATION_10PCT,
                         seed=0, name="xor-mixture"):
    """Two-component-per-class XOR mixture; extra dimensions carry noise.

    Class 0 components sit at (+a, +a) and (-a, -a) in the first two
    dimensions, class 1 at (+a, -a) and (-a, +a), all with unit covariance.
    At the default separation the optimal error rate is about 0.10, but the
    boundary is not linear, so small labelled sets leave a lot on the table.
    """
    if input_dim < 2:
        raise ValidationError("xor mixture needs at least 2 dimensions")
    a = separation
    pad = np.zeros(input_dim - 2)
    means = np.array([
        [np.concatenate(([a, a], pad)), np.concatenate(([-a, -a], pad))],
        [np.concatenate(([a, -a], pad)), np.concatenate(([-a, a], pad))],
    ])
    return generate_synthetic(n, input_dim, class_means=means, seed=seed,
                              name=name)


def save_csv(path, dataset: Dataset):
    """Write `label,f0,f1,...` rows; floats use round-trip repr."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{i}" for i in range(dataset.input_dim)])
        for label, row in zip(dataset.y, dataset.X):
            writer.writerow([int(label)] + [repr(float(v)) for v in row])
    return path


def load_csv(path, name=None):
    """Load a `label,f0,f1,...` file; parse errors carry the line number."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        if not header or header[0].strip() != "label":
            raise ParseError("header must start with 'label'", line=1)
        d_x = len(header) - 1
        if d_x < 1:
            raise ParseError("header declares no feature columns", line=1)

        labels, rows = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d_x + 1:
                raise ParseError(
                    f"expected {d_x + 1} cells, got {len(row)}", line=line_no
                )
            try:
                label = int(row[0])
            except ValueError:
                raise ParseError(f"bad label {row[0]!r}", line=line_no) from None
            if label < 0:
                raise ParseError(f"negative label {label}", line=line_no)
            try:
                values = [float(v) for v in row[1:]]
            except ValueError:
                raise ParseError("non-numeric feature cell", line=line_no) from None
            if not all(np.isfinite(values)):
                raise ParseError("non-finite feature value", line=line_no)
            labels.append(label)
            rows.append(values)
    if not rows:
        raise ParseError("no data rows", line=2)
    return Dataset(X=np.array(rows), y=np.array(labels),
                   name=name or path.stem)


_IDX_IMAGE_MAGIC = 0x00000803
_IDX_LABEL_MAGIC = 0x00000801


def load_idx_images(path_images, path_labels, name=None):
    """Load an IDX image/label pair, flattened row-major and scaled to [0, 1]."""
    img_buf = Path(path_images).read_bytes()
    lbl_buf = Path(path_labels).read_bytes()
    if len(img_buf) < 16:
        raise FormatError("image file too short for an IDX header")
    magic, n, rows, cols = struct.unpack(">IIII", img_buf[:16])
    if magic != _IDX_IMAGE_MAGIC:
        raise FormatError(f"bad image magic 0x{magic:08x}")
    expected = n * rows * cols
    pixels = img_buf[16:]
    if len(pixels) != expected:
        raise FormatError(
            f"image payload has {len(pixels)} bytes, expected exactly {expected}"
        )

    if len(lbl_buf) < 8:
        raise FormatError("label file too short for an IDX header")
    lbl_magic, lbl_n = struct.unpack(">II", lbl_buf[:8])
    if lbl_magic != _IDX_LABEL_MAGIC:
        raise FormatError(f"bad label magic 0x{lbl_magic:08x}")
    if lbl_n != n:
        raise FormatError(f"{n} images but {lbl_n} labels")
    labels = lbl_buf[8:]
    if len(labels) != n:
        raise FormatError(
            f"label payload has {len(labels)} bytes, expected exactly {n}"
        )

    X = np.frombuffer(pixels, dtype=np.uint8).astype(np.float64) / 255.0
    X = X.reshape(n, rows * cols)
    y = np.frombuffer(labels, dtype=np.uint8).astype(np.int64)
    return Dataset(X=X, y=y, name=name or "idx")


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.6
    val: float = 0.2
    test: float = 0.2
    pool: float = 0.0
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        parts = (self.train, self.val, self.test, self.pool)
        if any(f < 0 for f in parts):
            raise ValidationError("split fractions must be non-negative")
        if abs(sum(parts) - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must sum to 1, got {sum(parts)}")

    @property
    def fractions(self):
        return {"train": self.train, "val": self.val, "test": self.test,
                "pool": self.pool}

    def to_dict(self):
        d = dict(self.fractions)
        d.update({"stratified": self.stratified, "seed": self.seed})
        return d


@dataclass
class Splits:
    train: Dataset
    val: Dataset
    test: Dataset
    pool: Dataset
    spec: SplitSpec = None
    normalization: dict = None

    def as_dict(self):
        return {"train": self.train, "val": self.val, "test": self.test,
                "pool": self.pool}

    def checksums(self):
        return {k: v.checksum() for k, v in self.as_dict().items()}


def _cut_sizes(m, fractions):
    """Largest-remainder-free exact partition via cumulative rounding."""
    cum = np.cumsum(fractions)
    bounds = [0] + [int(round(c * m)) for c in cum]
    bounds[-1] = m
    return [bounds[i + 1] - bounds[i] for i in range(len(fractions))]


def split(dataset: Dataset, spec: SplitSpec) -> Splits:
    """Disjoint, exhaustive, seeded split into train/val/test/pool."""
    names = ["train", "val", "test", "pool"]
    fracs = [spec.fractions[k] for k in names]
    rng = np.random.default_rng(spec.seed)
    buckets = {k: [] for k in names}

    if spec.stratified:
        n_parts = sum(1 for f in fracs if f > 0)
        for cls in np.unique(dataset.y):
            idx = np.flatnonzero(dataset.y == cls)
            if len(idx) < n_parts:
                raise ValidationError(
                    f"class {cls} has {len(idx)} samples, fewer than the "
                    f"{n_parts} requested splits"
                )
            idx = rng.permutation(idx)
            sizes = _cut_sizes(len(idx), fracs)
            start = 0
            for k, size in zip(names, sizes):
                buckets[k].append(idx[start:start + size])
                start += size
    else:
        idx = rng.permutation(len(dataset))
        sizes = _cut_sizes(len(idx), fracs)
        start = 0
        for k, size in zip(names, sizes):
            buckets[k].append(idx[start:start + size])
            start += size

    parts = {}
    for k in names:
        merged = np.sort(np.concatenate(buckets[k])) if buckets[k] else \
            np.array([], dtype=np.int64)
        parts[k] = dataset.subset(merged.astype(np.int64),
                                  name=f"{dataset.name}/{k}")
    return Splits(spec=spec, **parts)


def zscore_stats(X):
    """Per-feature mean/std; zero-variance features get std 1."""
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return {"mean": mean.tolist(), "std": std.tolist()}


def apply_zscore(X, stats):
    return (X - np.asarray(stats["mean"])) / np.asarray(stats["std"])


def standardize(splits: Splits) -> Splits:
    """Z-score all splits with statistics computed on the training split only."""
    stats = zscore_stats(splits.train.X)
    stats["source_split"] = "train"

    def transform(ds):
        return replace(ds, X=apply_zscore(ds.X, stats)) if len(ds) else ds

    return Splits(
        train=transform(splits.train), val=transform(splits.val),
        test=transform(splits.test), pool=transform(splits.pool),
        spec=splits.spec, normalization=stats,
    )


def dataset_meta(dataset: Dataset, splits: Splits = None) -> DatasetMeta:
    return DatasetMeta(
        name=dataset.name, input_dim=dataset.input_dim,
        num_classes=dataset.num_classes, size=len(dataset),
        split_checksums=splits.checksums() if splits else {},
        normalization=splits.normalization if splits else None,
    )


def download_with_checksum(url, dest, sha256):
    """Fetch a file and verify its digest; no data is vendored with the repo."""
    dest = Path(dest)
    with urllib.request.urlopen(url) as resp:
        payload = resp.read()
    digest = hashlib.sha256(payload).hexdigest()
    if digest != sha256:
        raise ValidationError(
            f"checksum mismatch for {url}: got {digest}, expected {sha256}"
        )
    dest.write_bytes(payload)
    return dest
