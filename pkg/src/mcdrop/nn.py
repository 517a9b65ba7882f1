"""Feed-forward softmax classifier with Bernoulli dropout.

The model is a stack of fully-connected hidden layers followed by a linear
softmax head.  Dropout uses the inverted convention: a unit kept with
probability p is scaled by 1/p at mask time, so deterministic inference uses
the raw weights with no rescaling.

Mask placement: one mask after every hidden activation at rate ``alpha``,
plus one more mask on the head input (i.e. after the last hidden activation)
at rate ``beta``.  Rate-zero sites draw nothing and are skipped entirely.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, StateError, ValidationError
from .tensor import require_finite

ACTIVATIONS = ("relu", "identity")


@dataclass(frozen=True)
class LayerSpec:
    width: int
    activation: str = "relu"

    def __post_init__(self):
        if self.width < 1:
            raise ValidationError(f"layer width must be positive, got {self.width}")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(
                f"unknown activation {self.activation!r}, expected one of {ACTIVATIONS}"
            )


@dataclass
class NetworkConfig:
    """Architecture plus regularisation knobs for one classifier."""

    input_dim: int
    num_classes: int
    hidden_layers: list = field(default_factory=list)
    alpha: float = 0.0
    beta: float = 0.0
    l2_lambda: float = 5e-4
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValidationError("input_dim must be positive")
        if self.num_classes < 1:
            raise ValidationError("num_classes must be positive")
        for rate, name in ((self.alpha, "alpha"), (self.beta, "beta")):
            if not 0.0 <= rate < 1.0:
                raise ValidationError(f"{name} must be in [0, 1), got {rate}")
        if self.l2_lambda < 0:
            raise ValidationError("l2_lambda must be non-negative")
        self.hidden_layers = [
            spec if isinstance(spec, LayerSpec) else LayerSpec(*spec)
            for spec in self.hidden_layers
        ]

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "num_classes": self.num_classes,
            "hidden_layers": [[s.width, s.activation] for s in self.hidden_layers],
            "alpha": self.alpha,
            "beta": self.beta,
            "l2_lambda": self.l2_lambda,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            input_dim=d["input_dim"],
            num_classes=d["num_classes"],
            hidden_layers=[tuple(s) for s in d["hidden_layers"]],
            alpha=d["alpha"],
            beta=d["beta"],
            l2_lambda=d["l2_lambda"],
            seed=d["seed"],
        )


@dataclass(frozen=True)
class MaskSite:
    """One dropout mask position: applied to hidden activation ``hidden_index``."""

    hidden_index: int
    rate: float
    width: int

    @property
    def keep_probability(self):
        return 1.0 - self.rate


def softmax(logits):
    """Softmax of a 1-D logit vector (shift-invariant, float64)."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _log_softmax_rows(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _check_labels(y, num_classes):
    y = np.asarray(y)
    if y.ndim != 1:
        raise DimensionError(f"labels must be 1-D, got shape {y.shape}")
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        raise ValidationError(
            f"labels must lie in [0, {num_classes - 1}], got range "
            f"[{y.min()}, {y.max()}]"
        )
    return y.astype(np.int64)


class _Tape:
    """Recorded forward state consumed by backward()."""

    __slots__ = ("inputs", "zs", "masks", "logits")

    def __init__(self, inputs, zs, masks, logits):
        self.inputs = inputs  # activation entering each linear layer
        self.zs = zs          # pre-activation of each hidden layer
        self.masks = masks    # multiplier array per mask site, or None
        self.logits = logits


class Network:
    """Dense classifier; weights are float64 (fan_in, fan_out) matrices."""

    def __init__(self, config: NetworkConfig):
        self.config = config
        widths = (
            [config.input_dim]
            + [s.width for s in config.hidden_layers]
            + [config.num_classes]
        )
        rng = np.random.default_rng(config.seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self.mask_sites = self._build_mask_sites()
        self._tape = None

    def _build_mask_sites(self):
        sites = []
        hidden = self.config.hidden_layers
        for i, spec in enumerate(hidden):
            if self.config.alpha > 0.0:
                sites.append(MaskSite(i, self.config.alpha, spec.width))
        if hidden and self.config.beta > 0.0:
            sites.append(MaskSite(len(hidden) - 1, self.config.beta, hidden[-1].width))
        return sites

    @property
    def num_hidden(self):
        return len(self.config.hidden_layers)

    def copy(self):
        dup = Network(self.config)
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    def set_parameters(self, weights, biases):
        for w, new in zip(self.weights, weights):
            if w.shape != new.shape:
                raise DimensionError(f"weight shape {new.shape} != {w.shape}")
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]

    # -- dropout ---------------------------------------------------------

    def draw_masks(self, rng, n_rows):
        """Inverted-dropout multipliers, one (n_rows, width) array per site.

        Sites are consumed in forward order; values are 0 or 1/keep_p.
        """
        masks = []
        for site in self.mask_sites:
            keep = site.keep_probability
            kept = rng.random((n_rows, site.width)) < keep
            masks.append(kept.astype(np.float64) / keep)
        return masks

    # -- forward / loss / backward ---------------------------------------

    def _run(self, X, masks):
        """Forward pass; returns (logits, tape). ``masks=None`` is deterministic."""
        site_masks = {}
        if masks is not None:
            if len(masks) != len(self.mask_sites):
                raise DimensionError(
                    f"expected {len(self.mask_sites)} mask arrays, got {len(masks)}"
                )
            for site, m in zip(self.mask_sites, masks):
                site_masks.setdefault(site.hidden_index, []).append(m)

        a = X
        inputs = [X]
        zs = []
        for i, spec in enumerate(self.config.hidden_layers):
            z = a @ self.weights[i] + self.biases[i]
            zs.append(z)
            h = np.maximum(z, 0.0) if spec.activation == "relu" else z
            for m in site_masks.get(i, ()):
                h = h * m
            a = h
            inputs.append(a)
        logits = a @ self.weights[-1] + self.biases[-1]
        return logits, _Tape(inputs, zs, masks, logits)

    def _validate_batch(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.config.input_dim:
            raise DimensionError(
                f"batch must have shape (n, {self.config.input_dim}), got {X.shape}"
            )
        if X.shape[0] == 0:
            raise ValidationError("empty batch")
        require_finite(X, "input batch")
        return X

    def forward_batch(self, X, mode="deterministic", rng=None, masks=None,
                      record=False):
        """Row-wise softmax probabilities for a batch.

        ``mode="stochastic"`` draws fresh masks from ``rng`` unless ``masks``
        is supplied.  ``record=True`` keeps the tape for a later backward().
        """
        X = self._validate_batch(X)
        if mode == "stochastic" and masks is None:
            if rng is None:
                raise ValidationError("stochastic mode needs rng or masks")
            masks = self.draw_masks(rng, X.shape[0])
        elif mode == "deterministic":
            masks = None
        logits, tape = self._run(X, masks)
        if record:
            self._tape = tape
        probs = np.exp(_log_softmax_rows(logits))
        require_finite(probs, "softmax output")
        return probs

    def forward(self, x, mode="deterministic", pass_seed=0):
        """Softmax vector for one input of shape (input_dim,)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.config.input_dim,):
            raise DimensionError(
                f"input must have shape ({self.config.input_dim},), got {x.shape}"
            )
        require_finite(x, "input")
        rng = None
        if mode == "stochastic":
            rng = np.random.default_rng(pass_seed)
        return self.forward_batch(x[None, :], mode=mode, rng=rng)[0]

    def loss(self, X, y, masks=None):
        """Mean cross-entropy plus l2_lambda * sum of squared weights.

        Deterministic unless explicit ``masks`` are given (training draws its
        own masks; fixed masks keep finite-difference checks consistent).
        """
        X = self._validate_batch(X)
        y = _check_labels(y, self.config.num_classes)
        if len(y) != X.shape[0]:
            raise DimensionError("batch data and labels differ in length")
        logits, _ = self._run(X, masks)
        logp = _log_softmax_rows(logits)
        ce = -logp[np.arange(len(y)), y].mean()
        reg = self.config.l2_lambda * sum(np.sum(w * w) for w in self.weights)
        return float(ce + reg)

    def backward(self, y):
        """Gradients of loss() w.r.t. every weight and bias.

        Requires a preceding ``forward_batch(..., record=True)`` for the same
        batch; masks recorded there are respected here.
        Returns (weight_grads, bias_grads) mirroring self.weights/biases.
        """
        if self._tape is None:
            raise StateError("backward() called before a recorded forward pass")
        tape = self._tape
        y = _check_labels(y, self.config.num_classes)
        n = len(y)
        if n != tape.inputs[0].shape[0]:
            raise DimensionError("labels do not match the recorded batch")

        site_masks = {}
        if tape.masks is not None:
            for site, m in zip(self.mask_sites, tape.masks):
                site_masks.setdefault(site.hidden_index, []).append(m)

        delta = np.exp(_log_softmax_rows(tape.logits))
        delta[np.arange(n), y] -= 1.0
        delta /= n

        lam = self.config.l2_lambda
        w_grads = [None] * len(self.weights)
        b_grads = [None] * len(self.biases)
        w_grads[-1] = tape.inputs[-1].T @ delta + 2.0 * lam * self.weights[-1]
        b_grads[-1] = delta.sum(axis=0)
        d_act = delta @ self.weights[-1].T
        for i in reversed(range(self.num_hidden)):
            for m in reversed(site_masks.get(i, [])):
                d_act = d_act * m
            if self.config.hidden_layers[i].activation == "relu":
                d_act = d_act * (tape.zs[i] > 0.0)
            w_grads[i] = tape.inputs[i].T @ d_act + 2.0 * lam * self.weights[i]
            b_grads[i] = d_act.sum(axis=0)
            d_act = d_act @ self.weights[i].T
        return w_grads, b_grads

    def predict(self, X):
        """Deterministic argmax labels for a batch."""
        return np.argmax(self.forward_batch(X), axis=1)

    def accuracy(self, X, y):
        y = _check_labels(y, self.config.num_classes)
        return float(np.mean(self.predict(X) == y))
