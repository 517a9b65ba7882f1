"""Versioned JSON checkpoints.

Floats are serialised with Python's shortest-round-trip repr, so a
save -> load cycle reproduces forward passes bit for bit.  The loader
rejects documents whose format_version it does not know.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointFormatError
from .nn import Network, NetworkConfig
from .train import SgdState

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    network: Network
    optimizer_state: SgdState = None
    rng_state: dict = None

    def make_rng(self):
        """Rebuild the training generator, or None if no state was saved."""
        if self.rng_state is None:
            return None
        rng = np.random.default_rng()
        rng.bit_generator.state = self.rng_state
        return rng


def _array_doc(arr):
    return {"shape": list(arr.shape), "data": arr.ravel().tolist()}


def _array_from_doc(doc):
    return np.array(doc["data"], dtype=np.float64).reshape(doc["shape"])


def save_checkpoint(path, net: Network, optimizer_state: SgdState = None,
                    rng: np.random.Generator = None):
    doc = {
        "format_version": FORMAT_VERSION,
        "network_config": net.config.to_dict(),
        "weights": [_array_doc(w) for w in net.weights],
        "biases": [_array_doc(b) for b in net.biases],
        "optimizer_state": None,
        "rng_state": None,
    }
    if optimizer_state is not None:
        doc["optimizer_state"] = {
            "vw": [_array_doc(v) for v in optimizer_state.vw],
            "vb": [_array_doc(v) for v in optimizer_state.vb],
        }
    if rng is not None:
        doc["rng_state"] = rng.bit_generator.state
    Path(path).write_text(json.dumps(doc, sort_keys=True))
    return path


def load_checkpoint(path) -> Checkpoint:
    doc = json.loads(Path(path).read_text())
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(
            f"unknown checkpoint format_version {version!r}, "
            f"expected {FORMAT_VERSION}"
        )
    net = Network(NetworkConfig.from_dict(doc["network_config"]))
    net.set_parameters(
        [_array_from_doc(w) for w in doc["weights"]],
        [_array_from_doc(b) for b in doc["biases"]],
    )
    state = None
    if doc["optimizer_state"] is not None:
        state = SgdState(
            vw=[_array_from_doc(v) for v in doc["optimizer_state"]["vw"]],
            vb=[_array_from_doc(v) for v in doc["optimizer_state"]["vb"]],
        )
    return Checkpoint(network=net, optimizer_state=state,
                      rng_state=doc["rng_state"])
