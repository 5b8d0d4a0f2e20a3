"""Two-layer graph-convolutional encoder on the dense propagation matrix."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad


@dataclass
class GcnParams:
    w1: np.ndarray  # d x h
    w2: np.ndarray  # h x p
    dropout_p: float = 0.0

    def as_dict(self):
        return {"w1": self.w1, "w2": self.w2}

    def copy(self) -> "GcnParams":
        return GcnParams(self.w1.copy(), self.w2.copy(), self.dropout_p)


def init_params(d: int, h: int, p: int, seed: int, dropout_p: float = 0.0) -> GcnParams:
    """Glorot-uniform init, deterministic under seed."""
    if min(d, h, p) < 1:
        raise ValueError(f"dims must be positive, got {(d, h, p)}")
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    return GcnParams(glorot(d, h), glorot(h, p), dropout_p)


def gcn_forward(ahat: np.ndarray, x: np.ndarray, params: GcnParams,
                train_mode: bool = False, rng=None, w1_node=None, w2_node=None) -> ad.Node:
    """relu(Ahat @ drop(X) @ W1), then Ahat @ drop(H) @ W2. Returns an n x p node.

    Dropout hits the input of each layer and only in train_mode. Pass
    w1_node/w2_node to reuse existing leaves (the training loop does, so
    gradients land on them); otherwise fresh constant leaves are made.
    """
    if x.shape[0] != ahat.shape[0]:
        raise ad.ShapeError(f"gcn_forward: features {x.shape} vs adjacency {ahat.shape}")
    if x.shape[1] != params.w1.shape[0] or params.w1.shape[1] != params.w2.shape[0]:
        raise ad.ShapeError(
            f"gcn_forward: weight shapes {params.w1.shape}, {params.w2.shape} "
            f"inconsistent with feature dim {x.shape[1]}")

    a = ad.constant(ahat, name="ahat")
    xn = ad.constant(x, name="features")
    w1 = w1_node if w1_node is not None else ad.leaf(params.w1, name="w1")
    w2 = w2_node if w2_node is not None else ad.leaf(params.w2, name="w2")

    p = params.dropout_p if train_mode else 0.0
    if p > 0 and rng is None:
        raise ValueError("train_mode dropout needs an rng")

    h0 = ad.dropout(xn, p, rng) if p > 0 else xn
    h1 = ad.relu(ad.matmul(a, ad.matmul(h0, w1)))
    h1d = ad.dropout(h1, p, rng) if p > 0 else h1
    return ad.matmul(a, ad.matmul(h1d, w2))


def save_params(params: GcnParams, path):
    payload = {
        "version": 1,
        "dropout_p": params.dropout_p,
        "w1_shape": list(params.w1.shape),
        "w2_shape": list(params.w2.shape),
        "w1": params.w1.ravel().tolist(),
        "w2": params.w2.ravel().tolist(),
    }
    Path(path).write_text(json.dumps(payload))


def load_params(path) -> GcnParams:
    payload = json.loads(Path(path).read_text())
    if payload.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    w1 = np.array(payload["w1"]).reshape(payload["w1_shape"])
    w2 = np.array(payload["w2"]).reshape(payload["w2_shape"])
    return GcnParams(w1, w2, payload.get("dropout_p", 0.0))
