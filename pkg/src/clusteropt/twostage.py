"""Two-stage pipeline: GCN link predictor -> reconstructed graph -> solver.

The predictor is a two-layer GCN encoder with a dot-product decoder,
trained by binary cross-entropy on observed edges against uniformly
sampled non-edges, with per-epoch edge dropout on the message-passing
adjacency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from . import autodiff as ad
from .gcn import GcnParams, gcn_forward, init_params
from .graphs import EdgeSplit, Graph, make_graph, normalized_adjacency


@dataclass
class LinkPredictor:
    encoder: GcnParams
    features: np.ndarray
    embeddings: np.ndarray          # final n x p encoder output on the train graph
    negative_ratio: int
    edge_dropout: float
    losses: list = field(default_factory=list)

    def score_matrix(self) -> np.ndarray:
        """sigma(Z Z^T) with zero diagonal."""
        z = self.embeddings
        logits = z @ z.T
        p = np.where(logits >= 0, 1.0 / (1.0 + np.exp(-np.abs(logits))),
                     np.exp(-np.abs(logits)) / (1.0 + np.exp(-np.abs(logits))))
        np.fill_diagonal(p, 0.0)
        return p


@dataclass
class PredictedGraph:
    probs: np.ndarray   # symmetric, zero diagonal; binary in top-m mode
    mode: str           # "expected" | "top-m"

    def to_graph(self) -> Graph:
        n = self.probs.shape[0]
        iu, ju = np.nonzero(np.triu(self.probs, k=1) >= 0.5)
        return make_graph(n, list(zip(iu.tolist(), ju.tolist())))

    def weighted_modularity_matrix(self) -> np.ndarray:
        d = self.probs.sum(axis=1)
        two_m = d.sum()
        return self.probs - np.outer(d, d) / two_m


def _sample_negatives(n: int, count: int, forbidden: set, rng) -> np.ndarray:
    """Uniform (u, v) pairs avoiding self-loops and forbidden edges."""
    out = np.empty((count, 2), dtype=np.int64)
    filled = 0
    while filled < count:
        u = rng.integers(0, n, size=2 * (count - filled))
        v = rng.integers(0, n, size=2 * (count - filled))
        for uu, vv in zip(u, v):
            if uu == vv:
                continue
            e = (uu, vv) if uu < vv else (vv, uu)
            if e in forbidden:
                continue
            out[filled] = (uu, vv)
            filled += 1
            if filled == count:
                break
    return out


DEFAULT_HYPER = {
    "negative_ratio": 5,
    "edge_dropout": 0.2,
    "epochs": 200,
    "lr": 0.01,
    "hidden": 50,
    "embed": 50,
}


def train_link_predictor(split: EdgeSplit, features: np.ndarray,
                         hyper: dict | None = None, seed: int = 0) -> LinkPredictor:
    if not split.train_edges:
        raise ValueError("no training edges")
    h = dict(DEFAULT_HYPER, **(hyper or {}))
    n = split.n
    pos = np.array(sorted(split.train_edges), dtype=np.int64)
    train_set = set(split.train_edges)

    params = init_params(features.shape[1], h["hidden"], h["embed"], seed)
    opt = ad.AdamState(params.as_dict(), lr=h["lr"])
    ss = np.random.SeedSequence(seed)
    drop_rng, neg_rng = [np.random.default_rng(s) for s in ss.spawn(2)]

    base = make_graph(n, split.train_edges)
    losses = []
    for _ in range(h["epochs"]):
        if h["edge_dropout"] > 0:
            keep = drop_rng.random(len(pos)) >= h["edge_dropout"]
            msg_graph = base.with_edges(map(tuple, pos[keep]))
        else:
            msg_graph = base
        ahat = normalized_adjacency(msg_graph)

        w1 = ad.leaf(params.w1, requires_grad=True)
        w2 = ad.leaf(params.w2, requires_grad=True)
        z = gcn_forward(ahat, features, params, w1_node=w1, w2_node=w2)

        neg = _sample_negatives(n, h["negative_ratio"] * len(pos), train_set, neg_rng)
        sp = ad.pair_dot(z, pos[:, 0], pos[:, 1])
        sn = ad.pair_dot(z, neg[:, 0], neg[:, 1])
        # BCE with logits: softplus(s) - y*s summed over both classes
        total = ad.add(ad.sub(ad.sum_all(ad.softplus(sp)), ad.sum_all(sp)),
                       ad.sum_all(ad.softplus(sn)))
        loss = ad.scale(total, 1.0 / (len(pos) + len(neg)))
        ad.backward(loss)
        losses.append(float(loss.value[0, 0]))
        ad.adam_step(params.as_dict(), {"w1": w1.grad, "w2": w2.grad}, opt)

    z = gcn_forward(normalized_adjacency(base), features, params).value
    return LinkPredictor(params, features, z, h["negative_ratio"],
                         h["edge_dropout"], losses)


def predict_adjacency(model: LinkPredictor, split: EdgeSplit,
                      mode: str = "top-m") -> PredictedGraph:
    """Reconstruct an adjacency estimate from the trained predictor.

    expected: probability matrix with train edges clamped to 1. top-m:
    binary matrix of the train edges plus the |held| best-scoring
    non-train pairs, so the edge count matches the true graph's.
    """
    p = model.score_matrix()
    n = p.shape[0]
    train = np.array(sorted(split.train_edges), dtype=np.int64).reshape(-1, 2)

    if mode == "expected":
        probs = p.copy()
        if len(train):
            probs[train[:, 0], train[:, 1]] = 1.0
            probs[train[:, 1], train[:, 0]] = 1.0
        return PredictedGraph(probs, mode)

    if mode == "top-m":
        iu, ju = np.triu_indices(n, k=1)
        mask = np.ones(len(iu), dtype=bool)
        if len(train):
            train_flat = train[:, 0] * n + train[:, 1]
            mask &= ~np.isin(iu * n + ju, train_flat)
        cand = np.flatnonzero(mask)
        scores = p[iu[cand], ju[cand]]
        take = cand[np.argsort(-scores, kind="stable")[:len(split.held_edges)]]
        probs = np.zeros((n, n))
        for u, v in zip(iu[take], ju[take]):
            probs[u, v] = probs[v, u] = 1.0
        if len(train):
            probs[train[:, 0], train[:, 1]] = 1.0
            probs[train[:, 1], train[:, 0]] = 1.0
        return PredictedGraph(probs, mode)

    raise ValueError(f"unknown mode {mode!r}")


def export_scored_edges(model: LinkPredictor, path, threshold: float = 0.0):
    """Write 'u v score' lines for every pair scoring above threshold."""
    from pathlib import Path

    p = model.score_matrix()
    iu, ju = np.triu_indices(p.shape[0], k=1)
    keep = p[iu, ju] > threshold
    lines = [f"{u} {v} {p[u, v]:.6f}" for u, v in zip(iu[keep], ju[keep])]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def auc(model: LinkPredictor, split: EdgeSplit, seed: int = 0) -> float:
    """Rank AUC of held-out edges against an equal count of true non-edges."""
    if not split.held_edges:
        raise ValueError("no held edges")
    p = model.score_matrix()
    held = np.array(sorted(split.held_edges), dtype=np.int64)
    all_edges = set(split.train_edges) | set(split.held_edges)
    rng = np.random.default_rng(seed)
    neg = _sample_negatives(split.n, len(held), all_edges, rng)

    pos_scores = p[held[:, 0], held[:, 1]]
    neg_scores = p[neg[:, 0], neg[:, 1]]
    ranks = rankdata(np.concatenate([pos_scores, neg_scores]))
    e = len(held)
    return float((ranks[:e].sum() - e * (e + 1) / 2) / (e * len(neg)))
