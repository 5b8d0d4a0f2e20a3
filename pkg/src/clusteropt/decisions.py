"""Decoding cluster output into solutions, decision losses, and rounding.

Partition side: row-stochastic assignments are the soft solution; the loss
is the exact expectation of modularity under independent per-node sampling.
Selection side: centers allocate probability mass to nearby nodes, the mass
is squashed into per-node inclusion probabilities, and the loss is the
smooth maximum over nodes of the closed-form expected distance to the
sampled set. Rounding is argmax for partitions and repeated pipage for
selections.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graphs import DistanceTable, Graph


@dataclass
class SoftSelection:
    """Differentiable subset-selection decode: inclusion probabilities x.

    a (K x n): each center's unit of probability mass over nodes, rows sum
    to 1. b (n x 1): total mass per node. x (n x 1): squashed, budgeted
    probabilities, ||x||_1 <= budget.
    """

    x: ad.Node
    a: ad.Node
    b: ad.Node
    budget: int
    gamma: float
    eta: float


# ---------------------------------------------------------------------------
# partition objective

def modularity_loss(r: ad.Node, b_matrix: np.ndarray, m: int) -> ad.Node:
    """Expected modularity of labels sampled independently from rows of r.

    (1/2m) (Tr[r^T B r] + sum_u B_uu (1 - ||r_u||^2)); the second term is
    the diagonal correction that makes this the exact expectation for soft
    r (same-node pairs are sampled once, not twice).
    """
    bc = ad.constant(b_matrix)
    quad = ad.sum_all(ad.mul(r, ad.matmul(bc, r)))
    bdiag = ad.constant(np.diag(b_matrix).reshape(-1, 1))
    resid = ad.sub(ad.constant(np.ones((r.value.shape[0], 1))), ad.rowsum(ad.mul(r, r)))
    corr = ad.sum_all(ad.mul(bdiag, resid))
    return ad.scale(ad.add(quad, corr), 1.0 / (2.0 * m))


def modularity_value(labels, g: Graph) -> float:
    """Exact modularity Q of a hard labeling."""
    labels = np.asarray(labels)
    if labels.shape != (g.n,):
        raise ValueError(f"labels shape {labels.shape} != ({g.n},)")
    m = g.m
    if m == 0:
        return 0.0
    within = sum(1 for u, v in g.edges if labels[u] == labels[v])
    deg = g.degrees().astype(np.float64)
    dsum = np.zeros(int(labels.max()) + 1)
    np.add.at(dsum, labels, deg)
    return within / m - float((dsum**2).sum()) / (4.0 * m * m)


def round_partition(r) -> np.ndarray:
    """Hard labels by per-row argmax; ties take the lowest index."""
    values = r.value if isinstance(r, ad.Node) else np.asarray(r)
    return values.argmax(axis=1)


# ---------------------------------------------------------------------------
# selection decode

def squash_mass(b: ad.Node, gamma: float, mode: str = "shifted-half") -> ad.Node:
    """Map accumulated mass b >= 0 into [0, 1] probabilities.

    "shifted-half": 2*sigmoid(gamma*b) - 0.5, clamped into [0, 1]; 0.5 at
    b=0 and saturating at 1. "shifted-one": 2*sigmoid(gamma*b) - 1, which
    is 0 at b=0 and needs no clamp.
    """
    s = ad.sigmoid(ad.scale(b, gamma))
    if mode == "shifted-half":
        return ad.clamp(ad.add(ad.scale(s, 2.0), ad.constant(np.full(b.value.shape, -0.5))), 0.0, 1.0)
    if mode == "shifted-one":
        return ad.clamp(ad.add(ad.scale(s, 2.0), ad.constant(np.full(b.value.shape, -1.0))), 0.0, 1.0)
    raise ValueError(f"unknown squash mode {mode!r}")


def budget_rescale(x: ad.Node, budget: int) -> ad.Node:
    """Scale x down to ||x||_1 = budget when it exceeds the budget."""
    total = ad.sum_all(x)
    if total.value[0, 0] > budget:
        return ad.mul_scalar(x, ad.scale(ad.reciprocal(total), float(budget)))
    return x


def select_from_clusters(x_embed: ad.Node, mu: ad.Node, eta: float, gamma: float,
                         budget: int, squash: str = "shifted-half") -> SoftSelection:
    """Decode centers into inclusion probabilities over nodes.

    Each center spreads one unit of mass over nodes by softmin of eta times
    the center-to-node distance; per-node totals are squashed and rescaled
    into the budget.
    """
    d = ad.scale(ad.cosine_similarity(x_embed, mu), -1.0)   # n x K
    a = ad.softmin_rows(ad.transpose(d), eta)               # K x n, rows sum to 1
    b = ad.transpose(ad.colsum(a))                          # n x 1
    x = budget_rescale(squash_mass(b, gamma, squash), budget)
    return SoftSelection(x=x, a=a, b=b, budget=budget, gamma=gamma, eta=eta)


# ---------------------------------------------------------------------------
# selection objective

def default_dmax(table: DistanceTable) -> float:
    finite = table.dist[table.dist < table.sentinel]
    return float(finite.max()) + 1.0 if finite.size else 1.0


def expected_min_distance(x: ad.Node, table: DistanceTable, dmax: float | None = None,
                          order: np.ndarray | None = None) -> ad.Node:
    """Closed-form E[d(v, S)] per node under independent inclusions x, n x 1.

    For each v, with candidates sorted by distance, the closest included
    node is the first success of a sequence of independent trials:
    E = sum_i d_(i) x_(i) prod_{j<i} (1 - x_(j)) + dmax * prod_j (1 - x_j).
    The sort order is treated as constant under differentiation.
    """
    dist = table.dist
    n = dist.shape[0]
    if x.value.shape != (n, 1):
        raise ad.ShapeError(f"expected_min_distance: x {x.value.shape} vs n={n}")
    if dmax is None:
        dmax = default_dmax(table)
    if order is None:
        order = np.argsort(dist, axis=1, kind="stable")

    xv = np.clip(x.value[:, 0], 0.0, 1.0)
    xo = xv[order]
    do = np.take_along_axis(dist, order, axis=1)
    q = 1.0 - xo
    p_excl = np.ones((n, n))
    p_excl[:, 1:] = np.cumprod(q[:, :-1], axis=1)
    full = p_excl[:, -1] * q[:, -1]
    e = (do * xo * p_excl).sum(axis=1) + dmax * full

    def push(g):
        # suffix products over q, excluding self
        rev = np.cumprod(q[:, ::-1], axis=1)[:, ::-1]
        suf = np.ones((n, n))
        suf[:, :-1] = rev[:, 1:]
        # s[:, k] = sum_{i>k} d_i x_i prod_{k<j<i} q_j via reverse recurrence
        c = do * xo
        s = np.zeros((n, n))
        for k in range(n - 2, -1, -1):
            s[:, k] = c[:, k + 1] + q[:, k + 1] * s[:, k + 1]
        dedx = p_excl * (do - s - dmax * suf)
        gx = np.zeros(n)
        np.add.at(gx, order.ravel(), (g * dedx).ravel())
        ad._accum(x, gx.reshape(-1, 1))

    return ad.Node(e.reshape(-1, 1), (x,), push)


def smooth_max(e: ad.Node, temperature: float) -> ad.Node:
    """Softmax-weighted mean of a column vector; -> max as temperature grows."""
    et = ad.transpose(e)
    w = ad.softmax_rows(et, temperature)
    return ad.rowsum(ad.mul(w, et))


def expected_facility_loss(x, table: DistanceTable, softmax_temp: float = 100.0,
                           dmax: float | None = None,
                           order: np.ndarray | None = None) -> ad.Node:
    """Smooth maximum over nodes of the expected distance to the sampled set."""
    x_node = x.x if isinstance(x, SoftSelection) else x
    return smooth_max(expected_min_distance(x_node, table, dmax, order), softmax_temp)


def facility_value(selected, table: DistanceTable) -> float:
    """max_v min_{u in S} dist(v, u) for a hard subset."""
    idx = np.asarray(selected, dtype=np.intp)
    if idx.size == 0:
        raise ValueError("facility_value: empty selection")
    return float(table.dist[:, idx].min(axis=1).max())


# ---------------------------------------------------------------------------
# rounding

def _pipage_once(x: np.ndarray, rng, tol: float = 1e-12) -> np.ndarray:
    y = x.astype(np.float64).copy()
    frac = [i for i in range(len(y)) if tol < y[i] < 1.0 - tol]
    while len(frac) >= 2:
        i, j = frac[0], frac[1]
        up_i = min(1.0 - y[i], y[j])      # move mass j -> i
        up_j = min(y[i], 1.0 - y[j])      # move mass i -> j
        if rng.random() < up_j / (up_i + up_j):
            y[i] += up_i
            y[j] -= up_i
        else:
            y[i] -= up_j
            y[j] += up_j
        for idx in (j, i):  # drop whichever became integral
            if not tol < y[idx] < 1.0 - tol:
                y[idx] = round(y[idx])
                frac.remove(idx)
    if frac:
        y[frac[0]] = 1.0 if y[frac[0]] >= 0.5 else 0.0
    return y


def pipage_round(x, trials: int = 10, evaluator=None, seed: int = 0,
                 minimize: bool = True) -> np.ndarray:
    """Round inclusion probabilities to a subset with round(||x||_1) members.

    Each trial repeatedly moves mass between the two lowest-indexed
    fractional coordinates, randomizing direction so marginals are
    preserved. With an evaluator, the best-scoring trial wins; otherwise
    the first is returned.
    """
    xv = (x.value[:, 0] if isinstance(x, ad.Node) else np.asarray(x, dtype=np.float64).ravel())
    if np.any(xv < -1e-9) or np.any(xv > 1 + 1e-9):
        raise ValueError("pipage_round: entries must lie in [0, 1]")
    xv = np.clip(xv, 0.0, 1.0)
    rng = np.random.default_rng(seed)
    best = None
    best_score = None
    for _ in range(max(1, trials)):
        rounded = _pipage_once(xv, rng)
        selected = np.flatnonzero(rounded > 0.5)
        if evaluator is None:
            return selected
        score = evaluator(selected)
        better = best_score is None or (score < best_score if minimize else score > best_score)
        if better:
            best, best_score = selected, score
    return best
