"""Expert optimization baselines: agglomerative and spectral modularity
maximization, greedy and farthest-point facility location, plus the
structure-free learned baseline head.

The eigen-solves run on shifted power iteration with deflation; at the
graph sizes here (n <= ~4000) that keeps things dependency-free and is
plenty fast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import DistanceTable, Graph, modularity_matrix

VALID_BASELINES = ("cnm", "newman", "sc", "greedy", "gonzalez", "gcn-e2e")


@dataclass
class BaselineSpec:
    name: str
    k: int
    seed: int = 0

    def __post_init__(self):
        if self.name not in VALID_BASELINES:
            raise ValueError(f"unknown baseline {self.name!r}; valid: {VALID_BASELINES}")
        if self.k < 1:
            raise ValueError("k must be >= 1")


# ---------------------------------------------------------------------------
# greedy modularity agglomeration

def cnm(g: Graph, k: int | None = None, return_trace: bool = False):
    """Greedy modularity agglomeration, optionally forced down to k groups.

    Merges the best-gain pair while any gain is positive; with a community
    target k it keeps merging (least-bad pair) until exactly k remain, the
    behaviour that makes fixed-k comparisons meaningful. k=None stops at
    the natural optimum. Returns labels (and the (i, j, gain) merge trace
    on request).
    """
    if g.m == 0:
        raise ValueError("cnm needs at least one edge")
    m = float(g.m)
    deg = g.degrees().astype(np.float64)

    # community id -> {neighbor community: cross-edge count}
    cross: dict[int, dict[int, float]] = {u: {} for u in range(g.n)}
    for u, v in g.edges:
        cross[u][v] = cross[u].get(v, 0) + 1
        cross[v][u] = cross[v].get(u, 0) + 1
    dsum = {u: deg[u] for u in range(g.n)}
    members: dict[int, list] = {u: [u] for u in range(g.n)}
    trace = []

    def gain(i, j):
        return cross[i].get(j, 0.0) / m - dsum[i] * dsum[j] / (2.0 * m * m)

    while len(members) > 1:
        best = None
        best_gain = -np.inf
        for i in cross:
            for j in cross[i]:
                if j <= i:
                    continue
                dq = gain(i, j)
                if dq > best_gain + 1e-15 or \
                        (abs(dq - best_gain) <= 1e-15 and best is not None and (i, j) < best):
                    best, best_gain = (i, j), dq
        forced = k is not None and len(members) > k
        if best_gain <= 0.0 and not forced:
            break
        if best is None or (best_gain <= 0.0 and forced):
            # disconnected pairs may be the least bad: -dsum_i dsum_j/(2m^2)
            # is maximized by the two lightest communities
            light = sorted(members, key=lambda c: (dsum[c], c))[:2]
            i, j = min(light), max(light)
            if best is not None and best_gain > -dsum[i] * dsum[j] / (2.0 * m * m):
                i, j = best
        else:
            i, j = best
        trace.append((i, j, gain(i, j)))
        # fold j into i
        members[i].extend(members.pop(j))
        dsum[i] += dsum.pop(j)
        nbrs_j = cross.pop(j)
        for t, w in nbrs_j.items():
            if t == i:
                continue
            cross[t].pop(j)
            cross[t][i] = cross[t].get(i, 0) + w
            cross[i][t] = cross[i].get(t, 0) + w
        cross[i].pop(j, None)

    labels = np.empty(g.n, dtype=np.int64)
    for newid, (_, nodes) in enumerate(sorted(members.items())):
        labels[nodes] = newid
    return (labels, trace) if return_trace else labels


# ---------------------------------------------------------------------------
# power iteration machinery

def power_iteration(mat: np.ndarray, seed: int = 0, tol: float = 1e-8,
                    max_iters: int = 10_000, ortho: np.ndarray | None = None):
    """Leading (most positive) eigenpair of a symmetric matrix.

    Shifts by the Gershgorin bound so the target eigenvalue dominates in
    magnitude. `ortho` (rows = unit vectors) is projected out every step,
    which keeps deflation from leaking earlier eigenvectors back in.
    Returns (eigenvalue, vector, converged).
    """
    n = mat.shape[0]
    shift = np.abs(mat).sum(axis=1).max()
    rng = np.random.default_rng(seed)

    def project(w):
        if ortho is not None and len(ortho):
            w = w - ortho.T @ (ortho @ w)
        return w

    v = project(rng.standard_normal(n))
    norm = np.linalg.norm(v)
    if norm < 1e-300:
        return 0.0, np.zeros(n), False
    v /= norm
    lam = 0.0
    stable = 0
    for _ in range(max_iters):
        w = project(mat @ v + shift * v)
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return 0.0, v, False
        w /= norm
        lam_new = w @ (mat @ w)
        if np.linalg.norm(project(mat @ w) - lam_new * w) <= tol * max(1.0, abs(lam_new)):
            return lam_new, w, True
        # near-degenerate eigenvalues stall the residual while the Rayleigh
        # quotient freezes at machine precision; the iterate then lives in
        # the right eigenspace cluster, which is all clustering needs
        stable = stable + 1 if abs(lam_new - lam) <= 1e-12 * max(1.0, abs(lam_new)) else 0
        lam = lam_new
        if stable >= 50:
            return lam, w, True
        v = w
    # iterations exhausted: a mildly contaminated vector is still usable for
    # clustering; only genuinely wild iterates count as failure
    if np.linalg.norm(project(mat @ v) - lam * v) <= 1e-4 * max(1.0, abs(lam)):
        return lam, v, True
    return lam, v, False


def top_eigenvectors(mat: np.ndarray, k: int, seed: int = 0, tol: float = 1e-8,
                     max_iters: int = 10_000):
    """k leading eigenpairs by block power iteration (orthogonal iteration).

    QR re-orthonormalization every step keeps deflation implicit and stable
    when interior eigenvalues cluster; a k x k Rayleigh-Ritz rotation at the
    end separates the individual pairs. Returns (values, vectors) with
    values descending and vectors in matching columns.
    """
    n = mat.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got {k}")
    shift = np.abs(mat).sum(axis=1).max()
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    ritz_prev = None
    stable = 0
    converged = False
    for _ in range(max_iters):
        q, _ = np.linalg.qr(mat @ q + shift * q)
        small = q.T @ (mat @ q)
        ritz = np.sort(np.linalg.eigvalsh(small))[::-1]
        if ritz_prev is not None:
            drift = np.abs(ritz - ritz_prev).max()
            scale = max(1.0, float(np.abs(ritz).max()))
            if drift <= tol * scale:
                stable += 1
                if stable >= 5:
                    converged = True
                    break
            else:
                stable = 0
        ritz_prev = ritz
    if not converged:
        # accept a mildly unconverged subspace; clustering tolerates it
        resid = np.linalg.norm(mat @ q - q @ (q.T @ (mat @ q)))
        if resid > 1e-4 * max(1.0, float(np.abs(ritz_prev).max())):
            raise RuntimeError("block power iteration failed to converge")
    small = q.T @ (mat @ q)
    vals, rot = np.linalg.eigh((small + small.T) / 2)
    order = np.argsort(vals)[::-1]
    return vals[order], q @ rot[:, order]


# ---------------------------------------------------------------------------
# leading-eigenvector bisection

def _split_gain(bsub: np.ndarray, s: np.ndarray, m: float) -> float:
    return float(s @ bsub @ s) / (4.0 * m)


def newman_leading_eigenvector(g: Graph, k: int, seed: int = 0) -> np.ndarray:
    """Recursive spectral bisection of the modularity matrix.

    Splits the community whose best bisection gains the most modularity,
    while gain stays positive and fewer than k communities exist. A block
    whose power iteration stalls is left unsplit.
    """
    if g.m == 0:
        raise ValueError("newman needs at least one edge")
    b = modularity_matrix(g)
    m = float(g.m)
    groups = [np.arange(g.n)]

    def best_split(idx):
        if len(idx) < 2:
            return None
        bs = b[np.ix_(idx, idx)]
        bg = bs - np.diag(bs.sum(axis=1))
        try:
            lam, vec, ok = power_iteration(bg, seed=seed)
        except Exception:
            return None
        if not ok or lam <= 0:
            return None
        s = np.where(vec >= 0, 1.0, -1.0)
        if np.all(s == s[0]):
            return None
        dq = _split_gain(bg, s, m)
        if dq <= 0:
            return None
        return dq, idx[s > 0], idx[s < 0]

    while len(groups) < k:
        candidates = [(best_split(idx), pos) for pos, idx in enumerate(groups)]
        candidates = [(res, pos) for res, pos in candidates if res is not None]
        if not candidates:
            break
        (dq, left, right), pos = max(candidates, key=lambda t: t[0][0])
        groups[pos] = left
        groups.append(right)

    labels = np.empty(g.n, dtype=np.int64)
    for cid, idx in enumerate(groups):
        labels[idx] = cid
    return labels


# ---------------------------------------------------------------------------
# spectral clustering on the modularity matrix

def _lloyd(points: np.ndarray, k: int, rng):
    n = points.shape[0]
    # k-means++ seeding
    centers = [points[rng.integers(n)]]
    for _ in range(k - 1):
        d2 = ((points[:, None, :] - np.array(centers)[None]) ** 2).sum(-1).min(axis=1)
        total = d2.sum()
        centers.append(points[rng.choice(n, p=d2 / total)] if total > 0
                       else points[rng.integers(n)])
    centers = np.array(centers)
    labels = None
    for _ in range(100):
        d2 = ((points[:, None, :] - centers[None]) ** 2).sum(-1)
        new_labels = d2.argmin(axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            mask = labels == c
            if mask.any():
                centers[c] = points[mask].mean(axis=0)
            else:
                centers[c] = points[rng.integers(n)]
    inertia = ((points - centers[labels]) ** 2).sum()
    return labels, inertia


def hard_kmeans(points: np.ndarray, k: int, seed: int, restarts: int = 20) -> np.ndarray:
    rng = np.random.default_rng(seed)
    best, best_inertia = None, np.inf
    for _ in range(restarts):
        labels, inertia = _lloyd(points, k, rng)
        if inertia < best_inertia:
            best, best_inertia = labels, inertia
    return best


def spectral_clustering_modularity(g_or_b, k: int, seed: int = 0) -> np.ndarray:
    """k-means over the rows of the top-k eigenvectors of the modularity matrix.

    Accepts a Graph or a precomputed (possibly weighted) modularity matrix.
    """
    if isinstance(g_or_b, Graph):
        if g_or_b.m == 0:
            raise ValueError("spectral clustering needs at least one edge")
        b = modularity_matrix(g_or_b)
    else:
        b = np.asarray(g_or_b, dtype=np.float64)
    _, vecs = top_eigenvectors(b, k, seed=seed)
    return hard_kmeans(vecs, k, seed)


# ---------------------------------------------------------------------------
# facility location heuristics

def greedy_facility(table: DistanceTable, k: int) -> np.ndarray:
    """Iteratively add the node that most shrinks the max-min distance."""
    if k < 1:
        raise ValueError("k must be >= 1")
    d = table.dist
    n = d.shape[0]
    current = np.full(n, np.inf)
    chosen: list[int] = []
    for _ in range(min(k, n)):
        # objective after adding u, for every candidate u at once
        objs = np.minimum(current[None, :], d).max(axis=1)
        objs[chosen] = np.inf
        u = int(objs.argmin())  # argmin takes the lowest id on ties
        chosen.append(u)
        current = np.minimum(current, d[u])
    return np.array(sorted(chosen))


def gonzalez(table: DistanceTable, k: int, seed: int = 0) -> np.ndarray:
    """Farthest-point traversal from a seeded random start; 2-approximation."""
    if k < 1:
        raise ValueError("k must be >= 1")
    d = table.dist
    n = d.shape[0]
    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))
    chosen = [first]
    current = d[first].copy()
    while len(chosen) < min(k, n):
        u = int(current.argmax())
        chosen.append(u)
        current = np.minimum(current, d[u])
    return np.array(sorted(chosen))


# ---------------------------------------------------------------------------
# structure-free learned baseline

def gcn_e2e(g_train: Graph, features: np.ndarray, k: int, task: str, seed: int,
            hyper: dict | None = None):
    """Train a plain two-layer GCN to emit the decision variable directly.

    task "partition": row-softmax head over k communities, trained on the
    expected-modularity loss. task "selection": sigmoid head with budget
    rescale, trained on the expected facility loss. Returns (soft solution
    array, loss history).
    """
    from . import autodiff as ad
    from .decisions import budget_rescale, expected_facility_loss, modularity_loss
    from .gcn import gcn_forward, init_params
    from .graphs import all_pairs_bfs, normalized_adjacency

    if task not in ("partition", "selection"):
        raise ValueError(f"task must be partition or selection, got {task!r}")
    hyper = dict(hyper or {})
    hidden = hyper.get("hidden", 50)
    lr = hyper.get("lr", 0.01)
    iters = hyper.get("iters", 300)
    dropout_p = hyper.get("dropout", 0.0)
    out_dim = k if task == "partition" else 1

    ahat = normalized_adjacency(g_train)
    params = init_params(features.shape[1], hidden, out_dim, seed, dropout_p)
    opt = ad.AdamState(params.as_dict(), lr=lr)
    drop_rng = np.random.default_rng(seed + 1)
    if task == "partition":
        bmat = modularity_matrix(g_train)
    else:
        table = all_pairs_bfs(g_train)
        order = np.argsort(table.dist, axis=1, kind="stable")

    losses = []
    soft = None
    for _ in range(iters):
        w1 = ad.leaf(params.w1, requires_grad=True)
        w2 = ad.leaf(params.w2, requires_grad=True)
        logits = gcn_forward(ahat, features, params, train_mode=dropout_p > 0,
                             rng=drop_rng, w1_node=w1, w2_node=w2)
        if task == "partition":
            r = ad.softmax_rows(logits)
            loss = ad.scale(modularity_loss(r, bmat, g_train.m), -1.0)
        else:
            x = budget_rescale(ad.sigmoid(logits), k)
            loss = expected_facility_loss(x, table, order=order)
        ad.backward(loss)
        losses.append(float(loss.value[0, 0]))
        ad.adam_step(params.as_dict(), {"w1": w1.grad, "w2": w2.grad}, opt)

    # final forward without dropout
    logits = gcn_forward(ahat, features, params, train_mode=False)
    if task == "partition":
        soft = ad.softmax_rows(logits).value
    else:
        soft = budget_rescale(ad.sigmoid(logits), k).value
    return soft, losses
