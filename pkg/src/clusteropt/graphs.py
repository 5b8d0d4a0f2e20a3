"""Graph representation, dataset I/O, edge holdout splits and derived matrices.

Graphs are undirected, unweighted, with dense integer ids 0..n-1. All
derived matrices are dense float64 (n stays small enough that dense is the
simpler choice throughout).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path


Edge = tuple  # (u, v) with u < v


def _canon(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph: n nodes, a frozenset of (u, v) pairs with u < v."""

    n: int
    edges: frozenset
    features: np.ndarray | None = None
    names: list | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for u, v in self.edges:
            if not (0 <= u < v < self.n):
                raise ValueError(f"bad edge ({u}, {v}) for n={self.n}")

    @property
    def m(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        return d

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1.0
        return a

    def edge_array(self) -> np.ndarray:
        """Edges as an (m, 2) int array in sorted order (deterministic)."""
        if not self.edges:
            return np.zeros((0, 2), dtype=np.int64)
        return np.array(sorted(self.edges), dtype=np.int64)

    def with_edges(self, edges) -> "Graph":
        return Graph(self.n, frozenset(_canon(u, v) for u, v in edges),
                     self.features, self.names, dict(self.meta))


def make_graph(n: int, edges, features=None, names=None, meta=None) -> Graph:
    """Build a Graph, deduplicating and dropping self-loops."""
    clean = set()
    for u, v in edges:
        if u == v:
            continue
        clean.add(_canon(int(u), int(v)))
    return Graph(n, frozenset(clean), features, names, meta or {})


@dataclass(frozen=True)
class EdgeSplit:
    """Held-out edge split. train + held partition the original edge set."""

    train_edges: frozenset
    held_edges: frozenset
    fraction_held: float
    seed: int
    n: int

    def train_graph(self, base: Graph) -> Graph:
        return base.with_edges(self.train_edges)


@dataclass(frozen=True)
class DistanceTable:
    """All-pairs hop counts. Unreachable pairs hold the sentinel value n."""

    dist: np.ndarray
    sentinel: int


class EdgeListError(ValueError):
    pass


def load_edge_list(path, feature_path=None) -> Graph:
    """Read a whitespace-separated edge list ('#' comments allowed).

    Node labels may be arbitrary strings; they are remapped to dense ids in
    first-appearance order and kept on Graph.names. Duplicate edges and
    self-loops are dropped; the counts land in Graph.meta.
    """
    path = Path(path)
    ids: dict = {}
    names: list = []
    raw_edges = []
    dropped_loops = 0

    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise EdgeListError(f"{path}:{lineno}: expected two ids, got {text!r}")
            uid, vid = parts
            for lab in (uid, vid):
                if lab not in ids:
                    ids[lab] = len(names)
                    names.append(lab)
            u, v = ids[uid], ids[vid]
            if u == v:
                dropped_loops += 1
                continue
            raw_edges.append(_canon(u, v))

    edges = set(raw_edges)
    dropped_dupes = len(raw_edges) - len(edges)
    n = len(names)
    if dropped_loops or dropped_dupes:
        import warnings
        warnings.warn(f"{path}: dropped {dropped_loops} self-loops, {dropped_dupes} duplicate edges")

    features = None
    if feature_path is not None:
        features = np.loadtxt(feature_path, dtype=np.float64, ndmin=2)
        if features.shape[0] != n:
            raise EdgeListError(
                f"feature file has {features.shape[0]} rows for {n} nodes")

    return Graph(n, frozenset(edges), features, names,
                 {"dropped_self_loops": dropped_loops, "dropped_duplicates": dropped_dupes})


def split_edges(g: Graph, fraction_held: float, seed: int) -> EdgeSplit:
    """Uniformly hold out round(fraction_held * m) edges. All n nodes stay."""
    if not 0.0 < fraction_held < 1.0:
        raise ValueError(f"fraction_held must be in (0,1), got {fraction_held}")
    edges = sorted(g.edges)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(edges))
    k = int(round(fraction_held * len(edges)))
    held = frozenset(edges[i] for i in perm[:k])
    train = frozenset(edges[i] for i in perm[k:])
    return EdgeSplit(train, held, fraction_held, seed, g.n)


def save_split(split: EdgeSplit, path):
    payload = {
        "seed": split.seed,
        "fraction": split.fraction_held,
        "n": split.n,
        "held_edge_list": sorted(map(list, split.held_edges)),
        "train_edge_list": sorted(map(list, split.train_edges)),
    }
    Path(path).write_text(json.dumps(payload))


def load_split(path) -> EdgeSplit:
    payload = json.loads(Path(path).read_text())
    return EdgeSplit(
        frozenset(_canon(u, v) for u, v in payload["train_edge_list"]),
        frozenset(_canon(u, v) for u, v in payload["held_edge_list"]),
        payload["fraction"], payload["seed"], payload["n"])


def modularity_matrix(g: Graph) -> np.ndarray:
    """B[u,v] = A[u,v] - d_u d_v / (2m). Rows sum to zero."""
    if g.m == 0:
        raise ValueError("modularity matrix undefined for empty graph")
    a = g.adjacency()
    d = g.degrees().astype(np.float64)
    return a - np.outer(d, d) / (2.0 * g.m)


def normalized_adjacency(g: Graph) -> np.ndarray:
    """Symmetric GCN propagation matrix with self-loops added."""
    a = g.adjacency()
    np.fill_diagonal(a, 1.0)
    dinv = 1.0 / np.sqrt(a.sum(axis=1))
    return a * np.outer(dinv, dinv)


def all_pairs_bfs(g: Graph) -> DistanceTable:
    """Hop distances from every node via BFS; unreachable pairs become n."""
    sentinel = g.n
    if g.m == 0:
        d = np.full((g.n, g.n), float(sentinel))
        np.fill_diagonal(d, 0.0)
        return DistanceTable(d, sentinel)
    arr = g.edge_array()
    data = np.ones(2 * len(arr))
    rows = np.concatenate([arr[:, 0], arr[:, 1]])
    cols = np.concatenate([arr[:, 1], arr[:, 0]])
    sp = csr_matrix((data, (rows, cols)), shape=(g.n, g.n))
    d = shortest_path(sp, method="D", unweighted=True)
    d[np.isinf(d)] = float(sentinel)
    return DistanceTable(d, sentinel)


def largest_connected_component(g: Graph) -> tuple[Graph, np.ndarray]:
    """Subgraph on the largest component; returns (subgraph, original node ids)."""
    from scipy.sparse.csgraph import connected_components

    if g.n == 0:
        return g, np.array([], dtype=np.int64)
    arr = g.edge_array()
    sp = csr_matrix((np.ones(len(arr)), (arr[:, 0], arr[:, 1])), shape=(g.n, g.n)) \
        if len(arr) else csr_matrix((g.n, g.n))
    ncomp, labels = connected_components(sp, directed=False)
    keep = np.flatnonzero(labels == np.bincount(labels).argmax())
    remap = {int(old): i for i, old in enumerate(keep)}
    edges = [(remap[u], remap[v]) for u, v in g.edges if u in remap and v in remap]
    feats = g.features[keep] if g.features is not None else None
    names = [g.names[i] for i in keep] if g.names is not None else None
    meta = dict(g.meta)
    if "blocks" in meta:
        meta["blocks"] = np.asarray(meta["blocks"])[keep]
    return make_graph(len(keep), edges, feats, names, meta), keep


def generate_sbm(block_sizes, p_in, p_out: float, seed: int) -> Graph:
    """Stochastic block model sample; planted labels land in meta['blocks'].

    p_in may be one probability or one per block (heterogeneous densities
    give the blocks distinct degree profiles).
    """
    sizes = list(block_sizes)
    p_in_vec = np.full(len(sizes), p_in, dtype=np.float64) if np.isscalar(p_in) \
        else np.asarray(p_in, dtype=np.float64)
    if len(p_in_vec) != len(sizes):
        raise ValueError(f"{len(p_in_vec)} densities for {len(sizes)} blocks")
    if not (0.0 <= p_out <= p_in_vec.min() and p_in_vec.max() <= 1.0):
        raise ValueError(f"need 0 <= p_out <= min(p_in) and p_in <= 1, got {p_in}, {p_out}")
    n = sum(sizes)
    blocks = np.repeat(np.arange(len(sizes)), sizes)
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    p = np.where(blocks[iu] == blocks[ju], p_in_vec[blocks[iu]], p_out)
    chosen = rng.random(len(iu)) < p
    edges = list(zip(iu[chosen].tolist(), ju[chosen].tolist()))
    return make_graph(n, edges, meta={"blocks": blocks})


def degree_bucket_features(g: Graph, buckets: int = 16) -> np.ndarray:
    """One-hot membership in log-spaced degree buckets."""
    d = g.degrees().astype(np.float64)
    edges_ = np.unique(np.ceil(np.logspace(0, np.log10(max(d.max(), 2.0)), buckets - 1)))
    idx = np.searchsorted(edges_, d, side="left")  # degree 0 -> bucket 0
    x = np.zeros((g.n, buckets))
    x[np.arange(g.n), np.minimum(idx, buckets - 1)] = 1.0
    return x


def fallback_features(g: Graph, seed: int, buckets: int = 16, random_dims: int = 16) -> np.ndarray:
    """Features for graphs that ship none: degree buckets plus seeded noise.

    Degree buckets alone are constant on regular graphs, which collapses
    every GCN embedding to the same row; the random block breaks that
    symmetry while staying deterministic under the run seed.
    """
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((g.n, random_dims)) / np.sqrt(random_dims)
    return np.concatenate([degree_bucket_features(g, buckets), noise], axis=1)
