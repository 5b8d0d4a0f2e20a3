"""Graphs, holdout splits, and the derived matrices everything else runs on."""

import numpy as np

from clusteropt.graphs import (
    all_pairs_bfs, generate_sbm, modularity_matrix, normalized_adjacency,
    split_edges,
)

# A planted-partition graph: two communities of 30 nodes, dense inside,
# sparse across. The planted labels ride along in g.meta["blocks"].
g = generate_sbm([30, 30], p_in=0.3, p_out=0.02, seed=1)
print(f"sampled graph: n={g.n}, m={g.m}")
print(f"degrees: min={g.degrees().min()}, max={g.degrees().max()}")

# Hold out 60% of the edges, the observation regime used throughout.
split = split_edges(g, fraction_held=0.6, seed=7)
print(f"observed {len(split.train_edges)} edges, held out {len(split.held_edges)}")
observed = split.train_graph(g)
print(f"observed graph keeps all {observed.n} nodes")

# The modularity matrix drives the community objective. Its rows sum to
# zero, so a single community always scores exactly zero.
b = modularity_matrix(g)
print(f"modularity matrix row-sum magnitude: {np.abs(b.sum(axis=1)).max():.2e}")

# The propagation matrix feeds the graph-convolutional encoder.
ahat = normalized_adjacency(observed)
print(f"propagation matrix symmetric: {np.allclose(ahat, ahat.T)}")

# Facility location needs hop distances; unreachable pairs get sentinel n.
table = all_pairs_bfs(observed)
finite = table.dist[table.dist < table.sentinel]
print(f"observed-graph diameter: {finite.max():.0f} "
      f"(sentinel {table.sentinel} marks unreachable pairs)")
