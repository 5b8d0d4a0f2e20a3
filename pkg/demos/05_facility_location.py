"""Minmax facility location: probability mass flows from cluster centers to
nearby nodes, the closed-form expected distance is minimized, and pipage
rounding returns a feasible set of at most K facilities."""

import numpy as np

from clusteropt import autodiff as ad
from clusteropt.config import RunConfig
from clusteropt.decisions import (
    expected_min_distance, facility_value, pipage_round, select_from_clusters,
)
from clusteropt.experiments import run_baseline, run_clusternet
from clusteropt.graphs import all_pairs_bfs, generate_sbm, make_graph

# The decode in isolation on a 9-node path: the center-of-mass nodes of the
# two halves are the natural facilities.
path = make_graph(9, [(i, i + 1) for i in range(8)])
table = all_pairs_bfs(path)
print("path of 9, K=2:")
print(f"  best possible objective: "
      f"{min(facility_value([i, j], table) for i in range(9) for j in range(i + 1, 9)):.0f}")

cfg = RunConfig(task="facility", mode="opt-only", k=2, iters=200, seed=1)
res = run_clusternet(cfg, graph=path)
print(f"  learned pipeline picks {res.solution['selected']} -> "
      f"objective {res.objective_full_graph:.0f}\n")

# How the soft selection machinery behaves on its own.
rng = np.random.default_rng(2)
x = rng.standard_normal((9, 4))
x /= np.linalg.norm(x, axis=1, keepdims=True)
sel = select_from_clusters(ad.leaf(x), ad.leaf(x[[2, 6]]), eta=20.0,
                           gamma=100.0, budget=2)
print(f"inclusion probabilities sum to {sel.x.value.sum():.3f} (budget 2)")
e = expected_min_distance(sel.x, table)
print(f"expected distances per node: {np.round(e.value[:, 0], 2)}")
hard = pipage_round(sel.x, trials=10, seed=0,
                    evaluator=lambda s: facility_value(s, table) if len(s) else np.inf)
print(f"pipage rounds to {hard.tolist()}\n")

# A larger instance against the classical heuristics.
g = generate_sbm([60] * 4, 0.12, 0.01, seed=9)
print(f"SBM n={g.n}: facility location with K=4")
cfg = RunConfig(task="facility", mode="opt-only", k=4, iters=150, seed=0)
res = run_clusternet(cfg, graph=g)
print(f"  learned pipeline      objective {res.objective_full_graph:.0f}")
for method in ("train-greedy", "train-gonzalez"):
    r = run_baseline(cfg.replace(method=method), graph=g)
    print(f"  {method:<21} objective {r.objective_full_graph:.0f}")
