"""Decision-focused graph optimization with a differentiable clustering layer.

Pipeline: GCN node embeddings -> soft k-means fixed point (differentiated
through one replayed update or the implicit function theorem) -> decoded
partition/subset solution -> decision objective as the training loss.
Baselines, a two-stage link-prediction pipeline, and an experiment harness
round out the package.
"""

from . import autodiff, baselines, decisions, gcn, graphs, softkmeans, twostage
from .config import RunConfig, inductive_defaults, load_config
from .experiments import (
    ExperimentResult, results_table, run_baseline, run_clusternet,
    run_inductive, run_method, run_twostage,
)

__all__ = [
    "autodiff", "baselines", "decisions", "gcn", "graphs", "softkmeans",
    "twostage", "RunConfig", "inductive_defaults", "load_config",
    "ExperimentResult", "results_table", "run_baseline", "run_clusternet",
    "run_inductive", "run_method", "run_twostage",
]
