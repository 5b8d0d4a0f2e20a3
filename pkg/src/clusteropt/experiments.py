"""Experiment drivers: the end-to-end cluster pipeline, baseline and
two-stage dispatch, inductive training across graph collections, result
serialization, and table aggregation.

Training only ever sees the observed-edge view of a graph; evaluation only
ever reads the full view. The two are kept in distinct wrapper types so a
loss can't silently read held-out edges.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .baselines import (
    cnm, gcn_e2e, gonzalez, greedy_facility, newman_leading_eigenvector,
    spectral_clustering_modularity,
)
from .config import RunConfig
from .decisions import (
    expected_facility_loss, facility_value, modularity_loss, modularity_value,
    pipage_round, round_partition, select_from_clusters,
)
from .gcn import GcnParams, gcn_forward, init_params
from .graphs import (
    DistanceTable, EdgeSplit, Graph, all_pairs_bfs, fallback_features,
    largest_connected_component, load_edge_list, modularity_matrix,
    normalized_adjacency, split_edges,
)
from .softkmeans import ClusterConfig, kmeans_forward, kmeans_pp_init, replay_update
from .twostage import PredictedGraph, auc, predict_adjacency, train_link_predictor


class NumericalError(RuntimeError):
    """Training diverged (non-finite loss); carries a diagnostic dump."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


@dataclass(frozen=True)
class TrainView:
    """Observed-edge view. The only graph the differentiable loss may read."""
    graph: Graph


@dataclass(frozen=True)
class EvalView:
    """Full-graph view. The only graph reported objectives may read."""
    graph: Graph


@dataclass
class ExperimentResult:
    method: str
    task: str
    mode: str
    objective_full_graph: float
    objective_train_graph: float
    runtime_train_s: float
    runtime_forward_s: float
    config: dict
    solution: dict          # {"labels": [...]} or {"selected": [...]}
    achieved_k: int
    extras: dict = field(default_factory=dict)

    def solution_payload(self) -> dict:
        """The deterministic portion: same config + seed => identical bytes."""
        return {"method": self.method, "task": self.task, "mode": self.mode,
                "config": self.config, "solution": self.solution}

    def to_json(self) -> str:
        payload = {
            "method": self.method, "task": self.task, "mode": self.mode,
            "objective_full_graph": self.objective_full_graph,
            "objective_train_graph": self.objective_train_graph,
            "runtime_train_s": self.runtime_train_s,
            "runtime_forward_s": self.runtime_forward_s,
            "config": self.config, "solution": self.solution,
            "achieved_k": self.achieved_k, "extras": self.extras,
        }
        return json.dumps(payload, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ExperimentResult":
        d = json.loads(text)
        return ExperimentResult(
            d["method"], d["task"], d["mode"], d["objective_full_graph"],
            d["objective_train_graph"], d["runtime_train_s"],
            d["runtime_forward_s"], d["config"], d["solution"],
            d["achieved_k"], d.get("extras", {}))

    def save(self, directory, stem: str):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / f"{stem}.json").write_text(self.to_json())
        (directory / f"{stem}.solution.json").write_text(
            json.dumps(self.solution_payload(), sort_keys=True))


# ---------------------------------------------------------------------------
# dataset plumbing

def load_dataset(cfg: RunConfig) -> Graph:
    if cfg.edge_path is None:
        raise ValueError("config has no edge_path")
    return load_edge_list(cfg.edge_path, cfg.feature_path)


def graph_digest(g: Graph) -> int:
    """Stable content fingerprint (PYTHONHASHSEED-independent)."""
    import zlib
    return zlib.crc32(g.edge_array().tobytes()) ^ g.n


def features_for(g: Graph, cfg: RunConfig) -> np.ndarray:
    """Features for the graph view actually being trained on.

    auto: shipped features, else the degree-bucket + noise fallback.
    buckets: degree buckets only (fully transferable across graphs).
    buckets+noise: force the fallback even when features ship. The noise
    block is seeded per graph content so cross-graph training can't
    memorize one noise matrix (it would not transfer), while runs stay
    deterministic for a fixed config and graph.
    """
    from .graphs import degree_bucket_features

    if cfg.feature_mode == "buckets":
        return degree_bucket_features(g)
    if cfg.feature_mode == "auto" and g.features is not None:
        return g.features
    seed = int(np.random.SeedSequence((cfg.seed, graph_digest(g))).generate_state(1)[0])
    return fallback_features(g, seed)


def prepare_views(cfg: RunConfig, graph: Graph, split: EdgeSplit | None = None):
    """Restrict facility runs to the largest component, split if learning.

    Returns (TrainView, EvalView, split or None).
    """
    g = graph
    if cfg.task == "facility":
        g, _ = largest_connected_component(g)
    if cfg.mode == "opt-only":
        return TrainView(g), EvalView(g), None
    if split is None:
        split = split_edges(g, cfg.fraction_held, cfg.seed)
    return TrainView(split.train_graph(g)), EvalView(g), split


def evaluate_solution(task: str, solution: dict, view: EvalView,
                      table: DistanceTable | None = None) -> float:
    g = view.graph
    if task == "community":
        return modularity_value(np.array(solution["labels"]), g)
    table = table if table is not None else all_pairs_bfs(g)
    return facility_value(np.array(solution["selected"]), table)


# ---------------------------------------------------------------------------
# the main pipeline

@dataclass
class PipelineState:
    params: GcnParams
    centers: np.ndarray | None = None
    losses: list = field(default_factory=list)
    gradient_updates: int = 0


def _facility_setup(g: Graph):
    table = all_pairs_bfs(g)
    order = np.argsort(table.dist, axis=1, kind="stable")
    return table, order


def train_cluster_pipeline(train: TrainView, feats: np.ndarray, cfg: RunConfig,
                           init_params_from: GcnParams | None = None,
                           iters: int | None = None) -> PipelineState:
    """Gradient loop: embed, run k-means steps, replay one update, decode, step.

    Centers persist across iterations (warm start), so the short per-
    iteration k-means schedule still tracks a fixed point over training.
    """
    g = train.graph
    beta = cfg.resolved_beta
    iters = cfg.iters if iters is None else iters
    ahat = normalized_adjacency(g)

    if cfg.task == "community":
        if g.m == 0:
            raise ValueError("training graph has no edges")
        bmat = modularity_matrix(g)
        table = order = None
    else:
        table, order = _facility_setup(g)
        bmat = None

    if init_params_from is not None:
        params = init_params_from.copy()
        params.dropout_p = cfg.dropout
    else:
        params = init_params(feats.shape[1], cfg.hidden, cfg.embed, cfg.seed, cfg.dropout)
    opt = ad.AdamState(params.as_dict(), lr=cfg.lr)
    drop_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1)))
    state = PipelineState(params)

    for it in range(iters):
        w1 = ad.leaf(params.w1, requires_grad=True)
        w2 = ad.leaf(params.w2, requires_grad=True)
        z = gcn_forward(ahat, feats, params, train_mode=cfg.dropout > 0,
                        rng=drop_rng, w1_node=w1, w2_node=w2)
        zn = ad.l2_normalize_rows(z)
        if not np.all(np.isfinite(zn.value)):
            raise NumericalError(
                f"embeddings diverged at iteration {it}",
                dump={"iteration": it, "losses": state.losses})
        if state.centers is None:
            state.centers = kmeans_pp_init(zn.value, cfg.k, cfg.seed)
        kcfg = ClusterConfig(cfg.k, beta, max_iters=cfg.updates_at(it), tol=0.0)
        kstate = kmeans_forward(zn.value, state.centers, kcfg)
        state.centers = kstate.centers
        mu_node, r_node = replay_update(zn, kstate.centers, beta)

        if cfg.task == "community":
            loss = ad.scale(modularity_loss(r_node, bmat, g.m), -1.0)
        else:
            sel = select_from_clusters(zn, mu_node, cfg.resolved_eta, cfg.gamma,
                                       cfg.k, cfg.squash)
            loss = expected_facility_loss(sel, table, cfg.softmax_temp, order=order)

        if not np.isfinite(loss.value[0, 0]):
            raise NumericalError(
                f"loss diverged at iteration {it}",
                dump={"iteration": it, "losses": state.losses,
                      "centers": None if state.centers is None else state.centers.tolist()})
        ad.backward(loss)
        state.losses.append(float(loss.value[0, 0]))
        ad.adam_step(params.as_dict(), {"w1": w1.grad, "w2": w2.grad}, opt)
        state.gradient_updates += 1

    return state


def decode_cluster_solution(train: TrainView, feats: np.ndarray, cfg: RunConfig,
                            state: PipelineState, table=None, order=None):
    """Final forward pass (no dropout), cluster to convergence, decode, round.

    Partition decode tries the warm-started centers plus a few fresh
    seedings and keeps the candidate with the best objective on the
    observed graph (never the held-out edges).
    """
    g = train.graph
    beta = cfg.resolved_beta
    z = gcn_forward(normalized_adjacency(g), feats, state.params)
    zn = ad.l2_normalize_rows(z)
    inits = []
    if state.centers is not None:
        inits.append(state.centers)
    needed = max(1, cfg.decode_restarts - len(inits))
    inits += [kmeans_pp_init(zn.value, cfg.k, cfg.seed + 31 * j) for j in range(needed)]
    kcfg = ClusterConfig(cfg.k, beta, max_iters=100, tol=1e-4)

    if cfg.task == "community":
        best = None
        for init in inits:
            cand = kmeans_forward(zn.value, init, kcfg)
            labels = round_partition(cand.assignments)
            score = modularity_value(labels, g)
            if best is None or score > best[0]:
                best = (score, labels, cand)
        _, labels, kstate = best
        return {"labels": labels.tolist()}, kstate
    kstate = kmeans_forward(zn.value, inits[0], kcfg)

    if table is None:
        table, order = _facility_setup(g)
    mu_node = ad.constant(kstate.centers)
    sel = select_from_clusters(zn, mu_node, cfg.resolved_eta, cfg.gamma,
                               cfg.k, cfg.squash)
    selected = pipage_round(
        sel.x, trials=cfg.rounding_trials,
        evaluator=lambda s: facility_value(s, table) if len(s) else np.inf,
        seed=int(np.random.SeedSequence((cfg.seed, 2)).generate_state(1)[0]))
    return {"selected": [int(i) for i in selected]}, kstate


def run_clusternet(cfg: RunConfig, graph: Graph | None = None,
                   split: EdgeSplit | None = None) -> ExperimentResult:
    g_full = graph if graph is not None else load_dataset(cfg)
    train, full, split = prepare_views(cfg, g_full, split)
    feats = features_for(train.graph, cfg)

    t0 = time.perf_counter()
    state = train_cluster_pipeline(train, feats, cfg)
    train_time = time.perf_counter() - t0

    t0 = time.perf_counter()
    if cfg.task == "facility":
        table_train, order = _facility_setup(train.graph)
        solution, kstate = decode_cluster_solution(train, feats, cfg, state,
                                                   table_train, order)
    else:
        table_train = None
        solution, kstate = decode_cluster_solution(train, feats, cfg, state)
    forward_time = time.perf_counter() - t0

    obj_full = evaluate_solution(cfg.task, solution, full)
    obj_train = evaluate_solution(cfg.task, solution, EvalView(train.graph),
                                  table_train)
    achieved = len(set(solution.get("labels", []))) or len(solution.get("selected", []))
    return ExperimentResult(
        "clusternet", cfg.task, cfg.mode, obj_full, obj_train, train_time,
        forward_time, cfg.snapshot(), solution, achieved,
        extras={"final_loss": state.losses[-1] if state.losses else None,
                "gradient_updates": state.gradient_updates,
                "kmeans_converged": bool(kstate.converged)})


# ---------------------------------------------------------------------------
# baselines and two-stage

def _run_partition_algorithm(name: str, g: Graph, cfg: RunConfig):
    if name == "cnm":
        return cnm(g, cfg.k)
    if name == "newman":
        return newman_leading_eigenvector(g, cfg.k, seed=cfg.seed)
    if name == "sc":
        return spectral_clustering_modularity(g, cfg.k, seed=cfg.seed)
    raise ValueError(f"unknown partition algorithm {name!r}")


def _run_selection_algorithm(name: str, table: DistanceTable, cfg: RunConfig):
    if name == "greedy":
        return greedy_facility(table, cfg.k)
    if name == "gonzalez":
        return gonzalez(table, cfg.k, seed=cfg.seed)
    raise ValueError(f"unknown selection algorithm {name!r}")


def run_baseline(cfg: RunConfig, graph: Graph | None = None,
                 split: EdgeSplit | None = None) -> ExperimentResult:
    """Dispatch train-* (observed-subgraph) and gcn-e2e baselines."""
    g_full = graph if graph is not None else load_dataset(cfg)
    train, full, split = prepare_views(cfg, g_full, split)
    algorithm = cfg.method.split("-", 1)[1] if cfg.method.startswith("train-") else cfg.method

    t0 = time.perf_counter()
    extras = {}
    if algorithm == "gcn-e2e":
        feats = features_for(train.graph, cfg)
        task = "partition" if cfg.task == "community" else "selection"
        soft, losses = gcn_e2e(train.graph, feats, cfg.k, task, cfg.seed,
                               {"hidden": cfg.hidden, "lr": cfg.lr,
                                "iters": cfg.iters, "dropout": cfg.dropout})
        if cfg.task == "community":
            solution = {"labels": round_partition(soft).tolist()}
        else:
            table_train, _ = _facility_setup(train.graph)
            selected = pipage_round(
                soft.ravel(), trials=cfg.rounding_trials,
                evaluator=lambda s: facility_value(s, table_train) if len(s) else np.inf,
                seed=int(np.random.SeedSequence((cfg.seed, 2)).generate_state(1)[0]))
            solution = {"selected": [int(i) for i in selected]}
        extras["final_loss"] = losses[-1]
    elif cfg.task == "community":
        labels = _run_partition_algorithm(algorithm, train.graph, cfg)
        solution = {"labels": labels.tolist()}
    else:
        table_train, _ = _facility_setup(train.graph)
        selected = _run_selection_algorithm(algorithm, table_train, cfg)
        solution = {"selected": [int(i) for i in selected]}
    train_time = time.perf_counter() - t0

    obj_full = evaluate_solution(cfg.task, solution, full)
    obj_train = evaluate_solution(cfg.task, solution, EvalView(train.graph))
    achieved = len(set(solution.get("labels", []))) or len(solution.get("selected", []))
    return ExperimentResult(cfg.method, cfg.task, cfg.mode, obj_full, obj_train,
                            train_time, 0.0, cfg.snapshot(), solution, achieved, extras)


TWOSTAGE_DEFAULT_MODES = {
    "cnm": "top-m", "newman": "top-m", "greedy": "top-m", "gonzalez": "top-m",
    "sc": "expected",
}


def run_algorithm_on_predicted(pred: PredictedGraph, algorithm: str,
                               cfg: RunConfig) -> dict:
    """Decode a combinatorial solution from a reconstructed graph."""
    if cfg.task == "community":
        if algorithm == "sc" and pred.mode == "expected":
            labels = spectral_clustering_modularity(
                pred.weighted_modularity_matrix(), cfg.k, seed=cfg.seed)
        else:
            labels = _run_partition_algorithm(algorithm, pred.to_graph(), cfg)
        return {"labels": labels.tolist()}
    table = all_pairs_bfs(pred.to_graph())
    selected = _run_selection_algorithm(algorithm, table, cfg)
    return {"selected": [int(i) for i in selected]}


def run_twostage(cfg: RunConfig, graph: Graph | None = None,
                 split: EdgeSplit | None = None,
                 predicted: PredictedGraph | None = None) -> ExperimentResult:
    if not cfg.method.startswith("2stage-"):
        raise ValueError(f"not a two-stage method: {cfg.method!r}")
    if cfg.mode == "opt-only":
        raise ValueError("two-stage needs held-out edges; use mode learn+opt")
    algorithm = cfg.method.split("-", 1)[1]
    g_full = graph if graph is not None else load_dataset(cfg)
    train, full, split = prepare_views(cfg, g_full, split)

    extras = {}
    t0 = time.perf_counter()
    if predicted is None:
        feats = features_for(train.graph, cfg)
        model = train_link_predictor(split, feats, seed=cfg.seed)
        extras["auc"] = auc(model, split, seed=cfg.seed)
        mode = cfg.twostage_mode or TWOSTAGE_DEFAULT_MODES[algorithm]
        predicted = predict_adjacency(model, split, mode)
    extras["predicted_mode"] = predicted.mode
    solution = run_algorithm_on_predicted(predicted, algorithm, cfg)
    train_time = time.perf_counter() - t0

    obj_full = evaluate_solution(cfg.task, solution, full)
    obj_train = evaluate_solution(cfg.task, solution, EvalView(train.graph))
    achieved = len(set(solution.get("labels", []))) or len(solution.get("selected", []))
    return ExperimentResult(cfg.method, cfg.task, cfg.mode, obj_full, obj_train,
                            train_time, 0.0, cfg.snapshot(), solution, achieved, extras)


def run_method(cfg: RunConfig, graph: Graph | None = None,
               split: EdgeSplit | None = None) -> ExperimentResult:
    if cfg.method == "clusternet":
        return run_clusternet(cfg, graph, split)
    if cfg.method.startswith("2stage-"):
        return run_twostage(cfg, graph, split)
    return run_baseline(cfg, graph, split)


# ---------------------------------------------------------------------------
# inductive setting

def train_inductive(train_graphs: list[Graph], cfg: RunConfig,
                    limit_to_first: bool = False) -> tuple[GcnParams, dict]:
    """Shared-parameter training on a graph collection (sum of decision losses).

    Each training graph keeps its own warm-started centers; every iteration
    accumulates all per-graph gradients into one Adam step.
    """
    graphs = train_graphs[:1] if limit_to_first else train_graphs
    beta = cfg.resolved_beta
    setups = []
    for i, g in enumerate(graphs):
        obs_split = split_edges(g, cfg.fraction_held, cfg.seed + i)
        g_train = obs_split.train_graph(g)
        feats = features_for(g_train, cfg)
        entry = {
            "ahat": normalized_adjacency(g_train),
            "feats": feats,
            "g": g_train,
        }
        if cfg.task == "community":
            entry["bmat"] = modularity_matrix(g_train)
            entry["m"] = g_train.m
        else:
            entry["table"], entry["order"] = _facility_setup(g_train)
        setups.append(entry)

    d = setups[0]["feats"].shape[1]
    params = init_params(d, cfg.hidden, cfg.embed, cfg.seed, cfg.dropout)
    opt = ad.AdamState(params.as_dict(), lr=cfg.lr)
    drop_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 3)))
    centers = [None] * len(setups)
    losses = []

    for it in range(cfg.iters):
        w1 = ad.leaf(params.w1, requires_grad=True)
        w2 = ad.leaf(params.w2, requires_grad=True)
        total = None
        for gi, s in enumerate(setups):
            z = gcn_forward(s["ahat"], s["feats"], params,
                            train_mode=cfg.dropout > 0, rng=drop_rng,
                            w1_node=w1, w2_node=w2)
            zn = ad.l2_normalize_rows(z)
            if centers[gi] is None:
                centers[gi] = kmeans_pp_init(zn.value, cfg.k, cfg.seed)
            kcfg = ClusterConfig(cfg.k, beta, max_iters=cfg.updates_at(it), tol=0.0)
            kstate = kmeans_forward(zn.value, centers[gi], kcfg)
            centers[gi] = kstate.centers
            mu_node, r_node = replay_update(zn, kstate.centers, beta)
            if cfg.task == "community":
                loss = ad.scale(modularity_loss(r_node, s["bmat"], s["m"]), -1.0)
            else:
                sel = select_from_clusters(zn, mu_node, cfg.resolved_eta,
                                           cfg.gamma, cfg.k, cfg.squash)
                loss = expected_facility_loss(sel, s["table"], cfg.softmax_temp,
                                              order=s["order"])
            total = loss if total is None else ad.add(total, loss)
        if not np.isfinite(total.value[0, 0]):
            raise NumericalError(f"inductive loss diverged at iteration {it}")
        ad.backward(total)
        losses.append(float(total.value[0, 0]))
        ad.adam_step(params.as_dict(), {"w1": w1.grad, "w2": w2.grad}, opt)

    return params, {"losses": losses}


def apply_to_test_graph(g_test: Graph, cfg: RunConfig, params: GcnParams | None,
                        finetune_iters: int = 0, seed_offset: int = 0) -> ExperimentResult:
    """Single-graph inference on 40% observed edges, optionally fine-tuned.

    params None means train from scratch (finetune-only); finetune_iters 0
    with params means pure forward inference (zero gradient updates).
    """
    local = cfg.replace(mode="learn+opt", seed=cfg.seed + seed_offset)
    train, full, split = prepare_views(local, g_test)
    feats = features_for(train.graph, local)

    t0 = time.perf_counter()
    updates = 0
    if params is None or finetune_iters > 0:
        state = train_cluster_pipeline(train, feats, local,
                                       init_params_from=params,
                                       iters=finetune_iters)
        updates = state.gradient_updates
    else:
        state = PipelineState(params.copy())
    train_time = time.perf_counter() - t0

    t0 = time.perf_counter()
    solution, kstate = decode_cluster_solution(train, feats, local, state)
    forward_time = time.perf_counter() - t0

    obj_full = evaluate_solution(local.task, solution, full)
    obj_train = evaluate_solution(local.task, solution, EvalView(train.graph))
    achieved = len(set(solution.get("labels", []))) or len(solution.get("selected", []))
    return ExperimentResult(
        "clusternet", local.task, "inductive", obj_full, obj_train, train_time,
        forward_time, local.snapshot(), solution, achieved,
        extras={"gradient_updates": updates})


def run_inductive(train_graphs: list[Graph], test_graphs: list[Graph],
                  cfg: RunConfig, variant: str = "no-finetune",
                  finetune_iters: int = 50) -> list[ExperimentResult]:
    """Inductive protocol variants over a test collection.

    no-finetune: shared training, pure forward at test time. finetune:
    shared training then per-graph updates. finetune-only: per-graph
    training from scratch. 1train: shared training on the first graph only.
    """
    if variant not in ("no-finetune", "finetune", "finetune-only", "1train"):
        raise ValueError(f"unknown inductive variant {variant!r}")
    params = None
    info = {}
    if variant != "finetune-only":
        if not train_graphs:
            raise ValueError("need at least one training graph")
        params, info = train_inductive(train_graphs, cfg,
                                       limit_to_first=variant == "1train")
    ft = finetune_iters if variant in ("finetune", "finetune-only") else 0
    results = []
    for i, g in enumerate(test_graphs):
        res = apply_to_test_graph(g, cfg, params, finetune_iters=ft, seed_offset=100 + i)
        res.extras["variant"] = variant
        res.extras["graph_index"] = i
        if variant == "no-finetune":
            assert res.extras["gradient_updates"] == 0
        results.append(res)
    return results


# ---------------------------------------------------------------------------
# aggregation

def results_table(results_dir, fmt: str = "markdown") -> str:
    """Mean objective and top-performance share (ties included) per method.

    Instances are grouped by dataset/graph identity so the "%" column
    counts, per instance, every method whose objective matches the best.
    """
    directory = Path(results_dir)
    rows = []
    for path in sorted(directory.glob("*.json")):
        if path.name.endswith(".solution.json"):
            continue
        rows.append(ExperimentResult.from_json(path.read_text()))
    if not rows:
        return "(no results)"

    def instance_key(r: ExperimentResult):
        cfg = r.config
        return (r.task, cfg.get("dataset_name") or cfg.get("edge_path") or "?",
                r.extras.get("graph_index", 0), cfg.get("seed", 0))

    best = {}
    for r in rows:
        key = instance_key(r)
        better = max if r.task == "community" else min
        best[key] = r.objective_full_graph if key not in best else \
            better(best[key], r.objective_full_graph)

    by_method: dict[str, list[ExperimentResult]] = {}
    for r in rows:
        by_method.setdefault(r.method, []).append(r)

    table_rows = []
    for method in sorted(by_method):
        rs = by_method[method]
        objs = [r.objective_full_graph for r in rs]
        mean = float(np.mean([o for o in objs if o is not None])) if objs else None
        wins = sum(1 for r in rs
                   if abs(r.objective_full_graph - best[instance_key(r)]) <= 1e-12)
        table_rows.append((method, mean, wins, len(rs)))

    if fmt == "csv":
        lines = ["method,avg_objective,top_count,instances"]
        for method, mean, wins, total in table_rows:
            mtxt = "" if mean is None else f"{mean:.4f}"
            lines.append(f"{method},{mtxt},{wins},{total}")
        return "\n".join(lines)

    lines = ["| method | avg objective | top (incl. ties) |",
             "| --- | --- | --- |"]
    for method, mean, wins, total in table_rows:
        mtxt = "" if mean is None else f"{mean:.4f}"
        lines.append(f"| {method} | {mtxt} | {wins}/{total} |")
    return "\n".join(lines)
