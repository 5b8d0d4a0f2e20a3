"""Central finite-difference gradient checks.

The checker rebuilds the forward pass from scratch at perturbed inputs, so
it is independent of every backward rule it is used to verify. `run_all`
drives the op-by-op suite behind the `gradcheck` CLI subcommand.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad


def finite_difference(fn, arrays, h=1e-6):
    """Central-difference gradients of scalar fn(*arrays) wrt each array.

    fn must accept plain numpy arrays and return a float. Returns a list of
    arrays matching the inputs.
    """
    grads = []
    for i, base in enumerate(arrays):
        g = np.zeros_like(base, dtype=np.float64)
        flat = g.reshape(-1)
        work = [a.copy() for a in arrays]
        for j in range(base.size):
            orig = work[i].reshape(-1)[j]
            work[i].reshape(-1)[j] = orig + h
            fp = fn(*work)
            work[i].reshape(-1)[j] = orig - h
            fm = fn(*work)
            work[i].reshape(-1)[j] = orig
            flat[j] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


def relative_error(got, want, floor=1e-8):
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    denom = max(np.linalg.norm(want), floor)
    return float(np.linalg.norm(got - want) / denom)


def check_scalar_graph(build, arrays, h=1e-6, rtol=1e-5):
    """Compare autodiff gradients of build(*leaves) against finite differences.

    build takes requires_grad leaf Nodes and returns a scalar Node. Returns
    (max_relative_error, ok).
    """
    leaves = [ad.leaf(a, requires_grad=True) for a in arrays]
    loss = build(*leaves)
    ad.backward(loss)
    analytic = [lf.grad if lf.grad is not None else np.zeros_like(lf.value) for lf in leaves]

    def fn(*arrs):
        consts = [ad.leaf(a) for a in arrs]
        return float(build(*consts).value[0, 0])

    numeric = finite_difference(fn, [a.astype(np.float64) for a in arrays], h=h)
    err = max(relative_error(g, n) for g, n in zip(analytic, numeric))
    return err, err <= rtol


def _op_suite(rng):
    """(name, build, input shapes) triples covering every differentiable primitive."""
    def r(*shape):
        return rng.standard_normal(shape)

    suite = [
        ("add", lambda a, b: ad.sum_all(ad.mul(ad.add(a, b), ad.add(a, b))), [r(3, 4), r(3, 4)]),
        ("add_rowvec", lambda a, b: ad.sum_all(ad.exp(ad.add(a, b))), [r(3, 4), r(1, 4)]),
        ("sub", lambda a, b: ad.sum_all(ad.mul(ad.sub(a, b), ad.sub(a, b))), [r(2, 3), r(2, 3)]),
        ("scale", lambda a: ad.sum_all(ad.scale(ad.mul(a, a), -2.5)), [r(3, 3)]),
        ("mul", lambda a, b: ad.sum_all(ad.mul(a, b)), [r(4, 2), r(4, 2)]),
        ("mul_scalar", lambda a, s: ad.sum_all(ad.mul_scalar(a, s)), [r(3, 2), r(1, 1)]),
        ("reciprocal", lambda a: ad.sum_all(ad.reciprocal(a)), [r(2, 3) + 3.0]),
        ("matmul", lambda a, b: ad.sum_all(ad.mul(ad.matmul(a, b), ad.matmul(a, b))), [r(5, 4), r(4, 3)]),
        ("transpose", lambda a: ad.sum_all(ad.mul(ad.transpose(a), ad.transpose(a))), [r(3, 5)]),
        ("rowsum", lambda a: ad.sum_all(ad.mul(ad.rowsum(a), ad.rowsum(a))), [r(4, 3)]),
        ("colsum", lambda a: ad.sum_all(ad.mul(ad.colsum(a), ad.colsum(a))), [r(4, 3)]),
        ("mean_all", lambda a: ad.mul(ad.mean_all(a), ad.mean_all(a)), [r(3, 4)]),
        ("relu", lambda a: ad.sum_all(ad.mul(ad.relu(a), a)), [r(4, 4) + 0.2]),
        ("sigmoid", lambda a: ad.sum_all(ad.mul(ad.sigmoid(a), a)), [r(3, 4)]),
        ("exp", lambda a: ad.sum_all(ad.exp(a)), [r(3, 3)]),
        ("log", lambda a: ad.sum_all(ad.log(a)), [np.abs(r(3, 3)) + 0.5]),
        ("softplus", lambda a: ad.sum_all(ad.mul(ad.softplus(a), a)), [r(3, 4)]),
        ("clamp", lambda a: ad.sum_all(ad.mul(ad.clamp(a, -0.7, 0.7), a)), [r(4, 4)]),
        ("softmax_rows", lambda a: ad.sum_all(ad.mul(ad.softmax_rows(a, 2.0), a)), [r(4, 5)]),
        ("softmin_rows", lambda a: ad.sum_all(ad.mul(ad.softmin_rows(a, 3.0), a)), [r(4, 5)]),
        ("l2_normalize_rows", lambda a: ad.sum_all(ad.mul(ad.l2_normalize_rows(a), a)), [r(4, 3) + 0.5]),
        ("cosine_similarity", lambda a, b: ad.sum_all(ad.mul(ad.cosine_similarity(a, b), ad.cosine_similarity(a, b))),
         [r(5, 3) + 0.3, r(2, 3) + 0.3]),
        ("concat", lambda a, b: ad.sum_all(ad.mul(ad.concat([a, b]), ad.concat([a, b]))), [r(3, 2), r(3, 4)]),
        ("pair_dot", lambda z: ad.sum_all(ad.mul(ad.pair_dot(z, [0, 1, 2, 0], [1, 2, 3, 3]), ad.pair_dot(z, [0, 1, 2, 0], [1, 2, 3, 3]))),
         [r(4, 3)]),
    ]
    return suite


def check_cluster_backward(seeds=range(5), rtol=1e-4):
    """exact_backward of the converged fixed point vs finite differences."""
    from .softkmeans import ClusterConfig, exact_backward, kmeans_forward, kmeans_pp_init

    rows = []
    for seed in seeds:
        rng = np.random.default_rng(1000 + seed)
        n, p, k = int(rng.integers(8, 16)), int(rng.integers(2, 5)), int(rng.integers(2, 4))
        x = rng.standard_normal((n, p))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        cfg = ClusterConfig(k, beta=6.0, max_iters=800, tol=1e-12)
        state = kmeans_forward(x, kmeans_pp_init(x, k, seed), cfg)
        if not state.converged:
            continue
        gmu = rng.standard_normal((k, p))
        gr = rng.standard_normal((n, k))
        got = exact_backward(x, state, cfg, grad_mu=gmu, grad_r=gr)

        tight = ClusterConfig(k, 6.0, max_iters=2000, tol=1e-13)

        def fn(xv):
            s = kmeans_forward(xv, state.centers, tight)
            return float(np.sum(gmu * s.centers) + np.sum(gr * s.assignments))

        (want,) = finite_difference(fn, [x], h=1e-5)
        err = relative_error(got, want)
        rows.append((f"exact_backward[seed={seed}]", err, err <= rtol))
    return rows


def check_decision_losses(rtol=1e-4):
    """Finite differences through replay + decode + both decision losses."""
    from . import autodiff as ad
    from .decisions import (expected_facility_loss, modularity_loss,
                            select_from_clusters)
    from .graphs import all_pairs_bfs, make_graph, modularity_matrix
    from .softkmeans import ClusterConfig, kmeans_forward, replay_update

    rng = np.random.default_rng(7)
    x = rng.standard_normal((10, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    g = make_graph(10, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3),
                        (6, 7), (8, 9), (0, 9), (2, 5)])
    cfg = ClusterConfig(2, beta=10.0, max_iters=5, tol=0.0)
    state = kmeans_forward(x, x[:2].copy(), cfg)
    bmat = modularity_matrix(g)
    table = all_pairs_bfs(g)

    def modularity_path(xn):
        _, r = replay_update(xn, state.centers, cfg.beta)
        return modularity_loss(r, bmat, g.m)

    def facility_path(xn):
        mu, _ = replay_update(xn, state.centers, cfg.beta)
        sel = select_from_clusters(xn, mu, eta=8.0, gamma=20.0, budget=2)
        return expected_facility_loss(sel, table, softmax_temp=10.0)

    rows = []
    for name, build in [("modularity_loss_path", modularity_path),
                        ("facility_loss_path", facility_path)]:
        err, ok = check_scalar_graph(build, [x], h=1e-6, rtol=rtol)
        rows.append((name, err, ok))
    return rows


def full_report(rtol_ops=1e-5, rtol_paths=1e-4):
    """Every suite the gradcheck CLI runs: (section, op, max_err, ok) rows."""
    rows = [("tensor_ad", name, err, ok) for name, err, ok in run_all(rtol=rtol_ops)]
    rows += [("softkmeans", name, err, ok) for name, err, ok in check_cluster_backward(rtol=rtol_paths)]
    rows += [("decisions", name, err, ok) for name, err, ok in check_decision_losses(rtol=rtol_paths)]
    return rows


def run_all(seeds=range(20), rtol=1e-5, sabotage=False):
    """Finite-difference every primitive over several seeds.

    Returns a list of (op_name, max_rel_err, ok) rows. With sabotage=True a
    deliberately wrong backward rule is injected to prove the harness can
    catch sign errors (used by tests only).
    """
    results = {}
    for seed in seeds:
        rng = np.random.default_rng(seed)
        for name, build, arrays in _op_suite(rng):
            if sabotage and name == "sigmoid":
                def build(a):
                    # broken on purpose: gradient of -sigmoid, value of sigmoid
                    y = ad.sigmoid(a)
                    flipped = ad.Node(y.value, parents=(a,),
                                      push=lambda g, a=a, y=y: ad._accum(a, -g * y.value * (1 - y.value)))
                    return ad.sum_all(ad.mul(flipped, a))
            err, _ = check_scalar_graph(build, arrays, rtol=rtol)
            prev = results.get(name, 0.0)
            results[name] = max(prev, err)
    return [(name, err, err <= rtol) for name, err in results.items()]
