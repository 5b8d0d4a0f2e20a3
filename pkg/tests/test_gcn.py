import numpy as np
import pytest

from clusteropt import autodiff as ad
from clusteropt.gcn import GcnParams, gcn_forward, init_params, load_params, save_params
from clusteropt.gradcheck import finite_difference, relative_error
from clusteropt.graphs import make_graph, normalized_adjacency

from conftest import erdos_renyi


def test_identity_propagation():
    eye = np.eye(3)
    params = GcnParams(eye.copy(), eye.copy())
    out = gcn_forward(eye, eye, params)
    assert np.allclose(out.value, eye)


def test_triangle_constant_features_identical_rows():
    g = make_graph(3, [(0, 1), (1, 2), (0, 2)])
    ahat = normalized_adjacency(g)
    params = init_params(4, 5, 3, seed=0)
    out = gcn_forward(ahat, np.ones((3, 4)), params).value
    assert np.allclose(out[0], out[1]) and np.allclose(out[0], out[2])


def test_gradient_wrt_weights_matches_fd():
    g = erdos_renyi(8, 0.3, 0)
    ahat = normalized_adjacency(g)
    rng = np.random.default_rng(1)
    x = rng.standard_normal((8, 3))
    w1_, w2_ = rng.standard_normal((3, 4)), rng.standard_normal((4, 2))

    def build(w1v, w2v):
        params = GcnParams(w1v, w2v)
        out = gcn_forward(ahat, x, params)
        return float(ad.sum_all(ad.mul(out, out)).value[0, 0])

    w1 = ad.leaf(w1_, requires_grad=True)
    w2 = ad.leaf(w2_, requires_grad=True)
    out = gcn_forward(ahat, x, GcnParams(w1_, w2_), w1_node=w1, w2_node=w2)
    ad.backward(ad.sum_all(ad.mul(out, out)))
    num = finite_difference(build, [w1_, w2_], h=1e-6)
    assert relative_error(w1.grad, num[0]) < 1e-5
    assert relative_error(w2.grad, num[1]) < 1e-5


def test_permutation_equivariance():
    rng = np.random.default_rng(2)
    for seed in range(5):
        g = erdos_renyi(10, 0.3, seed + 40)
        ahat = normalized_adjacency(g)
        x = rng.standard_normal((10, 4))
        params = init_params(4, 6, 3, seed=seed)
        perm = rng.permutation(10)
        out = gcn_forward(ahat, x, params).value
        out_p = gcn_forward(ahat[np.ix_(perm, perm)], x[perm], params).value
        assert np.allclose(out_p, out[perm], atol=1e-12)


def test_deterministic_without_dropout():
    g = erdos_renyi(7, 0.4, 3)
    ahat = normalized_adjacency(g)
    x = np.random.default_rng(3).standard_normal((7, 2))
    params = init_params(2, 4, 3, seed=1)
    a = gcn_forward(ahat, x, params).value
    b = gcn_forward(ahat, x, params).value
    assert np.array_equal(a, b)


def test_dropout_only_in_train_mode():
    g = erdos_renyi(7, 0.4, 4)
    ahat = normalized_adjacency(g)
    x = np.abs(np.random.default_rng(4).standard_normal((7, 2))) + 0.5
    params = init_params(2, 4, 3, seed=2, dropout_p=0.5)
    eval_out = gcn_forward(ahat, x, params, train_mode=False).value
    train_out = gcn_forward(ahat, x, params, train_mode=True,
                            rng=np.random.default_rng(0)).value
    assert not np.allclose(eval_out, train_out)
    with pytest.raises(ValueError):
        gcn_forward(ahat, x, params, train_mode=True)


class TestInit:
    def test_same_seed_identical(self):
        a = init_params(5, 6, 7, seed=9)
        b = init_params(5, 6, 7, seed=9)
        assert np.array_equal(a.w1, b.w1) and np.array_equal(a.w2, b.w2)

    def test_glorot_bound(self):
        p = init_params(30, 40, 20, seed=0)
        assert np.abs(p.w1).max() <= np.sqrt(6 / (30 + 40))
        assert np.abs(p.w2).max() <= np.sqrt(6 / (40 + 20))

    def test_positive_dims_required(self):
        with pytest.raises(ValueError):
            init_params(0, 5, 5, seed=0)

    def test_checkpoint_roundtrip(self, tmp_path):
        p = init_params(3, 4, 2, seed=5, dropout_p=0.2)
        save_params(p, tmp_path / "ckpt.json")
        q = load_params(tmp_path / "ckpt.json")
        assert np.array_equal(p.w1, q.w1) and np.array_equal(p.w2, q.w2)
        assert q.dropout_p == 0.2

    def test_checkpoint_version_guard(self, tmp_path):
        (tmp_path / "bad.json").write_text('{"version": 99}')
        with pytest.raises(ValueError):
            load_params(tmp_path / "bad.json")


def test_shape_mismatch_errors():
    params = init_params(3, 4, 2, seed=0)
    with pytest.raises(ad.ShapeError):
        gcn_forward(np.eye(5), np.ones((4, 3)), params)
    with pytest.raises(ad.ShapeError):
        gcn_forward(np.eye(4), np.ones((4, 7)), params)
