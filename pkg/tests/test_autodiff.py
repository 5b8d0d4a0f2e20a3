import numpy as np
import pytest

from clusteropt import autodiff as ad
from clusteropt.gradcheck import check_scalar_graph, finite_difference, relative_error, run_all


def test_softmin_zero_temperature_uniform():
    x = ad.leaf(np.random.default_rng(0).standard_normal((4, 6)))
    y = ad.softmin_rows(x, temperature=0.0)
    assert np.allclose(y.value, 1.0 / 6.0)


def test_sigmoid_at_zero():
    x = ad.leaf(np.zeros((1, 1)), requires_grad=True)
    y = ad.sigmoid(x)
    assert y.value[0, 0] == pytest.approx(0.5)
    ad.backward(ad.sum_all(y))
    assert x.grad[0, 0] == pytest.approx(0.25)


def test_matmul_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((5, 4)), rng.standard_normal((4, 3))
    err, ok = check_scalar_graph(
        lambda x, y: ad.sum_all(ad.mul(ad.matmul(x, y), ad.matmul(x, y))), [a, b], rtol=1e-6)
    assert ok, f"matmul rel err {err}"


def test_backward_sum_gives_ones():
    x = ad.leaf(np.random.default_rng(2).standard_normal((3, 4)), requires_grad=True)
    ad.backward(ad.sum_all(x))
    assert np.array_equal(x.grad, np.ones((3, 4)))


def test_backward_quadratic_gives_two_x():
    x = ad.leaf(np.random.default_rng(3).standard_normal((3, 4)), requires_grad=True)
    ad.backward(ad.sum_all(ad.mul(x, x)))
    assert np.allclose(x.grad, 2 * x.value)


def test_backward_requires_scalar():
    x = ad.leaf(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ad.ShapeError):
        ad.backward(ad.mul(x, x))


def test_random_chain_matches_finite_differences():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((4, 2))

    def build(x, y):
        h = ad.relu(ad.matmul(x, y))
        return ad.sum_all(ad.mul(ad.sigmoid(h), h))

    err, ok = check_scalar_graph(build, [a, b], rtol=1e-6)
    assert ok, err


def test_shared_subexpression_equals_tree():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((3, 3))

    # shared: z = x + x used twice
    x = ad.leaf(a, requires_grad=True)
    z = ad.add(x, x)
    ad.backward(ad.sum_all(ad.mul(z, z)))
    shared = x.grad.copy()

    # tree: four independent copies of the same leaf value
    xs = [ad.leaf(a, requires_grad=True) for _ in range(2)]
    z2 = ad.add(xs[0], xs[1])
    ad.backward(ad.sum_all(ad.mul(z2, z2)))
    tree = xs[0].grad + xs[1].grad
    assert np.allclose(shared, tree)
    assert np.allclose(shared, 8 * a)


def test_detach_blocks_gradient():
    x = ad.leaf(np.ones((2, 2)), requires_grad=True)
    y = ad.mul(ad.detach(ad.mul(x, x)), x)
    ad.backward(ad.sum_all(y))
    assert np.allclose(x.grad, 1.0)  # only the undetached factor contributes


def test_shape_mismatch_message_names_both_shapes():
    a = ad.leaf(np.ones((2, 3)))
    b = ad.leaf(np.ones((4, 5)))
    with pytest.raises(ad.ShapeError, match=r"2, 3.*4, 5"):
        ad.matmul(a, b)


def test_softmin_rows_sum_to_one_and_shift_invariant():
    rng = np.random.default_rng(6)
    for _ in range(10):
        x = rng.standard_normal((5, 7)) * 3
        y = ad.softmin_rows(ad.leaf(x), temperature=2.5).value
        assert np.allclose(y.sum(axis=1), 1.0, atol=1e-12)
        shifted = ad.softmin_rows(ad.leaf(x + 11.7), temperature=2.5).value
        assert np.allclose(y, shifted, atol=1e-12)


def test_dropout_inverted_scaling_and_determinism():
    x = ad.leaf(np.ones((50, 40)), requires_grad=True)
    y1 = ad.dropout(x, 0.3, rng=123)
    y2 = ad.dropout(ad.leaf(np.ones((50, 40))), 0.3, rng=123)
    assert np.array_equal(y1.value, y2.value)
    kept = y1.value != 0
    assert np.allclose(y1.value[kept], 1 / 0.7)
    assert abs(kept.mean() - 0.7) < 0.05
    ad.backward(ad.sum_all(y1))
    assert np.array_equal((x.grad != 0), kept)


def test_dropout_p_zero_is_identity():
    x = ad.leaf(np.full((3, 3), 2.0))
    assert ad.dropout(x, 0.0, rng=0) is x


def test_all_primitives_pass_gradcheck_twenty_seeds():
    rows = run_all(seeds=range(20), rtol=1e-5)
    bad = [r for r in rows if not r[2]]
    assert not bad, f"failed ops: {bad}"


def test_gradcheck_catches_injected_sign_error():
    rows = run_all(seeds=[0], rtol=1e-5, sabotage=True)
    by_name = {name: ok for name, _, ok in rows}
    assert not by_name["sigmoid"]
    assert by_name["matmul"]


def test_assert_finite():
    ad.assert_finite(ad.leaf(np.ones((2, 2))))
    with pytest.raises(FloatingPointError):
        ad.assert_finite(np.array([[1.0, np.nan]]))


def test_dump_csv_roundtrip(tmp_path):
    x = ad.leaf(np.array([[1.5, -2.0], [0.0, 3.25]]))
    ad.dump_csv(x, tmp_path / "t.csv")
    back = np.loadtxt(tmp_path / "t.csv", delimiter=",")
    assert np.array_equal(back, x.value)


def test_finite_difference_oracle_on_known_function():
    # d/dx sum(x^2) = 2x, independently of the autodiff engine
    x = np.array([[1.0, -2.0], [0.5, 3.0]])
    (g,) = finite_difference(lambda a: float((a**2).sum()), [x])
    assert relative_error(g, 2 * x) < 1e-7


class TestAdam:
    def test_zero_grad_leaves_params_unchanged(self):
        p = {"w": np.ones((2, 2))}
        st = ad.AdamState(p, lr=0.05)
        ad.adam_step(p, {"w": np.zeros((2, 2))}, st)
        assert np.array_equal(p["w"], np.ones((2, 2)))

    def test_first_step_scalar_matches_hand_evaluation(self):
        # m1=0.1, v1=0.001; mhat=1, vhat=1 -> delta = lr * 1/(1+eps) ~ lr
        p = {"w": np.array([[1.0]])}
        st = ad.AdamState(p, lr=0.01)
        ad.adam_step(p, {"w": np.array([[1.0]])}, st)
        assert p["w"][0, 0] == pytest.approx(1.0 - 0.01, abs=1e-6)

    def test_two_runs_identical(self):
        rng = np.random.default_rng(7)
        grads = [rng.standard_normal((3, 2)) for _ in range(5)]

        def run():
            p = {"w": np.zeros((3, 2))}
            st = ad.AdamState(p, lr=0.02)
            for g in grads:
                ad.adam_step(p, {"w": g}, st)
            return p["w"]

        assert np.array_equal(run(), run())
