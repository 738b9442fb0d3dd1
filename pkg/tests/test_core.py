"""Neural core: layers, loss, class weights, optimizer, gradcheck."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geofusion.errors import DataError, DimensionError, NumericCheckError
from geofusion.nn import (
    Dropout,
    Linear,
    SGDMomentum,
    class_weights_from_counts,
    finite_difference_check,
    global_average_pool,
    softmax,
    uniform_class_weights,
    weighted_cross_entropy,
    weighted_cross_entropy_batch,
)
from geofusion.nn.params import Parameter, ParamStore


class TestLinear:
    def test_identity_weights(self):
        layer = Linear(2, 2)
        layer.weight.value[:] = np.eye(2)
        layer.bias.value[:] = 0.0
        np.testing.assert_array_equal(layer.forward(np.array([[3.0, 4.0]])), [[3.0, 4.0]])

    def test_zero_weights_returns_bias(self):
        layer = Linear(3, 2)
        layer.weight.value[:] = 0.0
        layer.bias.value[:] = [1.0, 2.0]
        out = layer.forward(np.array([[5.0, -1.0, 7.0]]))
        np.testing.assert_array_equal(out, [[1.0, 2.0]])

    def test_direct_arithmetic(self):
        layer = Linear(2, 2, bias=False)
        layer.weight.value[:] = [[1.0, 1.0], [1.0, -1.0]]
        np.testing.assert_array_equal(layer.forward(np.array([[2.0, 3.0]])), [[5.0, -1.0]])

    def test_no_bias_layer_has_no_bias(self):
        layer = Linear(2, 2, bias=False)
        assert not layer.has_bias
        assert [n for n, _ in layer.params("l")] == ["l.weight"]

    def test_width_mismatch_raises(self):
        with pytest.raises(DimensionError):
            Linear(3, 2).forward(np.zeros((1, 4)))

    def test_zero_upstream_gradient(self, rng):
        layer = Linear(3, 2, rng=rng)
        x = rng.normal(size=(4, 3))
        g_in = layer.backward(x, np.zeros((4, 2)))
        assert np.all(g_in == 0)
        assert np.all(layer.weight.grad == 0)
        assert np.all(layer.bias.grad == 0)

    def test_identity_passes_gradient_through(self):
        layer = Linear(2, 2)
        layer.weight.value[:] = np.eye(2)
        g = np.array([[0.3, -0.7]])
        np.testing.assert_array_equal(layer.backward(np.ones((1, 2)), g), g)

    def test_gradient_matches_finite_differences(self, rng):
        layer = Linear(4, 3, rng=rng)
        x = rng.normal(size=(5, 4))
        r = rng.normal(size=(5, 3))

        def loss():
            return float((layer.forward(x) * r).sum())

        layer.weight.grad[:] = 0
        layer.bias.grad[:] = 0
        dx = layer.backward(x, r)
        report = finite_difference_check(
            loss,
            {"w": layer.weight.value, "b": layer.bias.value, "x": x},
            {"w": layer.weight.grad, "b": layer.bias.grad, "x": dx},
        )
        assert report.max_rel_error <= 1e-5


class TestWeightedCrossEntropy:
    def test_uniform_logits_two_classes(self):
        loss, _ = weighted_cross_entropy(np.zeros(2), 0, None)
        assert loss == pytest.approx(np.log(2.0), abs=1e-12)

    def test_uniform_weights_equal_unweighted(self, rng):
        x = rng.normal(size=5)
        w = class_weights_from_counts([7, 7, 7, 7, 7])
        np.testing.assert_allclose(w.w, np.ones(5), atol=1e-12)
        weighted, _ = weighted_cross_entropy(x, 2, w)
        plain, _ = weighted_cross_entropy(x, 2, None)
        assert weighted == pytest.approx(plain, abs=1e-12)

    def test_imbalanced_counts_75_25(self):
        w = class_weights_from_counts([75, 25])
        np.testing.assert_allclose(w.f, [0.75, 0.25], atol=1e-15)
        np.testing.assert_allclose(w.w, [0.5, 1.5], atol=1e-12)

    def test_logit_shift_invariance(self, rng):
        x = rng.normal(size=4)
        w = class_weights_from_counts([3, 1, 4, 1])
        a, ga = weighted_cross_entropy(x, 1, w)
        b, gb = weighted_cross_entropy(x + 123.456, 1, w)
        assert a == pytest.approx(b, abs=1e-9)
        np.testing.assert_allclose(ga, gb, atol=1e-9)

    def test_large_logits_stable(self):
        loss, grad = weighted_cross_entropy(np.array([1000.0, 0.0]), 0, None)
        assert np.isfinite(loss) and np.isfinite(grad).all()

    def test_label_out_of_range(self):
        with pytest.raises(IndexError):
            weighted_cross_entropy(np.zeros(3), 3, None)

    def test_gradient_formula(self, rng):
        x = rng.normal(size=4)
        w = class_weights_from_counts([1, 2, 3, 4])
        _, grad = weighted_cross_entropy(x, 2, w)
        expected = softmax(x)
        expected[2] -= 1.0
        expected *= w.w[2]
        np.testing.assert_allclose(grad, expected, atol=1e-14)

    def test_batch_is_mean_of_singles(self, rng):
        x = rng.normal(size=(3, 4))
        labels = np.array([0, 2, 1])
        w = class_weights_from_counts([5, 3, 2, 4])
        loss, grad = weighted_cross_entropy_batch(x, labels, w)
        singles = [weighted_cross_entropy(x[i], labels[i], w) for i in range(3)]
        assert loss == pytest.approx(np.mean([s[0] for s in singles]), abs=1e-12)
        np.testing.assert_allclose(grad, np.stack([s[1] for s in singles]) / 3, atol=1e-14)


class TestClassWeights:
    def test_balanced(self):
        np.testing.assert_allclose(class_weights_from_counts([10, 10, 10]).w, 1.0, atol=1e-15)

    def test_example_1_1_2(self):
        w = class_weights_from_counts([1, 1, 2])
        np.testing.assert_allclose(w.f, [0.25, 0.25, 0.5], atol=1e-15)
        np.testing.assert_allclose(w.w, [1.2, 1.2, 0.6], atol=1e-12)

    def test_zero_count_rejected(self):
        with pytest.raises(DataError):
            class_weights_from_counts([4, 0, 2])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(min_value=1, max_value=10_000), min_size=1, max_size=12))
    def test_sum_equals_class_count(self, counts):
        w = class_weights_from_counts(counts)
        assert abs(w.w.sum() - len(counts)) <= 1e-12
        assert (w.w > 0).all()

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.integers(min_value=1, max_value=1000), min_size=2, max_size=8),
           st.randoms(use_true_random=False))
    def test_permutation_equivariant(self, counts, rnd):
        perm = list(range(len(counts)))
        rnd.shuffle(perm)
        w = class_weights_from_counts(counts)
        wp = class_weights_from_counts([counts[p] for p in perm])
        np.testing.assert_allclose(wp.w, w.w[perm], atol=1e-12)


class TestGlobalAveragePool:
    def test_single_node(self):
        out = global_average_pool(np.array([[2.0, 5.0]]), np.array([0]))
        np.testing.assert_array_equal(out, [[2.0, 5.0]])

    def test_two_node_mean(self):
        feats = np.array([[1.0, 3.0], [3.0, 5.0]])
        out = global_average_pool(feats, np.array([0, 0]))
        np.testing.assert_array_equal(out, [[2.0, 4.0]])

    def test_permutation_invariant(self, rng):
        feats = rng.normal(size=(8, 3))
        batch = np.array([0, 0, 0, 1, 1, 1, 1, 1])
        base = global_average_pool(feats, batch)
        perm = rng.permutation(8)
        permuted = global_average_pool(feats[perm], batch[perm])
        np.testing.assert_allclose(permuted, base, atol=1e-12)

    def test_empty_sample_rejected(self):
        with pytest.raises(DimensionError):
            global_average_pool(np.ones((2, 1)), np.array([0, 2]))


class TestDropout:
    def test_eval_mode_is_identity(self, rng):
        x = rng.normal(size=(5, 4))
        out, mask = Dropout(0.5).forward(x, train=False)
        assert out is x and mask is None

    def test_train_mode_expectation(self):
        rng = np.random.default_rng(7)
        x = np.ones((200_000, 1))
        out, _ = Dropout(0.2).forward(x, rng, train=True)
        assert abs(out.mean() - 1.0) < 0.01

    def test_inverted_scaling_values(self, rng):
        x = np.ones((10, 10))
        out, mask = Dropout(0.2).forward(x, rng, train=True)
        kept = out[mask]
        np.testing.assert_allclose(kept, 1.0 / 0.8, atol=1e-12)
        assert np.all(out[~mask] == 0.0)

    def test_invalid_probability(self):
        with pytest.raises(ValueError):
            Dropout(1.0)


class TestSGDMomentum:
    def _store(self, value):
        store = ParamStore()
        store.register("p", Parameter(np.array(value)))
        return store

    def test_zero_gradient_no_motion(self):
        store = self._store([1.0, 2.0])
        SGDMomentum(lr=0.1, momentum=0.9).step(store)
        np.testing.assert_array_equal(store["p"].value, [1.0, 2.0])

    def test_plain_gradient_descent(self):
        store = self._store([1.0])
        store["p"].grad[:] = 2.0
        SGDMomentum(lr=0.5, momentum=0.0).step(store)
        np.testing.assert_allclose(store["p"].value, [0.0], atol=1e-15)

    def test_momentum_recurrence(self):
        store = self._store([0.0])
        opt = SGDMomentum(lr=1.0, momentum=0.9)
        for _ in range(2):
            store["p"].grad[:] = 1.0
            opt.step(store)
        np.testing.assert_allclose(store["p"].value, [-2.9], atol=1e-12)

    def test_weight_decay_skips_biases(self):
        store = ParamStore()
        store.register("w", Parameter(np.array([1.0]), decay=True))
        store.register("b", Parameter(np.array([1.0]), decay=False))
        SGDMomentum(lr=1.0, momentum=0.0, weight_decay=0.5).step(store)
        np.testing.assert_allclose(store["w"].value, [0.5], atol=1e-15)
        np.testing.assert_allclose(store["b"].value, [1.0], atol=1e-15)


class TestFiniteDifferenceCheck:
    def test_detects_wrong_gradient(self):
        x = np.array([1.0, 2.0])

        def loss():
            return float((x**2).sum())

        report = finite_difference_check(loss, {"x": x}, {"x": np.array([2.0, 3.9])})
        assert not report.passed

    def test_accepts_correct_gradient(self):
        x = np.array([1.0, 2.0])

        def loss():
            return float((x**2).sum())

        report = finite_difference_check(loss, {"x": x}, {"x": 2 * x})
        assert report.passed

    def test_nondeterministic_closure_rejected(self):
        state = {"calls": 0}
        x = np.array([1.0])

        def loss():
            state["calls"] += 1
            return float(state["calls"])

        with pytest.raises(NumericCheckError):
            finite_difference_check(loss, {"x": x}, {"x": np.zeros(1)})


def test_uniform_class_weights():
    w = uniform_class_weights(4)
    np.testing.assert_array_equal(w.w, np.ones(4))
    assert w.n_classes == 4
