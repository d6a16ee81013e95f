import numpy as np
import pytest

from udalab.mlp import (IDENTITY, LOGISTIC, RECTIFIER, SOFTMAX, Layer, MlpParams,
                        cross_entropy, finite_diff_gradient, grads_add, grl_scale,
                        init_mlp, l2_normalize_backward, l2_normalize_rows,
                        max_relative_error, mlp_backward, mlp_forward, sgd_step,
                        weighted_bce, zero_grads)

LN2 = np.log(2.0)


def single_layer(weight, bias, activation=IDENTITY, head=IDENTITY):
    return MlpParams([Layer(np.asarray(weight, dtype=float),
                            np.asarray(bias, dtype=float), activation)], head)


class TestForward:
    def test_identity_layer_passes_input_through(self):
        params = single_layer(np.eye(2), [0.0, 0.0])
        _, out = mlp_forward(params, np.array([[1.0, 2.0]]))
        assert np.array_equal(out, [[1.0, 2.0]])

    def test_zero_weights_with_bias_yield_constant(self):
        params = single_layer(np.zeros((3, 1)), [0.5])
        _, out = mlp_forward(params, np.array([[1.0, -2.0, 7.0], [0.0, 0.0, 0.0]]))
        assert np.array_equal(out, [[0.5], [0.5]])

    def test_rectifier_clamps_negative(self):
        params = single_layer([[1.0]], [0.0], activation=RECTIFIER)
        _, out = mlp_forward(params, np.array([[-3.0]]))
        assert np.array_equal(out, [[0.0]])

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        params = init_mlp([4, 5, 3], SOFTMAX, rng)
        _, out = mlp_forward(params, rng.normal(size=(9, 4)))
        assert np.allclose(out.sum(axis=1), 1.0, atol=1e-12)
        assert np.all((out >= 0) & (out <= 1))

    def test_dimension_mismatch_raises(self):
        params = single_layer(np.eye(2), [0.0, 0.0])
        with pytest.raises(ValueError):
            mlp_forward(params, np.ones((1, 3)))

    def test_cache_row_count_matches(self):
        rng = np.random.default_rng(2)
        params = init_mlp([3, 4, 2], SOFTMAX, rng)
        cache, out = mlp_forward(params, rng.normal(size=(7, 3)))
        assert out.shape == (7, 2)
        assert all(a.shape[0] == 7 for a in cache.post_acts)


class TestL2Normalize:
    def test_three_four_five(self):
        out = l2_normalize_rows(np.array([[3.0, 4.0]]))
        assert np.allclose(out, [[0.6, 0.8]], atol=1e-12)

    def test_zero_row_unchanged(self):
        out = l2_normalize_rows(np.array([[0.0, 0.0]]))
        assert np.array_equal(out, [[0.0, 0.0]])

    def test_symmetric_row(self):
        out = l2_normalize_rows(np.ones((1, 4)))
        assert np.allclose(out, 0.5, atol=1e-12)

    def test_rows_have_unit_norm(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(20, 5))
        norms = np.linalg.norm(l2_normalize_rows(x), axis=1)
        assert np.allclose(norms, 1.0, atol=1e-12)

    def test_backward_matches_finite_difference(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(3, 4))
        d_y = rng.normal(size=(3, 4))
        analytic = l2_normalize_backward(x, d_y)
        h = 1e-6
        numeric = np.zeros_like(x)
        for i in range(x.shape[0]):
            for j in range(x.shape[1]):
                xp, xm = x.copy(), x.copy()
                xp[i, j] += h
                xm[i, j] -= h
                numeric[i, j] = ((l2_normalize_rows(xp) * d_y).sum()
                                 - (l2_normalize_rows(xm) * d_y).sum()) / (2 * h)
        assert np.allclose(analytic, numeric, atol=1e-6)


class TestLosses:
    def test_uniform_binary_cross_entropy(self):
        loss, _ = cross_entropy(np.array([[0.5, 0.5]]), np.array([0]))
        assert loss == pytest.approx(LN2, abs=1e-12)

    def test_perfect_prediction_zero_loss(self):
        loss, _ = cross_entropy(np.array([[1.0, 0.0]]), np.array([0]))
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_two_row_mean(self):
        # scalar reference: mean of ln 2 and ln(4/3)
        expected = 0.5 * (np.log(2.0) + np.log(4.0 / 3.0))
        loss, _ = cross_entropy(np.array([[0.5, 0.5], [0.25, 0.75]]), np.array([0, 1]))
        assert loss == pytest.approx(expected, abs=1e-12)

    def test_label_out_of_range(self):
        with pytest.raises(IndexError):
            cross_entropy(np.array([[0.5, 0.5]]), np.array([2]))

    def test_zero_probability_is_clamped(self):
        loss, _ = cross_entropy(np.array([[0.0, 1.0]]), np.array([0]))
        assert np.isfinite(loss)
        assert loss == pytest.approx(-np.log(1e-12))

    def test_bce_uniform(self):
        loss, _ = weighted_bce(np.array([0.5]), np.array([1.0]), np.array([1.0]))
        assert loss == pytest.approx(LN2, abs=1e-12)

    def test_bce_zero_weight_contributes_nothing(self):
        loss, _ = weighted_bce(np.array([0.123]), np.array([1.0]), np.array([0.0]))
        assert loss == 0.0

    def test_bce_two_terms_mean(self):
        loss, _ = weighted_bce(np.array([0.5, 0.5]), np.array([1.0, 0.0]),
                               np.array([2.0, 0.0]))
        assert loss == pytest.approx(LN2, abs=1e-12)

    def test_bce_negative_weight_raises(self):
        with pytest.raises(ValueError):
            weighted_bce(np.array([0.5]), np.array([1.0]), np.array([-1.0]))


class TestGrlAndSgd:
    def _grads(self, rng):
        params = init_mlp([3, 2], IDENTITY, rng)
        g = zero_grads(params)
        g.layers[0].weight[:] = rng.normal(size=(3, 2))
        g.layers[0].bias[:] = rng.normal(size=2)
        return g

    def test_lambda_one_flips_sign(self):
        g = self._grads(np.random.default_rng(5))
        flipped = grl_scale(g, 1.0)
        assert np.array_equal(flipped.layers[0].weight, -g.layers[0].weight)
        assert np.array_equal(flipped.layers[0].bias, -g.layers[0].bias)

    def test_lambda_zero_gives_zeros(self):
        g = self._grads(np.random.default_rng(6))
        z = grl_scale(g, 0.0)
        assert np.all(z.layers[0].weight == 0.0)

    def test_half_lambda_scales_exactly(self):
        g = zero_grads(init_mlp([2, 1], IDENTITY, np.random.default_rng(7)))
        g.layers[0].weight[:, 0] = [2.0, -4.0]
        out = grl_scale(g, 0.5)
        assert np.array_equal(out.layers[0].weight[:, 0], [-1.0, 2.0])

    def test_negative_lambda_rejected(self):
        g = self._grads(np.random.default_rng(8))
        with pytest.raises(ValueError):
            grl_scale(g, -0.1)

    def test_sgd_direct_update(self):
        params = single_layer([[1.0]], [0.0])
        g = zero_grads(params)
        g.layers[0].weight[0, 0] = 0.5
        sgd_step(params, g, 0.1)
        assert params.layers[0].weight[0, 0] == pytest.approx(0.95, abs=1e-15)

    def test_sgd_zero_gradient_is_fixed_point(self):
        params = single_layer([[1.0, 2.0]], [0.3, -0.1])
        before = params.copy()
        sgd_step(params, zero_grads(params), 0.7)
        assert np.array_equal(params.layers[0].weight, before.layers[0].weight)
        assert np.array_equal(params.layers[0].bias, before.layers[0].bias)

    def test_sgd_vector_update(self):
        params = single_layer([[1.0], [2.0]], [0.0])
        g = zero_grads(params)
        g.layers[0].weight[:, 0] = [1.0, 1.0]
        sgd_step(params, g, 1.0)
        assert np.array_equal(params.layers[0].weight[:, 0], [0.0, 1.0])

    def test_sgd_lr_zero_is_identity(self):
        rng = np.random.default_rng(9)
        params = init_mlp([4, 3, 2], SOFTMAX, rng)
        g = zero_grads(params)
        for layer in g.layers:
            layer.weight[:] = rng.normal(size=layer.weight.shape)
        before = params.copy()
        sgd_step(params, g, 0.0)
        for lb, la in zip(before.layers, params.layers):
            assert np.array_equal(lb.weight, la.weight)

    def test_sgd_shape_mismatch_raises(self):
        params = single_layer([[1.0]], [0.0])
        g = zero_grads(single_layer([[1.0, 2.0]], [0.0, 0.0]))
        with pytest.raises(ValueError):
            sgd_step(params, g, 0.1)


class TestFiniteDifference:
    def test_quadratic_derivative(self):
        params = single_layer([[3.0]], [0.0])

        def loss(p):
            return float(p.layers[0].weight[0, 0] ** 2)

        g = finite_diff_gradient(loss, params, h=1e-5)
        assert g.layers[0].weight[0, 0] == pytest.approx(6.0, abs=1e-6)

    def test_constant_function_zero_gradient(self):
        params = single_layer([[1.0, -1.0]], [0.2, 0.0])
        g = finite_diff_gradient(lambda p: 4.2, params, h=1e-5)
        assert np.all(g.layers[0].weight == 0.0)
        assert np.all(g.layers[0].bias == 0.0)

    def test_params_restored_after_oracle(self):
        rng = np.random.default_rng(10)
        params = init_mlp([2, 3, 2], SOFTMAX, rng)
        before = params.copy()
        x = rng.normal(size=(4, 2))
        y = np.array([0, 1, 0, 1])

        def loss(p):
            _, probs = mlp_forward(p, x)
            return cross_entropy(probs, y)[0]

        finite_diff_gradient(loss, params, h=1e-5)
        for lb, la in zip(before.layers, params.layers):
            assert np.array_equal(lb.weight, la.weight)

    def test_analytic_matches_numeric_on_small_classifier(self):
        rng = np.random.default_rng(11)
        params = init_mlp([3, 4, 2], SOFTMAX, rng)
        x = rng.normal(size=(6, 3))
        y = rng.integers(0, 2, size=6)

        cache, probs = mlp_forward(params, x)
        _, d_logits = cross_entropy(probs, y)
        analytic, _ = mlp_backward(params, cache, d_logits)

        def loss(p):
            _, pr = mlp_forward(p, x)
            return cross_entropy(pr, y)[0]

        numeric = finite_diff_gradient(loss, params, h=1e-5)
        assert max_relative_error(analytic, numeric) < 1e-4


class TestGradsAdd:
    def test_elementwise_sum(self):
        rng = np.random.default_rng(12)
        params = init_mlp([2, 2], IDENTITY, rng)
        a, b = zero_grads(params), zero_grads(params)
        a.layers[0].weight[:] = 1.0
        b.layers[0].weight[:] = 2.5
        s = grads_add(a, b)
        assert np.all(s.layers[0].weight == 3.5)
