import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ensemble_ssl.objective import (LossWeights, batch_objective, consistency_mse, cross_entropy,
                                    total_loss, uncertainty_from_logits)

finite = st.floats(-50, 50, allow_nan=False)


class TestCrossEntropy:
    def test_perfect(self):
        loss, _ = cross_entropy([1.0, 0.0], 0)
        assert abs(loss) < 1e-9

    def test_uniform(self):
        assert abs(cross_entropy([0.5, 0.5], 0)[0] - math.log(2)) < 1e-9

    def test_hand(self):
        loss, grad = cross_entropy([0.9, 0.1], 1)
        assert abs(loss + math.log(0.1)) < 1e-12
        np.testing.assert_allclose(grad, [0.9, -0.9])

    def test_floor_keeps_finite(self):
        loss, _ = cross_entropy([1.0, 0.0], 1)
        assert abs(loss - (-math.log(1e-12))) < 1e-9

    @pytest.mark.parametrize("y", [2, -1, 0.5])
    def test_invalid_class(self, y):
        with pytest.raises(ValueError):
            cross_entropy([0.5, 0.5], y)

    def test_batch(self):
        loss, grad = cross_entropy(np.array([[0.5, 0.5], [0.9, 0.1]]), np.array([0, 1]))
        np.testing.assert_allclose(loss, [math.log(2), -math.log(0.1)])
        assert grad.shape == (2, 2)


class TestConsistency:
    def test_identity(self):
        assert consistency_mse([1.0, 2.0], [1.0, 2.0])[0] == 0.0

    def test_hand(self):
        loss, grad = consistency_mse([1.0, 0.0], [0.0, 0.0])
        assert loss == 1.0
        np.testing.assert_array_equal(grad, [2.0, 0.0])
        assert consistency_mse([1.0, 2.0], [0.0, 0.0])[0] == 5.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            consistency_mse([1.0], [1.0, 2.0])

    @given(arrays(np.float64, 3, elements=finite), arrays(np.float64, 3, elements=finite))
    def test_nonnegative_symmetric(self, s, m):
        a, _ = consistency_mse(s, m)
        assert a >= 0 and a == consistency_mse(m, s)[0]


class TestUncertainty:
    def test_hand(self):
        r = uncertainty_from_logits([[1, 0], [2, 0], [3, 0]])
        np.testing.assert_allclose(r.variance_per_class, [2 / 3, 0])
        assert abs(r.uncertainty - 1 / 3) < 1e-12 and abs(r.weight - 0.75) < 1e-9

    def test_agreement(self):
        r = uncertainty_from_logits([[0.3, -1]] * 3)
        assert r.uncertainty == 0 and r.weight == 1

    def test_scaling_by_two(self):
        z = np.array([[1, 0], [2, 5], [3, -1.0]])
        a, b = uncertainty_from_logits(z), uncertainty_from_logits(2 * z)
        np.testing.assert_allclose(b.variance_per_class, 4 * a.variance_per_class)
        assert b.weight < a.weight

    def test_teacher_count(self):
        with pytest.raises(ValueError):
            uncertainty_from_logits([[1, 0], [2, 0]])
        assert uncertainty_from_logits([[1, 0]], n_teachers=None).weight == 1.0

    def test_batched_matches_rowwise(self, rng):
        z = rng.normal(size=(3, 6, 2))
        batched = uncertainty_from_logits(z)
        for i in range(6):
            assert math.isclose(uncertainty_from_logits(z[:, i]).weight, batched.weight[i])

    @given(arrays(np.float64, (3, 2), elements=finite))
    def test_weight_in_unit_interval(self, z):
        w = uncertainty_from_logits(z).weight
        assert 0 < w <= 1


class TestTotal:
    def test_composition(self):
        assert total_loss(2.0, 3.0, 0.5, LossWeights(1.0, 2.0)) == 2.0 + 2.0 * 0.5 * 3.0

    def test_invalid_weights(self):
        with pytest.raises(ValueError):
            LossWeights(-1.0, 1.0)

    def test_batch_gradient_composition(self, rng):
        probs = np.array([[0.7, 0.3], [0.2, 0.8]])
        s, m = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
        sw, cw = np.array([1.0, 0.75]), np.array([0.5, 1.0, 0.25])
        lw = LossWeights(0.5, 2.0)
        loss, sup, cons, d_sup, d_cons = batch_objective(probs, [0, 1], sw, s, m, cw, lw)
        ce, g = cross_entropy(probs, np.array([0, 1]))
        mse, h = consistency_mse(s, m)
        assert math.isclose(sup, np.mean(sw * ce)) and math.isclose(cons, np.mean(cw * mse))
        assert math.isclose(loss, 0.5 * sup + 2.0 * cons)
        np.testing.assert_allclose(d_sup, 0.5 * sw[:, None] * g / 2)
        np.testing.assert_allclose(d_cons, 2.0 * cw[:, None] * h / 3)

    def test_one_pseudo_example_scaled(self):
        probs = np.array([[0.6, 0.4]])
        full = batch_objective(probs, [1], [1.0], (), (), ())[1]
        assert math.isclose(batch_objective(probs, [1], [0.75], (), (), ())[1], 0.75 * full)

    def test_empty_batches(self):
        loss, sup, cons, _, _ = batch_objective(np.zeros((0, 2)), [], [], (), (), ())
        assert loss == sup == cons == 0.0
