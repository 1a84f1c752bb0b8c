import numpy as np
import pytest

from oracles import fd_gradient, max_rel_error
from spml_lab import losses
from spml_lab.errors import DataFormatError, DomainError, ShapeError
from spml_lab.linalg import RandomSource
from spml_lab.mlp import (MlpParams, backward, forward, init_params,
                          load_checkpoint, save_checkpoint)


def zero_params(D, H, C):
    return MlpParams(w1=np.zeros((D, H)), b1=np.zeros(H),
                     w2=np.zeros((H, H)), b2=np.zeros(H),
                     w3=np.zeros((H, C)), b3=np.zeros(C))


class TestInit:
    def test_deterministic(self):
        a = init_params(RandomSource(5), 8, 4, 3)
        b = init_params(RandomSource(5), 8, 4, 3)
        assert all(np.array_equal(x, y)
                   for x, y in zip(a.as_tuple(), b.as_tuple()))

    def test_shapes(self):
        p = init_params(RandomSource(0), 8, 4, 3)
        assert p.w1.shape == (8, 4)
        assert p.w2.shape == (4, 4)
        assert p.w3.shape == (4, 3)
        assert p.dims == (8, 4, 3)

    def test_zero_dims_rejected(self):
        with pytest.raises(DomainError):
            init_params(RandomSource(0), 0, 4, 3)

    def test_init_variance(self):
        # uniform(-b, b) has variance b^2/3 with b = sqrt(6/(fan_in+fan_out))
        p = init_params(RandomSource(1), 1024, 1024, 10)
        nominal = (6.0 / 2048) / 3.0
        assert p.w1.var() == pytest.approx(nominal, rel=0.2)

    def test_biases_zero(self):
        p = init_params(RandomSource(2), 6, 5, 4)
        assert not p.b1.any() and not p.b2.any() and not p.b3.any()


class TestForward:
    def test_all_zero_weights_give_half(self):
        p = zero_params(3, 4, 2)
        cache = forward(p, np.ones((5, 3)))
        assert np.allclose(cache.confidences, 0.5)

    def test_bias_monotonicity(self):
        rng = RandomSource(3)
        p = init_params(rng, 4, 3, 2)
        x = rng.gaussian(0, 1, 6 * 4).reshape(6, 4)
        before = forward(p, x).confidences[:, 1]
        p.b3[1] += 0.5
        after = forward(p, x).confidences[:, 1]
        assert np.all(after > before)

    def test_hand_computed_chain(self):
        # 1-1-1 network: x=2, w=0.5 everywhere, biases 0.1
        p = MlpParams(w1=np.array([[0.5]]), b1=np.array([0.1]),
                      w2=np.array([[0.5]]), b2=np.array([0.1]),
                      w3=np.array([[0.5]]), b3=np.array([0.1]))
        a1 = max(2.0 * 0.5 + 0.1, 0)
        a2 = max(a1 * 0.5 + 0.1, 0)
        z3 = a2 * 0.5 + 0.1
        expected = 1 / (1 + np.exp(-z3))
        cache = forward(p, np.array([[2.0]]))
        assert cache.confidences[0, 0] == pytest.approx(expected, rel=1e-12)

    def test_dim_mismatch(self):
        p = init_params(RandomSource(0), 4, 3, 2)
        with pytest.raises(ShapeError):
            forward(p, np.zeros((2, 5)))

    def test_row_permutation_equivariance(self, np_rng):
        p = init_params(RandomSource(1), 5, 4, 3)
        x = np_rng.normal(size=(7, 5))
        perm = np_rng.permutation(7)
        direct = forward(p, x[perm]).confidences
        permuted = forward(p, x).confidences[perm]
        assert np.array_equal(direct, permuted)

    def test_confidences_clamped(self):
        p = zero_params(2, 3, 2)
        p.b3[:] = 100.0  # saturate the sigmoid
        conf = forward(p, np.zeros((1, 2))).confidences
        assert np.all(conf <= 1 - 1e-12)
        assert np.all(conf >= 1e-12)


class TestBackward:
    def test_zero_upstream_gradient(self):
        p = init_params(RandomSource(4), 4, 3, 2)
        cache = forward(p, np.ones((3, 4)))
        grads = backward(cache, p, np.zeros_like(cache.confidences))
        assert all(not g.any() for g in grads.as_tuple())

    def test_shape_mismatch(self):
        p = init_params(RandomSource(4), 4, 3, 2)
        cache = forward(p, np.ones((3, 4)))
        with pytest.raises(ShapeError):
            backward(cache, p, np.zeros((3, 5)))

    def test_finite_difference_all_params(self, np_rng):
        D, H, C = 6, 5, 4
        p = init_params(RandomSource(11), D, H, C)
        x = np_rng.normal(size=(3, D))
        y = np_rng.integers(0, C, size=3)

        def loss_of(flat):
            params = MlpParams.from_flat(flat, D, H, C)
            conf = forward(params, x).confidences
            return losses.loss_an(losses.LossInput(conf, y))[0]

        cache = forward(p, x)
        _, grad_conf = losses.loss_an(losses.LossInput(cache.confidences, y))
        analytic = backward(cache, p, grad_conf).flat()
        numeric = fd_gradient(loss_of, p.flat(), step=1e-5)
        assert max_rel_error(analytic, numeric) < 1e-5

    def test_batch_gradient_is_sum_of_instances(self, np_rng):
        D, H, C = 4, 3, 3
        p = init_params(RandomSource(7), D, H, C)
        x = np_rng.normal(size=(4, D))
        y = np_rng.integers(0, C, size=4)

        def grads_for(xi, yi, scale):
            cache = forward(p, xi)
            _, g = losses.loss_an(losses.LossInput(cache.confidences, yi))
            # undo the mean reduction so contributions add
            return backward(cache, p, g * scale).flat()

        whole = grads_for(x, y, 4.0)
        parts = sum(grads_for(x[i:i + 1], y[i:i + 1], 1.0) for i in range(4))
        assert np.allclose(whole, parts, rtol=1e-10, atol=1e-12)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        p = init_params(RandomSource(9), 5, 4, 3)
        path = tmp_path / "model.spmw"
        save_checkpoint(p, path)
        q = load_checkpoint(path)
        assert all(np.array_equal(a, b)
                   for a, b in zip(p.as_tuple(), q.as_tuple()))

    def test_truncated(self, tmp_path):
        p = init_params(RandomSource(9), 5, 4, 3)
        path = tmp_path / "model.spmw"
        save_checkpoint(p, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(DataFormatError, match="expected"):
            load_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.spmw"
        path.write_bytes(b"NOPE" + b"\0" * 100)
        with pytest.raises(DataFormatError, match="magic"):
            load_checkpoint(path)
