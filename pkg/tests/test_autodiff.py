import numpy as np
import pytest

from retrorank.numcore import autodiff as ad
from retrorank.numcore.prng import Prng


def triple_loop_matmul(a, b):
    p, q = a.shape
    q2, r = b.shape
    out = np.zeros((p, r))
    for i in range(p):
        for j in range(r):
            acc = 0.0
            for k in range(q):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


class TestMatmul:
    def test_identity(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = ad.matmul(ad.constant(np.eye(2)), ad.constant(m))
        np.testing.assert_array_equal(out.value, m)

    def test_orthogonal_rows(self):
        out = ad.matmul(ad.constant([[1.0, 0.0]]), ad.constant([[0.0], [5.0]]))
        np.testing.assert_array_equal(out.value, [[0.0]])

    def test_random_against_triple_loop(self):
        rng = Prng(2024)
        a = rng.fill_uniform((3, 4), -2, 2)
        b = rng.fill_uniform((4, 2), -2, 2)
        out = ad.matmul(ad.constant(a), ad.constant(b))
        np.testing.assert_allclose(out.value, triple_loop_matmul(a, b), rtol=1e-12)

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ad.ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
            ad.matmul(ad.constant(np.zeros((2, 3))), ad.constant(np.zeros((2, 2))))

    def test_gradients(self):
        rng = Prng(5)
        a = ad.parameter(rng.fill_uniform((2, 3), -1, 1))
        b = ad.parameter(rng.fill_uniform((3, 2), -1, 1))
        loss = ad.sum_all(ad.matmul(a, b))
        ad.backward(loss)
        np.testing.assert_allclose(a.grad, np.ones((2, 2)) @ b.value.T)
        np.testing.assert_allclose(b.grad, a.value.T @ np.ones((2, 2)))


class TestSigmoid:
    def test_zero_is_half(self):
        assert float(ad.sigmoid(ad.constant(0.0)).value) == 0.5

    def test_large_negative_does_not_underflow_to_zero(self):
        v = float(ad.sigmoid(ad.constant(-50.0)).value)
        assert v > 0.0
        assert v < 1e-20

    def test_value_at_one(self):
        # high-precision scalar: 1/(1+exp(-1))
        assert float(ad.sigmoid(ad.constant(1.0)).value) == pytest.approx(
            0.7310585786300049, abs=1e-15)

    def test_range_and_symmetry(self):
        # strict (0, 1) holds up to where float64 can represent it;
        # beyond |x| ~ 36.7 the true value rounds to the boundary
        xs = np.linspace(-36, 36, 361)
        vals = ad.sigmoid(ad.constant(xs)).value
        assert np.all((vals > 0) & (vals < 1))
        flipped = ad.sigmoid(ad.constant(-xs)).value
        np.testing.assert_allclose(vals + flipped, 1.0, atol=1e-12)

    def test_gradient(self):
        x = ad.parameter([0.3, -1.2])
        out = ad.sigmoid(x)
        ad.backward(ad.sum_all(out))
        np.testing.assert_allclose(x.grad, out.value * (1 - out.value))


class TestElementwiseSuite:
    def test_sq_norm_zero(self):
        assert float(ad.sq_norm(ad.constant(np.zeros(5))).value) == 0.0

    def test_sq_norm_pythagorean(self):
        assert float(ad.sq_norm(ad.constant([3.0, 4.0])).value) == 25.0

    def test_sq_norm_gradient_is_2x(self):
        w = ad.parameter([3.0, 4.0])
        ad.backward(ad.sq_norm(w))
        np.testing.assert_array_equal(w.grad, [6.0, 8.0])

    def test_concat_lengths_add(self):
        out = ad.concat([ad.constant([1.0, 2.0]), ad.constant([3.0, 4.0, 5.0])])
        assert out.value.shape == (5,)

    def test_concat_gradient_slices(self):
        a = ad.parameter([1.0, 2.0])
        b = ad.parameter([3.0, 4.0, 5.0])
        out = ad.concat([a, b])
        ad.backward(ad.sq_norm(out))
        np.testing.assert_array_equal(a.grad, 2 * a.value)
        np.testing.assert_array_equal(b.grad, 2 * b.value)

    def test_add_mul_shape_errors(self):
        with pytest.raises(ad.ShapeError):
            ad.add(ad.constant([1.0]), ad.constant([1.0, 2.0]))
        with pytest.raises(ad.ShapeError):
            ad.mul(ad.constant([1.0]), ad.constant([1.0, 2.0]))

    def test_tanh_and_narrow(self):
        x = ad.parameter([0.5, -0.5, 2.0, 0.0])
        part = ad.narrow(x, 0, 1, 2)
        out = ad.tanh(part)
        ad.backward(ad.sum_all(out))
        expected = np.zeros(4)
        expected[1:3] = 1 - np.tanh(x.value[1:3]) ** 2
        np.testing.assert_allclose(x.grad, expected)

    def test_softplus_matches_log1p_exp(self):
        xs = np.array([-700.0, -3.0, 0.0, 3.0, 700.0])
        out = ad.softplus(ad.constant(xs)).value
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out[1:4], np.log1p(np.exp(xs[1:4])), rtol=1e-12)
        assert 0.0 < out[0] < 1e-300  # ~= e^-700, not flushed to zero
        assert out[4] == 700.0


class TestConvPool:
    def test_all_zero_input(self):
        x = ad.constant(np.zeros((1, 4, 4)))
        k = ad.constant(np.ones((2, 1, 3, 3)))
        out = ad.conv2d_maxpool(x, k)
        np.testing.assert_array_equal(out.value, np.zeros((2, 2, 2)))

    def test_identity_center_kernel_pools_max(self):
        x = np.array([[[1.0, -2.0], [0.5, 0.25]]])
        k = np.zeros((1, 1, 3, 3))
        k[0, 0, 1, 1] = 1.0  # passes the input through unchanged
        out = ad.conv2d_maxpool(ad.constant(x), ad.constant(k))
        assert out.value.shape == (1, 1, 1)
        assert float(out.value[0, 0, 0]) == 1.0

    def test_random_against_nested_loop_oracle(self):
        rng = Prng(77)
        x = rng.fill_uniform((1, 4, 4), -1, 1)
        k = rng.fill_uniform((2, 1, 3, 3), -1, 1)
        out = ad.conv2d_maxpool(ad.constant(x), ad.constant(k))
        np.testing.assert_allclose(out.value, conv_pool_oracle(x, k), rtol=1e-12)

    def test_odd_edges_pool_remaining_strip(self):
        rng = Prng(8)
        x = rng.fill_uniform((2, 5, 3), -1, 1)
        k = rng.fill_uniform((3, 2, 3, 3), -1, 1)
        out = ad.conv2d_maxpool(ad.constant(x), ad.constant(k))
        assert out.value.shape == (3, 3, 2)
        np.testing.assert_allclose(out.value, conv_pool_oracle(x, k), rtol=1e-12)

    def test_channel_mismatch(self):
        with pytest.raises(ValueError, match="channels"):
            ad.conv2d_maxpool(ad.constant(np.zeros((2, 4, 4))),
                              ad.constant(np.zeros((1, 3, 3, 3))))


def conv_pool_oracle(x, k):
    channels, height, width = x.shape
    filters = k.shape[0]
    conv = np.zeros((filters, height, width))
    for f in range(filters):
        for h in range(height):
            for w in range(width):
                acc = 0.0
                for c in range(channels):
                    for i in range(3):
                        for j in range(3):
                            hh, ww = h + i - 1, w + j - 1
                            if 0 <= hh < height and 0 <= ww < width:
                                acc += x[c, hh, ww] * k[f, c, i, j]
                conv[f, h, w] = acc
    oh, ow = (height + 1) // 2, (width + 1) // 2
    out = np.zeros((filters, oh, ow))
    for f in range(filters):
        for ph in range(oh):
            for pw in range(ow):
                cells = conv[f, ph * 2:ph * 2 + 2, pw * 2:pw * 2 + 2]
                out[f, ph, pw] = cells.max()
    return out


class TestBackward:
    def test_requires_scalar_loss(self):
        with pytest.raises(ad.AutodiffError, match="scalar"):
            ad.backward(ad.parameter([1.0, 2.0]))

    def test_repeated_backward_is_an_error(self):
        w = ad.parameter([1.0, 2.0])
        loss = ad.sq_norm(w)
        ad.backward(loss)
        with pytest.raises(ad.AutodiffError, match="already ran"):
            ad.backward(loss)

    def test_sigmoid_of_dot_at_zero_weights(self):
        x = np.array([2.0, -1.0, 0.5])
        w = ad.parameter(np.zeros(3))
        loss = ad.sigmoid(ad.dot(w, ad.constant(x)))
        ad.backward(loss)
        np.testing.assert_allclose(w.grad, 0.25 * x)

    def test_sum_of_losses_equals_sum_of_grads(self):
        rng = Prng(12)
        init = rng.fill_uniform((4,), -1, 1)

        w = ad.parameter(init.copy())
        ad.backward(ad.add(ad.sq_norm(w), ad.sum_all(ad.tanh(w))))
        joint = w.grad.copy()

        w2 = ad.parameter(init.copy())
        ad.backward(ad.sq_norm(w2))
        first = w2.grad.copy()
        ad.zero_grad([w2])
        ad.backward(ad.sum_all(ad.tanh(w2)))
        second = w2.grad.copy()
        np.testing.assert_allclose(joint, first + second, atol=1e-12)

    def test_grad_accumulates_across_backwards_until_zero_grad(self):
        w = ad.parameter([1.0, 1.0])
        ad.backward(ad.sq_norm(w))
        ad.backward(ad.sq_norm(w))
        np.testing.assert_array_equal(w.grad, [4.0, 4.0])
        ad.zero_grad([w])
        assert w.grad is None

    def test_shared_subgraph_accumulates(self):
        w = ad.parameter([2.0])
        y = ad.mul(w, w)
        loss = ad.sum_all(ad.add(y, y))
        ad.backward(loss)
        np.testing.assert_allclose(w.grad, [8.0])

    def test_no_grad_builds_no_tape(self):
        w = ad.parameter([1.0])
        with ad.no_grad():
            out = ad.sq_norm(w)
        assert out.parents == ()
        assert not out.requires_grad


class TestDeterminism:
    def test_ops_bitwise_reproducible(self):
        rng1, rng2 = Prng(55), Prng(55)
        a1 = rng1.fill_uniform((6, 6), -1, 1)
        a2 = rng2.fill_uniform((6, 6), -1, 1)
        r1 = ad.tanh(ad.matmul(ad.constant(a1), ad.constant(a1))).value
        r2 = ad.tanh(ad.matmul(ad.constant(a2), ad.constant(a2))).value
        np.testing.assert_array_equal(r1, r2)


class TestFiniteCheck:
    def test_flag_catches_overflow(self):
        ad.set_check_finite(True)
        try:
            with pytest.raises(ad.AutodiffError, match="non-finite"):
                ad.mul(ad.constant(np.array([1e300])), ad.constant(np.array([1e300])))
        finally:
            ad.set_check_finite(False)
