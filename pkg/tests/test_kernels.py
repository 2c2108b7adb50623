"""Backend parity: the compiled kernels must agree with the numpy
fallback to float64 round-off on identical inputs."""

import numpy as np
import pytest

from retrorank.numcore import kernels
from retrorank.numcore.prng import Prng

BACKENDS = kernels.available_backends()


def lstm_case(seed, steps=7, input_dim=3, hidden=5, masked=True):
    rng = Prng(seed)
    x = rng.fill_uniform((steps, input_dim), -1, 1)
    w = rng.fill_uniform((4 * hidden, input_dim), -0.5, 0.5)
    u = rng.fill_uniform((4 * hidden, hidden), -0.5, 0.5)
    b = rng.fill_uniform((4 * hidden,), -0.5, 0.5)
    mask = np.ones(steps, dtype=np.uint8)
    if masked:
        mask[2] = 0
        mask[steps - 1] = 0
    gh = rng.fill_uniform((steps, hidden), -1, 1)
    return x @ w.T, u, b, mask, gh


@pytest.mark.parametrize("masked", [False, True])
def test_lstm_backends_agree(masked):
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    ax, u, b, mask, gh = lstm_case(11, masked=masked)
    results = {}
    for name, mod in BACKENDS.items():
        hs, cs, gates = mod.lstm_forward(ax, u, b, mask)
        da = mod.lstm_backward(u, mask, hs, cs, gates, gh)
        results[name] = (hs, cs, gates, da)
    for a, b_ in zip(results["python"], results["cython"]):
        np.testing.assert_allclose(a, b_, atol=1e-13)


def test_conv_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    rng = Prng(23)
    x = rng.fill_uniform((2, 7, 5), -1, 1)
    k = rng.fill_uniform((4, 2, 3, 3), -1, 1)
    gout = rng.fill_uniform((4, 4, 3), -1, 1)
    outs = {}
    for name, mod in BACKENDS.items():
        out, argmax = mod.conv_pool_forward(x, k)
        gx, gk = mod.conv_pool_backward(x, k, argmax, gout)
        outs[name] = (out, argmax, gx, gk)
    np.testing.assert_allclose(outs["python"][0], outs["cython"][0], atol=1e-13)
    np.testing.assert_array_equal(outs["python"][1], outs["cython"][1])
    np.testing.assert_allclose(outs["python"][2], outs["cython"][2], atol=1e-13)
    np.testing.assert_allclose(outs["python"][3], outs["cython"][3], atol=1e-13)


def test_pool_tie_break_is_first_in_scan_order():
    # a window of equal values must pick the lowest flat index in both backends
    x = np.zeros((1, 2, 2))
    k = np.zeros((1, 1, 3, 3))
    k[0, 0, 1, 1] = 1.0
    for mod in BACKENDS.values():
        out, argmax = mod.conv_pool_forward(x, k)
        assert argmax[0, 0, 0] == 0


def test_sigmoid_backends_agree_on_extremes():
    xs = np.array([-745.0, -50.0, -1.0, 0.0, 1.0, 50.0, 745.0])
    ref = None
    for mod in BACKENDS.values():
        got = mod.sigmoid(xs)
        assert np.all(got > 0), "no underflow to exactly zero"
        assert np.all(got <= 1.0)
        assert np.all(got[xs <= 36] < 1.0)
        if ref is None:
            ref = got
        else:
            np.testing.assert_allclose(got, ref, atol=1e-15)


def test_masked_steps_copy_state_exactly():
    ax, u, b, mask, _ = lstm_case(3, steps=6, masked=False)
    mask = np.array([1, 1, 0, 0, 1, 0], dtype=np.uint8)
    hs, cs, _ = kernels.lstm_forward(ax, u, b, mask)
    np.testing.assert_array_equal(hs[2], hs[1])
    np.testing.assert_array_equal(hs[3], hs[1])
    np.testing.assert_array_equal(cs[3], cs[1])
    np.testing.assert_array_equal(hs[5], hs[4])
