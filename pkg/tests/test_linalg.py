import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from postln_lens.errors import ConfigError, NoLegalMovesError
from postln_lens.linalg import LN_EPS, LayerNormParams, layer_norm, mish, softmax_masked, squared_relu, swish

finite = st.floats(-50, 50, allow_nan=False)


def test_layer_norm_zero_row():
    out, stats = layer_norm(np.zeros((3, 4)), LayerNormParams(np.ones(4), np.zeros(4)))
    assert (out == 0).all()
    assert (stats.mu == 0).all()
    assert np.allclose(stats.sigma, math.sqrt(LN_EPS))


def test_layer_norm_constant_row_gives_beta():
    beta = np.array([0.3, -1.0, 2.0])
    out, _ = layer_norm(np.full((2, 3), 7.5), LayerNormParams(np.array([2.0, 3.0, 4.0]), beta))
    assert np.allclose(out, beta, atol=1e-12)


def test_layer_norm_hand_example():
    out, stats = layer_norm(np.array([[1.0, -1.0]]), LayerNormParams(np.ones(2), np.zeros(2)), eps=0.0)
    assert out.tolist() == [[1.0, -1.0]]
    assert stats.mu[0] == 0.0 and stats.sigma[0] == 1.0


def test_layer_norm_dim_mismatch():
    with pytest.raises(ConfigError):
        layer_norm(np.zeros((2, 3)), LayerNormParams(np.ones(4), np.zeros(4)))


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (5, 6), elements=finite))
def test_layer_norm_moments(x):
    out, _ = layer_norm(x, LayerNormParams(np.ones(6), np.zeros(6)), eps=0.0 if x.var(axis=1).min() > 1e-6 else LN_EPS)
    assert np.abs(out.mean(axis=1)).max() <= 1e-10
    if x.var(axis=1).min() > 1e-6:
        assert np.abs(out.var(axis=1) - 1.0).max() <= 1e-10


def test_softmax_examples():
    assert np.allclose(softmax_masked(np.zeros(4), np.ones(4, bool)), 0.25, atol=0, rtol=0)
    p = softmax_masked(np.array([0.0, math.log(3)]), np.ones(2, bool))
    assert abs(p[0] - 0.25) <= 1e-12 and abs(p[1] - 0.75) <= 1e-12
    p = softmax_masked(np.array([5.0, 1.0, -3.0]), np.array([False, True, False]))
    assert p.tolist() == [0.0, 1.0, 0.0]


def test_softmax_empty_mask():
    with pytest.raises(NoLegalMovesError, match="no legal moves"):
        softmax_masked(np.zeros(3), np.zeros(3, bool))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, 12, elements=finite), arrays(bool, 12), st.floats(-1e3, 1e3))
def test_softmax_properties(logits, mask, c):
    mask[0] = True
    p = softmax_masked(logits, mask)
    assert abs(p[mask].sum() - 1.0) <= 1e-12
    assert (p[~mask] == 0).all()
    assert np.abs(softmax_masked(logits + c, mask) - p).max() <= 1e-12


def test_activation_examples():
    assert squared_relu(-2.0) == 0 and squared_relu(3.0) == 9
    assert mish(0.0) == 0 and swish(0.0) == 0


def test_activations_do_not_overflow():
    x = np.array([-1000.0, -31.0, 31.0, 1000.0])
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        for fn in (mish, swish):
            y = fn(x)
            assert np.isfinite(y).all()
    assert abs(mish(1000.0) - 1000.0) < 1e-9 and abs(swish(1000.0) - 1000.0) < 1e-9


def test_activation_reference_values():
    x = np.linspace(-20, 20, 101)
    assert np.allclose(mish(x), x * np.tanh(np.log1p(np.exp(x))), rtol=1e-12, atol=1e-300)
    assert np.allclose(swish(x), x / (1 + np.exp(-x)), rtol=1e-12, atol=1e-300)


def test_activations_monotone_on_positive_axis():
    x = np.sort(np.random.default_rng(0).uniform(0, 40, 1000))
    for fn in (mish, squared_relu, swish):
        assert (np.diff(fn(x)) >= 0).all()
