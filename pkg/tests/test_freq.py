import numpy as np
import pytest

from dcsc.core import Dictionary, DictionaryFreq, circular_convolve_sum, circular_correlate
from dcsc.errors import DimensionError, ParameterError
from dcsc.freq import XUpdateWorkspace, x_update

from oracles import dense_bin_solve, naive_convolve_sum


def instance(seed, K=3, M=8, N=8, p=3):
    rng = np.random.default_rng(seed)
    filters = rng.standard_normal((K, p, p))
    s = rng.standard_normal((M, N))
    y = rng.standard_normal((K, M, N))
    u = rng.standard_normal((K, M, N))
    return Dictionary(filters), s, y, u


def subproblem(d, s, x, y, u, rho):
    r = circular_convolve_sum(d, x) - s
    w = x - y + u
    return 0.5 * np.sum(r * r) + 0.5 * rho * np.sum(w * w)


def test_identity_dictionary_closed_form(rng):
    d = Dictionary(np.ones((1, 1, 1)))
    s = rng.standard_normal((6, 7))
    y, u = rng.standard_normal((2, 1, 6, 7))
    rho = 2.5
    x = x_update(XUpdateWorkspace(DictionaryFreq(d, s.shape), s, rho), y, u)
    np.testing.assert_allclose(x[0], (s + rho * (y[0] - u[0])) / (1 + rho), atol=1e-12)


def test_zero_rhs(rng):
    d = Dictionary(rng.standard_normal((2, 3, 3)))
    y = rng.standard_normal((2, 8, 8))
    x = x_update(XUpdateWorkspace(DictionaryFreq(d, (8, 8)), np.zeros((8, 8)), 1.0), y, y)
    np.testing.assert_allclose(x, 0.0, atol=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_matches_dense_bin_solve(seed):
    d, s, y, u = instance(seed)
    rho = 1.7
    x = x_update(XUpdateWorkspace(DictionaryFreq(d, s.shape), s, rho), y, u)
    expected = dense_bin_solve(d.filters, s, y, u, rho)
    assert np.linalg.norm(x - expected) <= 1e-9 * np.linalg.norm(expected)


@pytest.mark.parametrize("seed,shape,K", [(0, (5, 9), 2), (1, (16, 16), 4), (2, (7, 4), 1)])
def test_first_order_optimality(seed, shape, K):
    d, s, y, u = instance(seed, K=K, M=shape[0], N=shape[1], p=3)
    s = 100 * s
    rho = 0.9
    x = x_update(XUpdateWorkspace(DictionaryFreq(d, s.shape), s, rho), y, u)
    residual = naive_convolve_sum(d.filters, x) - s
    grad = circular_correlate(d, residual) + rho * (x - y + u)
    assert np.max(np.abs(grad)) <= 1e-6 * (1 + np.max(np.abs(s)))


@pytest.mark.parametrize("seed", range(10))
def test_objective_not_above_input(seed):
    d, s, y, u = instance(seed, K=2, M=10, N=6)
    rho = 0.5 + seed
    x = x_update(XUpdateWorkspace(DictionaryFreq(d, s.shape), s, rho), y, u)
    assert subproblem(d, s, x, y, u, rho) <= subproblem(d, s, y, y, u, rho)


def test_output_is_real(rng):
    d, s, y, u = instance(4)
    x = x_update(XUpdateWorkspace(DictionaryFreq(d, s.shape), s, 1.0), y, u)
    assert x.dtype == np.float64


def test_errors(rng):
    d, s, y, u = instance(0)
    df = DictionaryFreq(d, s.shape)
    with pytest.raises(ParameterError):
        XUpdateWorkspace(df, s, 0.0)
    with pytest.raises(DimensionError):
        XUpdateWorkspace(df, np.zeros((4, 4)), 1.0)
    with pytest.raises(DimensionError):
        x_update(XUpdateWorkspace(df, s, 1.0), y[:2], u)
