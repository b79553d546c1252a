import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oseledets.base import BaseSystem, shift
from oseledets.builtins import LINEAR_BUILTINS, NONLINEAR_BUILTINS, builtin
from oseledets.cocycle import (compose_backward, compose_forward, perron_residual,
                               restricted_inverse, restricted_map)
from oseledets.exceptions import DependentBasisError
from oseledets.geometry import Fiber, Subspace

P0 = BaseSystem().point(seed=3)


def const(M):
    return builtin("constant_matrix", {"matrix": M})


def test_compose_forward_examples():
    c = const([[2.0, 0.0], [0.0, 0.5]])
    prod = compose_forward(c, P0, 0)
    assert np.array_equal(prod.matrix, np.eye(2)) and prod.log_scale == 0
    assert np.allclose(compose_forward(c, P0, 3).full(), np.diag([8, 0.125]))
    prod = compose_forward(c, P0, 600)
    assert np.all(np.isfinite(prod.matrix))
    # log-domain oracle: log of the (1,1) entry is 600 log 2
    assert math.log(prod.matrix[0, 0]) + prod.log_scale == pytest.approx(600 * math.log(2), rel=1e-12)


def test_compose_backward_examples():
    c = builtin("random_triangular")
    assert np.array_equal(compose_backward(c, P0, 1).matrix, c.matrix(shift(P0, -1)))
    k = const([[1.0, 2.0], [0.5, 1.0]])
    assert np.allclose(compose_backward(k, P0, 5).full(), compose_forward(k, P0, 5).full())
    f = compose_forward(c, P0, 7)
    b = compose_backward(c, shift(P0, 7), 7)
    assert b.start == P0
    assert np.allclose(b.full(), f.full(), rtol=1e-12)


@given(st.integers(0, 20), st.integers(0, 20), st.integers(0, 2**32))
def test_cocycle_law(n, m, seed):
    c = builtin("random_triangular")
    p = BaseSystem().point(seed=seed)
    whole = compose_forward(c, p, n + m).full()
    split = compose_forward(c, shift(p, m), n).full() @ compose_forward(c, p, m).full()
    assert np.allclose(whole, split, rtol=1e-9, atol=1e-9 * np.abs(whole).max())


def test_varying_dimension_shapes():
    c = builtin("varying_dimension", {"d1": 3, "d2": 2})
    assert c.matrix(P0).shape == (2, 3)
    assert c.matrix(shift(P0, 1)).shape == (3, 2)
    assert compose_forward(c, P0, 5).matrix.shape == (2, 3)


def test_restricted_inverse_examples():
    c = const([[2.0, 0.0], [0.0, 0.5]])
    f = Fiber(2)
    e1 = Subspace(f, [1.0, 0.0])
    assert np.allclose(restricted_inverse(compose_forward(c, P0, 0), e1, e1), [[1.0]])
    assert np.allclose(restricted_inverse(compose_forward(c, P0, 1), e1, e1), [[0.5]])
    A = np.random.default_rng(1).standard_normal((3, 3))
    full = Subspace.full(Fiber(3))
    got = restricted_inverse(compose_forward(const(A), P0, 1), full, full)
    assert np.allclose(got, np.linalg.inv(A), atol=1e-10)
    with pytest.raises(ValueError):
        restricted_inverse(compose_forward(c, P0, 1), Subspace(f, [0.0, 1.0]), e1)
    with pytest.raises(DependentBasisError):
        restricted_map(compose_forward(const([[0.0, 0.0], [0.0, 1.0]]), P0, 1), e1, e1)


def test_perron_residual_examples():
    nc = builtin("deterministic_saddle")
    assert np.array_equal(perron_residual(nc, P0, [0.0, 0.0]), [0.0, 0.0])
    assert np.allclose(perron_residual(nc, P0, [1.0, 0.0]), [0.0, 1.0])
    lin = builtin("deterministic_saddle", {"coupling": 0.0})
    assert np.allclose(perron_residual(lin, P0, [0.7, -0.3]), 0.0)


@given(st.sampled_from(NONLINEAR_BUILTINS), st.integers(0, 2**32))
def test_stationarity(name, seed):
    nc = builtin(name)
    p = BaseSystem().point(seed=seed)
    assert np.linalg.norm(nc(p, nc.stationary(p)) - nc.stationary(shift(p, 1))) <= 1e-12


@given(st.sampled_from(NONLINEAR_BUILTINS), st.integers(0, 2**32),
       st.lists(st.floats(-0.5, 0.5), min_size=2, max_size=2))
def test_derivative_matches_finite_differences(name, seed, x):
    nc = builtin(name)
    p = BaseSystem().point(seed=seed)
    x = np.array(x)
    J = nc.derivative(p, x)
    h = 1e-5
    fd = np.column_stack([(nc(p, x + h * e) - nc(p, x - h * e)) / (2 * h) for e in np.eye(2)])
    assert np.allclose(J, fd, atol=1e-8)


@given(st.integers(0, 8), st.integers(0, 8), st.integers(0, 2**32))
def test_nonlinear_cocycle_law(n, m, seed):
    nc = builtin("quadratic_saddle")
    p = BaseSystem().point(seed=seed)
    x = np.array([0.3, -0.2])
    assert np.allclose(nc.iterate(p, x, n + m), nc.iterate(shift(p, m), nc.iterate(p, x, m), n),
                       rtol=1e-10, atol=1e-12)


def test_linearization_chain_rule():
    nc = builtin("quadratic_saddle")
    Y = nc.stationary(P0)
    n = 6
    prod = compose_forward(nc.linearization(), P0, n).full()
    h = 1e-6
    fd = np.column_stack([(nc.iterate(P0, Y + h * e, n) - nc.iterate(P0, Y - h * e, n)) / (2 * h)
                          for e in np.eye(2)])
    assert np.allclose(prod, fd, rtol=1e-5, atol=1e-6)


@given(st.sampled_from(NONLINEAR_BUILTINS), st.integers(0, 2**32), st.integers(0, 2**32))
def test_remainder_bound_holds(name, seed, draw_seed):
    nc = builtin(name)
    p = BaseSystem().point(seed=seed)
    nl = nc.nonlinearity
    rng = np.random.default_rng(draw_seed)
    rho = nl.rho_fn(p)
    for _ in range(20):
        a, b = rng.uniform(-1, 1, (2, 2))
        a *= rng.uniform(0, rho) / max(np.linalg.norm(a), 1e-12)
        b *= rng.uniform(0, rho) / max(np.linalg.norm(b), 1e-12)
        lhs = np.linalg.norm(perron_residual(nc, p, a) - perron_residual(nc, p, b))
        rhs = np.linalg.norm(a - b) * nl.f_fn(p) * nl.h(np.linalg.norm(a) + np.linalg.norm(b))
        assert lhs <= rhs * (1 + 1e-12) + 1e-15


@pytest.mark.parametrize("name", LINEAR_BUILTINS + NONLINEAR_BUILTINS)
def test_builtins_construct(name):
    s = builtin(name)
    assert s.meta["name"] == name


def test_builtin_errors():
    with pytest.raises(ValueError):
        builtin("lorenz")
    with pytest.raises(ValueError):
        builtin("deterministic_saddle", {"bogus": 1})
    with pytest.raises(ValueError):
        builtin("constant_matrix", {"matrix": [[1.0, 2.0]]})
