import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oseledets.base import BaseSystem, shift
from oseledets.builtins import builtin
from oseledets.cocycle import compose_backward, compose_forward
from oseledets.geometry import Subspace, dist_to_span, dk_of_map, grassmann_delta, L2
from oseledets.spectrum import (LyapunovSpectrum, estimate_exponents, estimate_spectrum,
                                growth_series, growth_series_all, restricted_cocycle, slow_space,
                                temperedness_check, vector_growth_rate)

import oracles

P0 = BaseSystem().point(seed=1)
LOG2 = math.log(2)


def const(M):
    return builtin("constant_matrix", {"matrix": M})


DIAG2 = const([[2.0, 0.0], [0.0, 0.5]])
TRI = const([[2.0, 1.0], [0.0, 0.5]])


def test_growth_series_diagonal():
    s1 = growth_series(DIAG2, P0, 1, 64)
    assert np.allclose(s1.values, LOG2, atol=1e-14)
    s2 = growth_series(DIAG2, P0, 2, 64)
    assert np.allclose(s2.values, 0.0, atol=1e-14)
    b = growth_series(DIAG2, P0, 1, 64, "backward")
    assert np.array_equal(s1.values, b.values)


def test_growth_series_k_too_large():
    with pytest.raises(ValueError):
        growth_series(DIAG2, P0, 3, 10)


def test_exact_diagonal_spectrum():
    spec = estimate_spectrum(const(np.diag([2.0, 1.0, 0.5])), P0, 50)
    assert np.allclose(spec.mu, [LOG2, 0.0, -LOG2], atol=1e-9)
    assert spec.mult == (1, 1, 1)
    assert spec.mtilde == (1, 2, 3)


def test_iid_two_point_scalar():
    n = 10_000
    c = builtin("random_diagonal", {"choices": [[4.0, 0.5]]})
    spec = estimate_spectrum(c, P0, n)
    mean, sd = oracles.two_point_log_mean([4.0, 0.5])
    assert mean == pytest.approx(0.5 * LOG2)
    # the tail average mixes horizons 3n/4..n; the endpoint value carries the largest error
    assert abs(spec.mu[0] - mean) <= 3 * sd / math.sqrt(0.75 * n)


def test_jordan_block_multiplicity_two():
    spec = estimate_spectrum(const([[1.0, 1.0], [0.0, 1.0]]), P0, 1000)
    assert spec.mult == (2,)
    assert abs(spec.mu[0]) < 0.02


def test_minus_infinity_reported():
    spec = estimate_spectrum(const([[1.0, 0.0], [0.0, 0.0]]), P0, 50)
    assert spec.mu[-1] == -math.inf


def test_undecided_status():
    # a series that has not settled: growth rate drifts with n
    from oseledets.spectrum import GrowthSeries
    n = np.arange(1, 41)
    series = [GrowthSeries(1, "forward", n, np.linspace(0.0, 4.0, 40))]
    assert estimate_exponents(series).status == "undecided"


def test_estimate_exponents_needs_eight_values():
    from oseledets.spectrum import GrowthSeries
    with pytest.raises(ValueError):
        estimate_exponents([GrowthSeries(1, "forward", np.arange(1, 5), np.zeros(4))])


@pytest.mark.parametrize("name", ["random_triangular", "random_diagonal", "rotation_scaling"])
def test_lambda_concave(name):
    spec = estimate_spectrum(builtin(name), P0, 1000)
    L = (0.0,) + spec.Lambda
    for k in range(1, len(L) - 1):
        assert L[k + 1] - L[k] <= L[k] - L[k - 1] + 0.1


@settings(max_examples=15)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 2**32), st.integers(1, 2))
def test_subadditive_along_orbit(n, m, seed, k):
    # log D_k(psi^{n+m}_p) <= log D_k(psi^n_{theta^m p}) + log D_k(psi^m_p)
    c = builtin("random_triangular")
    p = BaseSystem().point(seed=seed)

    def logdk(q, steps):
        prod = compose_forward(c, q, steps)
        return prod.log_scale * k + math.log(dk_of_map(prod.matrix, L2, L2, k).value)

    assert logdk(p, n + m) <= logdk(shift(p, m), n) + logdk(p, m) + 1e-9
    series = growth_series_all(c, p, k, n + m, record=[m, n + m])[k - 1]
    vals = dict(zip(series.n.tolist(), series.values))
    later = growth_series_all(c, shift(p, m), k, n, record=[n])[k - 1].values[-1]
    assert (n + m) * vals[n + m] <= n * later + m * vals[m] + 1e-6


def test_slow_space_examples():
    spec = estimate_spectrum(DIAG2, P0, 50)
    F = slow_space(DIAG2, P0, spec, 2, 40)
    assert grassmann_delta(F, Subspace(F.fiber, [0.0, 1.0])).value <= 1e-8
    assert slow_space(DIAG2, P0, spec, 1, 40).dim == 2
    spec = estimate_spectrum(TRI, P0, 50)
    F = slow_space(TRI, P0, spec, 2, 40)
    _, V = oracles.eigen_directions([[2.0, 1.0], [0.0, 0.5]])
    assert oracles.sin_angle(F.basis[:, 0], V[:, 1]) <= 1e-6
    assert oracles.sin_angle(V[:, 1], [2.0, -3.0]) <= 1e-12


def test_vector_growth_rate_examples():
    assert vector_growth_rate(DIAG2, P0, [1.0, 0.0], 50) == pytest.approx(LOG2)
    assert vector_growth_rate(DIAG2, P0, [1.0, 1.0], 200) == pytest.approx(LOG2, abs=0.01)
    spec = estimate_spectrum(TRI, P0, 50)
    x = slow_space(TRI, P0, spec, 2, 40).basis[:, 0]
    assert vector_growth_rate(TRI, P0, x, 40, within=(spec, 2)) <= -LOG2 + 0.05
    with pytest.raises(ValueError):
        vector_growth_rate(TRI, P0, [0.0, 0.0], 10)


def test_forward_backward_agreement_random_triangular():
    c = builtin("random_triangular")
    f = estimate_spectrum(c, P0, 2000)
    b = estimate_spectrum(c, P0, 2000, direction="backward")
    assert np.allclose(f.Lambda, b.Lambda, atol=0.05)


def test_restricted_growth_on_slow_space():
    c = builtin("random_diagonal")
    spec = estimate_spectrum(c, P0, 1000)
    rc = restricted_cocycle(c, P0, spec, 2, 401)
    sub = estimate_spectrum(rc, P0, 400)
    m = spec.mtilde[0]
    for k, L in enumerate(sub.Lambda, 1):
        assert L == pytest.approx(spec.Lambda[k + m - 1] - spec.Lambda[m - 1], abs=0.05)


def test_quotient_growth_backward():
    c = builtin("random_triangular")
    spec = estimate_spectrum(c, P0, 1000)
    n = 300
    start = shift(P0, -n)
    F_start = slow_space(c, start, spec, 2, 200)
    F_end = slow_space(c, P0, spec, 2, 200)
    xi = np.array([1.0, 0.0])
    q0 = dist_to_span(xi, F_start)
    prod = compose_backward(c, P0, n)
    qn = dist_to_span(prod.matrix @ xi, F_end)
    rate = (math.log(qn) + prod.log_scale - math.log(q0)) / n
    assert rate == pytest.approx(spec.mu[0], abs=0.05)


@pytest.mark.parametrize("scale", [2.0, 0.25])
def test_scale_invariance(scale):
    c = builtin("random_triangular")
    a = estimate_spectrum(c, P0, 400)
    b = estimate_spectrum(c.scaled(scale), P0, 400)
    for k, (x, y) in enumerate(zip(a.Lambda, b.Lambda), 1):
        assert y - x == pytest.approx(k * math.log(scale), abs=1e-9)
    assert b.mult == a.mult
    assert np.allclose(np.array(b.mu) - np.array(a.mu), math.log(scale), atol=1e-9)


def test_temperedness_examples():
    t = temperedness_check(lambda q: 3.0, P0, 100)
    assert t.forward_slope == pytest.approx(0, abs=1e-14) and t.tempered
    c = builtin("random_triangular")
    t = temperedness_check(lambda q: float(np.linalg.norm(c.matrix(q), 2)), P0, 10_000)
    assert abs(t.forward_slope) <= 0.02 and abs(t.backward_slope) <= 0.02
    t = temperedness_check(lambda q: math.exp(q.time - P0.time), P0, 200)
    assert t.forward_slope == pytest.approx(1.0, abs=1e-9)
    assert not t.tempered


def test_from_exponents_grouping():
    s = LyapunovSpectrum.from_exponents([0.5, 0.45, -1.0])
    assert s.mult == (2, 1)
    assert s.codim(2) == 2
    assert s.gap(1) == pytest.approx(1.475)
