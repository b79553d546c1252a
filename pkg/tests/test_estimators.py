import math

import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from oseledets import (BaseSystem, LyapunovSpectrumEstimator, OseledetsSplitting, StableManifold,
                       UnstableManifold, builtin)

import oracles

P0 = BaseSystem().point(seed=2)
LOG2 = math.log(2)


def test_spectrum_estimator():
    est = LyapunovSpectrumEstimator(n_max=50).fit(
        builtin("constant_matrix", {"matrix": np.diag([2.0, 1.0, 0.5]).tolist()}), P0)
    assert np.allclose(est.mu_, [LOG2, 0, -LOG2], atol=1e-9)
    assert est.predict([1, 3]) == pytest.approx([LOG2, 0.0], abs=1e-9)
    assert est.get_params()["n_max"] == 50


def test_spectrum_estimator_needs_base_point():
    with pytest.raises(TypeError):
        LyapunovSpectrumEstimator().fit(builtin("random_diagonal"), 0)


def test_splitting_transform_roundtrip():
    M = [[2.0, 1.0], [0.0, 0.5]]
    est = OseledetsSplitting(n_spectrum=50).fit(builtin("constant_matrix", {"matrix": M}), P0)
    assert list(est.block_sizes_) == [1, 1]
    X = np.random.default_rng(0).standard_normal((5, 2))
    assert np.allclose(est.inverse_transform(est.transform(X)), X)
    fast, slow = est.components(X)
    assert np.allclose(fast + slow, X)
    for row in slow:
        assert oracles.sin_angle(row, [2, -3]) <= 1e-6


def test_splitting_not_fitted():
    with pytest.raises(NotFittedError):
        OseledetsSplitting().transform([[1.0, 0.0]])


def test_manifold_estimators():
    nc = builtin("deterministic_saddle")
    st = StableManifold(upsilon=0.3).fit(nc, P0)
    assert st.h1_ == pytest.approx(1.0)
    c = oracles.saddle_stable_coefficient()
    Z = st.transform([[0.03, 0.0]])
    assert Z[0, 1] == pytest.approx(c * 0.03 ** 2, abs=1e-8)
    # parameters may also be given as coordinates in the tangent basis
    W = st.transform([[0.02]])
    assert abs(W[0, 1] - c * 0.02 ** 2) <= 1e-8
    un = UnstableManifold(upsilon=0.3).fit(nc, P0)
    assert np.allclose(un.transform([[0.0, 0.05]]), [[0.0, 0.05]], atol=1e-10)
