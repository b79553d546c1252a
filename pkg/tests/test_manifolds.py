import dataclasses
import math

import numpy as np
import pytest

from oseledets import BaseSystem, FieldSpec, NonlinearCocycle, Nonlinearity, builtin
from oseledets.exceptions import BoundViolation, NonHyperbolicError
from oseledets.geometry import L2
from oseledets.manifolds import (WeightedSequence, compute_h1_h2, fixed_point_orbit_check,
                                 inverse_h, invariance_check, membership, pairwise_contraction,
                                 parameter_lipschitz_check, perron_context, perron_map_stable,
                                 perron_radius, solve_stable, solve_unstable, stable_chart,
                                 stable_growth_sampler, tangency_check, transversality_check,
                                 uniqueness_check, unstable_chart)
from oseledets.spectrum import LyapunovSpectrum, estimate_spectrum, temperedness_check

import oracles

P0 = BaseSystem().point(seed=0)
LOG2 = math.log(2)
C_STABLE = oracles.saddle_stable_coefficient()


@pytest.fixture(scope="module")
def saddle():
    return builtin("deterministic_saddle")


@pytest.fixture(scope="module")
def stable_ctx(saddle):
    return perron_context(saddle, P0, "stable", 0.3)


@pytest.fixture(scope="module")
def unstable_ctx(saddle):
    return perron_context(saddle, P0, "unstable", 0.3)


@pytest.fixture(scope="module")
def linear_saddle():
    return builtin("deterministic_saddle", {"coupling": 0.0})


@pytest.fixture(scope="module")
def quad():
    nc = builtin("quadratic_saddle")
    return nc, estimate_spectrum(nc.linearization(), P0, 2000)


def _x_grid(ctx, xs):
    return [np.array([x, 0.0]) for x in xs]


def test_inverse_h_and_radius_arithmetic():
    assert inverse_h(lambda x: x ** 3, 8.0) == pytest.approx(2.0, abs=1e-10)
    R, H1 = perron_radius(1.0, 1.0, 1.0, lambda x: x)
    assert R == pytest.approx(0.125) and H1 == pytest.approx(0.25)
    R, _ = perron_radius(2.0, 0.0, 0.7, lambda x: x)
    assert R == pytest.approx(0.7 / 4)


def test_h1_h2_against_closed_form(saddle):
    for ups in (0.3, 0.5):
        ctx = perron_context(saddle, P0, "stable", ups)
        ref = oracles.saddle_constants(ups, ctx.N)
        assert ctx.h1 == pytest.approx(ref["h1"], rel=1e-12)
        assert ctx.h1 == pytest.approx(1.0)
        assert ctx.h2 == pytest.approx(ref["h2"], rel=1e-10)
        assert ctx.R == pytest.approx(ref["R"], rel=1e-10)
        assert compute_h1_h2(ctx) == pytest.approx((ctx.h1, ctx.h2))


def test_upsilon_window(saddle):
    with pytest.raises(ValueError):
        perron_context(saddle, P0, "stable", LOG2)
    with pytest.raises(ValueError):
        perron_context(saddle, P0, "unstable", 0.0)


def test_h_constants_monotone_in_horizon(saddle):
    a = perron_context(saddle, P0, "stable", 0.3, N=10)
    b = perron_context(saddle, P0, "stable", 0.3, N=40)
    assert a.h1 <= b.h1 + 1e-15 and a.h2 <= b.h2 + 1e-15


def test_linear_radius_limit(linear_saddle):
    ctx = perron_context(linear_saddle, P0, "stable", 0.3)
    assert ctx.R == pytest.approx(ctx.rho_tilde / (2 * ctx.h1))


def test_quadratic_saddle_constants_tempered(quad):
    nc, spec = quad
    ctx = perron_context(nc, P0, "stable", 0.3, spectrum=spec)
    assert math.isfinite(ctx.h1) and math.isfinite(ctx.h2) and ctx.h1 >= 1
    sample = stable_growth_sampler(nc, P0, spec, ctx.epsilon, 1000)
    t = temperedness_check(sample, P0, 1000)
    assert abs(t.forward_slope) <= 0.05 and abs(t.backward_slope) <= 0.05


def test_perron_map_zero(stable_ctx):
    G = solve_stable(stable_ctx, [0.0, 0.0]).sequence
    assert all(not np.any(e) for e in G.entries)
    out = perron_map_stable(stable_ctx, [0.0, 0.0], G)
    assert all(not np.any(e) for e in out.entries)


def test_linear_system_fixed_point(linear_saddle):
    ctx = perron_context(linear_saddle, P0, "stable", 0.3)
    fp = solve_stable(ctx, [0.2, 0.0])
    # one application reaches the fixed point; the second confirms it
    assert fp.residual_log[1] == 0.0
    for n, e in enumerate(fp.sequence.entries):
        assert np.allclose(e, [0.2 * 0.5 ** n, 0.0], rtol=1e-12, atol=1e-300)
    chk = fixed_point_orbit_check(ctx, [0.2, 0.0], fp.sequence)
    assert chk["max_abs"] <= 1e-12
    chart = stable_chart(ctx, [[0.1, 0.0], [-0.1, 0.0]])
    assert tangency_check(chart)["delta"] <= 1e-14


def test_exact_stable_manifold(stable_ctx):
    xs = [-0.04, -0.02, -0.01, 0.01, 0.02, 0.04]
    chart = stable_chart(stable_ctx, _x_grid(stable_ctx, xs))
    for (x, y), v in zip(chart.points, xs):
        assert x == pytest.approx(v, abs=1e-15)
        assert abs(y - C_STABLE * v * v) <= 1e-8
    assert np.all(chart.residuals <= 1e-10)
    assert all(r <= 0.55 for fp in chart.fixed_points for r in fp.ratios)
    assert chart.checks["decay"]["ok"]
    assert np.all(chart.decay_rates <= -LOG2 + 0.05)


def test_outside_radius_still_on_manifold(stable_ctx):
    with pytest.raises(ValueError):
        solve_stable(stable_ctx, [0.1, 0.0])
    fp = solve_stable(stable_ctx, [0.1, 0.0], require_radius=False)
    assert fp.point_offset[1] == pytest.approx(C_STABLE * 0.01, abs=1e-8)


def test_zero_parameter_gives_stationary_point(stable_ctx, unstable_ctx):
    assert np.array_equal(stable_chart(stable_ctx, [[0.0, 0.0]]).points[0], [0.0, 0.0])
    assert np.array_equal(unstable_chart(unstable_ctx, [[0.0, 0.0]]).points[0], [0.0, 0.0])


def test_non_contraction_is_a_hard_error():
    nc = NonlinearCocycle(
        FieldSpec.constant(2),
        lambda q, x: np.array([0.5 * x[0] + x[1] ** 2, 2 * x[1] + x[0] ** 2]),
        lambda q, x: np.array([[0.5, 2 * x[1]], [2 * x[0], 2.0]]),
        lambda q: np.zeros(2),
        Nonlinearity(1.0, lambda x: 1.0, lambda q: 1.0, lambda q: 1.0))
    ctx = perron_context(nc, P0, "stable", 0.3)
    assert max(solve_stable(ctx, [0.04, 0.0]).ratios) <= 0.55
    with pytest.raises(BoundViolation) as err:
        solve_stable(ctx, [1.0, 0.0], require_radius=False)
    assert err.value.bound == "picard_contraction"


def test_orbit_check_saddle_and_negative_control(stable_ctx):
    for x in (0.05, -0.03):
        fp = solve_stable(stable_ctx, [x, 0.0], require_radius=False)
        assert fixed_point_orbit_check(stable_ctx, [x, 0.0], fp.sequence, 30)["max_abs"] <= 1e-8
    fp = solve_stable(stable_ctx, [0.04, 0.0])
    bad = WeightedSequence(fp.sequence.base_point, "forward", 0.3,
                           tuple(e + np.array([0.0, 1e-4]) for e in fp.sequence.entries),
                           fp.sequence.norms)
    chk = fixed_point_orbit_check(stable_ctx, [0.04, 0.0], bad, 30)
    assert chk["max_abs"] > 1e-6
    assert chk["abs"][-1] > chk["abs"][1]


def test_tangency(stable_ctx, unstable_ctx):
    chart = stable_chart(stable_ctx, [[0.02, 0.0]])
    tg = tangency_check(chart)
    assert tg["delta"] <= 1e-6 and tg["ok"]
    T = np.array(tg["tangent"])[:, 0]
    assert oracles.sin_angle(T, [1, 0]) <= 1e-6
    uchart = unstable_chart(unstable_ctx, [[0.0, 0.05]])
    T = np.array(tangency_check(uchart)["tangent"])[:, 0]
    assert oracles.sin_angle(T, [0, 1]) <= 1e-10


def test_unstable_axis(unstable_ctx):
    ys = [-0.1, -0.05, 0.05, 0.1]
    assert unstable_ctx.R > 0.1
    chart = unstable_chart(unstable_ctx, [[0.0, y] for y in ys])
    assert np.abs(chart.points[:, 0]).max() <= 1e-10
    assert np.allclose(chart.points[:, 1], ys, atol=1e-10)
    for y, fp in zip(ys, chart.fixed_points):
        for n, e in enumerate(fp.sequence.entries):
            assert np.allclose(e, [0.0, y * 2.0 ** -n], atol=1e-10)
    assert chart.checks["recomposition"]["ok"]
    assert chart.checks["decay"]["ok"]


def test_unstable_linear_powers(linear_saddle):
    ctx = perron_context(linear_saddle, P0, "unstable", 0.3)
    fp = solve_unstable(ctx, [0.0, 0.3])
    for n, e in enumerate(fp.sequence.entries):
        assert np.allclose(e, [0.0, 0.3 * 0.5 ** n], rtol=1e-12, atol=1e-300)


def test_transversality_saddle(stable_ctx, unstable_ctx):
    s = stable_chart(stable_ctx, [[0.02, 0.0]])
    u = unstable_chart(unstable_ctx, [[0.0, 0.05]])
    tr = transversality_check(s, u)
    assert tr["ok"] and tr["volume"] == pytest.approx(1.0, abs=1e-10)
    assert tr["dims"] == [1, 1, 2]


def test_transversality_refused_with_zero_exponent(stable_ctx, unstable_ctx):
    s = stable_chart(stable_ctx, [[0.02, 0.0]])
    u = unstable_chart(unstable_ctx, [[0.0, 0.05]])
    flat = LyapunovSpectrum.from_exponents([0.0, -LOG2])
    s = dataclasses.replace(s, context=dataclasses.replace(stable_ctx, spectrum=flat))
    with pytest.raises(NonHyperbolicError):
        transversality_check(s, u)


def test_transversality_quadratic_saddle_sampled(quad):
    nc, spec = quad
    vols = []
    for seed in range(20):
        p = BaseSystem().point(seed=seed)
        cs = perron_context(nc, p, "stable", 0.3, N=20, spectrum=spec)
        cu = perron_context(nc, p, "unstable", 0.3, N=20, spectrum=spec)
        vols.append(transversality_check(stable_chart(cs, [0.5 * cs.R * cs.param_basis[:, 0]]),
                                         unstable_chart(cu, [0.5 * cu.R * cu.param_basis[:, 0]]))["volume"])
    assert min(vols) > 0.5


def test_quadratic_saddle_theorem_items(quad):
    nc, spec = quad
    ctx = perron_context(nc, P0, "stable", 0.3, spectrum=spec)
    B = ctx.param_basis[:, 0]
    grid = [f * ctx.R * B for f in (-0.9, -0.5, -0.25, 0.25, 0.5, 0.9)]
    chart = stable_chart(ctx, grid)
    mu = spec.mu[ctx.level - 1]
    assert np.all(chart.decay_rates <= mu + 0.05)
    pc = pairwise_contraction(chart)
    assert pc["rate"] <= mu + 0.1
    assert tangency_check(chart)["delta"] <= 1e-4
    lip = parameter_lipschitz_check(ctx, grid)
    assert lip["ok"]
    un = uniqueness_check(ctx, grid[-1])
    assert un["distance"] <= 10 * ctx.tolerances.fp_tol
    inv = invariance_check(ctx, chart)
    assert inv["threshold"] is not None and inv["ok"]


def test_upsilon_nesting(quad):
    nc, spec = quad
    lo = perron_context(nc, P0, "stable", 0.3, spectrum=spec)
    hi = perron_context(nc, P0, "stable", 0.5, spectrum=spec)
    B = hi.param_basis[:, 0]
    chart = stable_chart(hi, [f * hi.R * B for f in (-0.9, -0.3, 0.3, 0.9)])
    for Z in chart.points:
        m = membership(lo, Z)
        assert m["in_chart"] and m["necessary"]


def test_membership_rejects_off_manifold(stable_ctx):
    m = membership(stable_ctx, [0.02, 0.01])
    assert not m["in_chart"] and m["discrepancy"] > 1e-3


def test_weighted_norm():
    G = WeightedSequence(P0, "forward", 0.5, (np.array([1.0, 0.0]), np.array([0.0, 1.0])),
                         (L2, L2))
    assert G.norm == pytest.approx(math.exp(0.5))
