import numpy as np
import pytest
from hypothesis import given, strategies as st

from oseledets.base import BaseSystem, draw, draws, shift, sigma, theta

IID = BaseSystem("iid_shift")
ROT = BaseSystem("rotation", alpha=0.3)


def test_rotation_theta_advances_aux():
    p = ROT.point(seed=1, time=0, aux=0.9)
    q = theta(p)
    assert q.aux == pytest.approx(0.2, abs=1e-15)
    assert q.time == 1


def test_rotation_sigma_retreats_aux():
    p = ROT.point(seed=1, time=0, aux=0.2)
    assert sigma(p).aux == pytest.approx(0.9, abs=1e-15)


def test_shift_theta_keeps_seed():
    p = IID.point(seed=7, time=5)
    q = theta(p)
    assert (q.seed, q.time) == (7, 6)


def test_negative_times():
    assert sigma(IID.point(seed=3, time=0)).time == -1


def test_inverse_pair_exact():
    p = ROT.point(seed=2, aux=0.123456789)
    assert theta(sigma(p)) == p
    assert sigma(theta(p)) == p
    assert shift(shift(p, -10), 10) == p


def test_draw_deterministic_and_channel_separated():
    p = IID.point(seed=11, time=4)
    assert draw(p, 0) == draw(IID.point(seed=11, time=4), 0)
    assert draw(p, 0) != draw(p, 1)


def test_draw_mean():
    p = IID.point(seed=5)
    u = np.array([draw(shift(p, t), 0) for t in range(100_000)])
    assert abs(u.mean() - 0.5) < 0.01


def test_birkhoff_average_within_four_standard_errors():
    # f = u^2 has mean 1/3 and variance 4/45
    p = IID.point(seed=9)
    n = 100_000
    f = np.array([draw(shift(p, t), 2) ** 2 for t in range(n)])
    assert abs(f.mean() - 1 / 3) < 4 * np.sqrt(4 / 45 / n)


def test_rational_rotation_warns(caplog):
    BaseSystem("rotation", alpha=0.5)
    assert "rational" in caplog.text


def test_invalid_kind():
    with pytest.raises(ValueError):
        BaseSystem("markov")


@given(st.integers(0, 2**64 - 1), st.integers(-10**6, 10**6), st.integers(0, 10_000))
def test_shift_roundtrip_bit_exact(seed, time, n):
    p = IID.point(seed=seed, time=time)
    assert shift(shift(p, n), -n) == p
    r = ROT.point(seed=seed, time=time, aux=(seed % 997) / 997)
    assert shift(shift(r, -n), n) == r


@given(st.integers(0, 2**32), st.integers(-500, 500), st.integers(0, 3))
def test_draws_independent_of_traversal(seed, t, channel):
    p = IID.point(seed=seed)
    direct = draws(shift(p, t), channel, 3)
    walked = p
    for _ in range(abs(t)):
        walked = theta(walked) if t > 0 else sigma(walked)
    assert np.array_equal(direct, draws(walked, channel, 3))
