"""Truncation-schedule arithmetic: bandwidth ladder, pool sizes, weights,
the summability bound, and cap policies."""

import math

import numpy as np
import pytest

from exactabc.debias import (
    CAP_RAISE,
    CAP_TRUNCATE,
    TruncationSchedule,
    condition_bound,
    sample_truncation,
    schedule_level,
)
from exactabc.errors import ResourceLimitError
from exactabc.streams import STREAM_TEST, derive

SCHED = TruncationSchedule(rho=0.4, tau=0.2, dim=1)


def test_reference_levels_d1():
    # q = 0.12; frozen ladder values recomputed independently
    assert SCHED.q == pytest.approx(0.12, rel=0, abs=1e-15)
    eps0, n0, w0 = schedule_level(SCHED, 0)
    assert eps0 == pytest.approx(0.5885661912765424, rel=0, abs=1e-15)
    assert n0 == 15
    assert w0 == 1.0
    eps1, n1, w1 = schedule_level(SCHED, 1)
    assert eps1 == pytest.approx(0.34641016151377546, rel=0, abs=1e-15)
    assert n1 == 201
    assert w1 == pytest.approx(5.0 / 3.0, rel=1e-15)


def test_ladder_formulas_arbitrary_point():
    s = TruncationSchedule(rho=0.3, tau=0.5, dim=2)
    q = 0.5 * 0.7
    for k in range(6):
        assert s.eps(k) == pytest.approx(q ** ((k + 1) / 4), rel=1e-14)
        assert s.n_sims(k) == math.ceil(q ** (-(k + 1) * 1.5))
        assert s.weight(k) == pytest.approx(0.7 ** (-k), rel=1e-14)
    assert s.n_sims(0) == 5
    assert s.n_sims(1) == 24


def test_eps_decreases_n_grows():
    for s in (SCHED, TruncationSchedule(rho=0.7, tau=0.7, dim=1),
              TruncationSchedule(rho=0.2, tau=0.9, dim=3)):
        eps = [s.eps(k) for k in range(8)]
        ns = [s.n_sims(k) for k in range(8)]
        assert all(a > b for a, b in zip(eps, eps[1:]))
        assert all(a <= b for a, b in zip(ns, ns[1:]))
        assert all(n >= 1 for n in ns)


def test_weight_is_inverse_survival():
    # omega_k = 1/P(T >= k) for the geometric truncation
    rho = 0.35
    s = TruncationSchedule(rho=rho, tau=0.4, dim=1)
    for k in range(6):
        assert s.weight(k) == pytest.approx((1 - rho) ** (-k), rel=1e-14)


def test_deep_level_overflow_raises():
    with pytest.raises(ResourceLimitError):
        SCHED.n_sims(2000)


def test_condition_bound_frozen_values():
    assert condition_bound(SCHED, 1) == pytest.approx(
        0.38878269387190256, rel=0, abs=1e-15
    )
    assert condition_bound(SCHED, 50) == pytest.approx(
        0.4886752301401528, rel=0, abs=1e-12
    )


def test_condition_bound_below_series_limit():
    # partial sums stay below 2*tau/(1-tau) on a parameter grid
    for rho in (0.1, 0.4, 0.8):
        for tau in (0.1, 0.4, 0.8):
            for dim in (1, 2):
                s = TruncationSchedule(rho=rho, tau=tau, dim=dim)
                limit = 2 * tau / (1 - tau)
                partials = [condition_bound(s, k) for k in (1, 5, 20, 100)]
                assert all(p < limit for p in partials)
                # the series is increasing; deep tails may underflow to a
                # float plateau, so require strictness only up front
                assert partials[0] < partials[1]
                assert all(a <= b for a, b in zip(partials, partials[1:]))


def test_condition_bound_term_arithmetic():
    # K=2 partial sum assembled by hand
    s = SCHED
    expected = 0.0
    for k in (1, 2):
        e = s.eps(k - 1)
        expected += s.weight(k) * (e**4 + 1.0 / (s.n_sims(k - 1) * e))
    assert condition_bound(s, 2) == pytest.approx(expected, rel=1e-14)


def test_sample_truncation_geometric():
    rng = derive(7, STREAM_TEST, 0)
    rho = 0.4
    draws = np.array([sample_truncation(rho, rng) for _ in range(20000)])
    assert draws.min() == 0
    # P(T=0)=rho, E[T]=(1-rho)/rho
    p0 = (draws == 0).mean()
    assert abs(p0 - rho) < 0.015
    assert abs(draws.mean() - (1 - rho) / rho) < 0.05


def test_validation_errors():
    for bad in (dict(rho=0.0), dict(rho=1.0), dict(tau=0.0), dict(tau=1.0),
                dict(dim=0), dict(max_level=-1), dict(cap_action="clip"),
                dict(max_sims=0)):
        kw = dict(rho=0.4, tau=0.2, dim=1)
        kw.update(bad)
        with pytest.raises(ValueError):
            TruncationSchedule(**kw)
    with pytest.raises(ValueError):
        schedule_level(SCHED, -1)
    with pytest.raises(ValueError):
        sample_truncation(1.5, derive(1, STREAM_TEST, 0))
    with pytest.raises(ValueError):
        condition_bound(SCHED, 0)


def test_cap_constants():
    assert CAP_RAISE == "raise"
    assert CAP_TRUNCATE == "truncate"
    assert SCHED.cap_action == CAP_RAISE
    assert SCHED.max_level == 50
    assert SCHED.max_sims == 100_000_000
