import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attention_inequality.errors import BadStep, NonFiniteResult
from attention_inequality.model import (
    PUBLISHED_ROWS,
    TIME_UNIT_SECONDS,
    AttentionState,
    ModelParams,
    ProxyParams,
    closed_form_curve,
    closed_form_slope0,
    follower_trajectory_closed,
    follower_trajectory_ode,
    gain_probability,
    loss_probability,
    mention_count,
    model_time,
    retweet_count,
)

mpmath.mp.dps = 50


def q(label, N=5600):
    return ModelParams.published(label, N)


def closed_form_oracle(p: ModelParams, s: AttentionState, t) -> mpmath.mpf:
    """Term-by-term evaluation in 50-digit arithmetic."""
    mp = mpmath.mpf
    r, m, t = mp(s.r), mp(s.m), mp(t)
    gain = mp(p.w1) * (r ** mp(p.alpha) if r or p.alpha else 1) + mp(p.w2) * (m ** mp(p.beta) if m or p.beta else 1)
    b = -gain
    lam = mp(p.w3) * max(r, mp(1)) ** (-mp(p.theta))
    return mp(s.f0) + mp(p.C) * mpmath.exp(b * t) - mp(p.C) * mpmath.exp(lam * t) - b * p.N * t


class TestProbabilities:
    def test_q1_silent_user(self):
        assert gain_probability(q("Q1"), AttentionState(10, r=0, m=0)) == 0.0

    @pytest.mark.parametrize("r, m", [(1, 1), (50, 7), (1000, 0.5)])
    def test_q2_constant_gain(self, r, m):
        assert gain_probability(q("Q2"), AttentionState(10, r=r, m=m)) == pytest.approx(0.00030, abs=1e-15)

    def test_q1_retweet_only(self):
        expected = float(mpmath.mpf("0.00215") * mpmath.mpf(100) ** mpmath.mpf("0.634"))
        got = gain_probability(q("Q1"), AttentionState(10, r=100, m=0))
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(0.03985, abs=5e-6)

    def test_q1_loss(self):
        assert loss_probability(q("Q1"), AttentionState(10, r=1)) == pytest.approx(0.00836, abs=1e-15)
        expected = float(mpmath.mpf("0.00836") * mpmath.mpf(100) ** mpmath.mpf("-0.129"))
        assert loss_probability(q("Q1"), AttentionState(10, r=100)) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.00462, abs=5e-6)

    def test_q3_negative_loss_clamped(self):
        assert loss_probability(q("Q3"), AttentionState(10, r=10)) == 0.0

    def test_zero_retweets_use_floor(self):
        # r = 0 with theta > 0 would be infinite; r_eff = 1 caps it at w3
        assert loss_probability(q("Q1"), AttentionState(10, r=0)) == pytest.approx(0.00836)

    @given(
        st.sampled_from(list(PUBLISHED_ROWS)),
        st.floats(0, 1e7),
        st.floats(0, 1e7),
    )
    def test_always_probabilities(self, label, r, m):
        s = AttentionState(1, r=r, m=m)
        for v in (gain_probability(q(label), s), loss_probability(q(label), s)):
            assert 0.0 <= v <= 1.0

    @given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0, 100))
    def test_gain_monotone(self, r, m, dr):
        p = q("Q1")
        lo = gain_probability(p, AttentionState(1, r=r, m=m))
        assert gain_probability(p, AttentionState(1, r=r + dr, m=m)) >= lo
        assert gain_probability(p, AttentionState(1, r=r, m=m + dr)) >= lo

    @given(st.floats(0, 1e4), st.floats(0, 100))
    def test_q1_loss_non_increasing(self, r, dr):
        p = q("Q1")
        assert loss_probability(p, AttentionState(1, r=r + dr)) <= loss_probability(p, AttentionState(1, r=r))


class TestClosedForm:
    @pytest.mark.parametrize("label", list(PUBLISHED_ROWS))
    def test_t0_is_f0(self, label):
        s = AttentionState(1058, r=50, m=7)
        assert follower_trajectory_closed(q(label), s, 0).f == pytest.approx(1058, abs=1e-9)

    def test_q2_extended_precision(self):
        p, s = q("Q2", 5600), AttentionState(f0=1058, r=50, m=7)
        expected = closed_form_oracle(p, s, 1)
        assert follower_trajectory_closed(p, s, 1.0).f == pytest.approx(float(expected), rel=1e-13)

    @pytest.mark.parametrize("label", list(PUBLISHED_ROWS))
    @pytest.mark.parametrize("t", [0.5, 1.0, 3.0, 10.0])
    def test_all_rows_extended_precision(self, label, t):
        p, s = q(label, 100_000), AttentionState(f0=400, r=12, m=3)
        assert follower_trajectory_closed(p, s, t).f == pytest.approx(float(closed_form_oracle(p, s, t)), rel=1e-12)

    @pytest.mark.parametrize("label", list(PUBLISHED_ROWS))
    def test_slope_finite_difference(self, label):
        p, s = q(label, 100_000), AttentionState(f0=400, r=12, m=3)
        h = mpmath.mpf("1e-6")
        fd = (closed_form_oracle(p, s, h) - closed_form_oracle(p, s, 0)) / h
        assert closed_form_slope0(p, s) == pytest.approx(float(fd), rel=1e-3)

    def test_curve_matches_scalar(self):
        p, s = q("Q1", 10**6), AttentionState(f0=3000, r=40, m=5)
        t = np.linspace(0, 5, 11)
        scalar = [follower_trajectory_closed(p, s, ti).f for ti in t]
        assert closed_form_curve(p, s, t) == pytest.approx(scalar, rel=1e-14)

    def test_overflow(self):
        p = ModelParams(0, 0, -2.0, 0, 0, 50.0, 1.0, N=100)
        s = AttentionState(1, r=100)
        with pytest.raises(NonFiniteResult):
            follower_trajectory_closed(p, s, 100.0)
        with pytest.raises(NonFiniteResult):
            closed_form_curve(p, s, [0, 1, 100])

    def test_negative_time(self):
        with pytest.raises(ValueError):
            follower_trajectory_closed(q("Q1"), AttentionState(1), -1)


class TestODE:
    def test_frozen_dynamics(self):
        p = q("Q1").with_(w1=0.0, w2=0.0, w3=0.0)
        pts = follower_trajectory_ode(p, AttentionState(300, r=5, m=5), 4.0, 0.5)
        assert all(pt.f == 300 for pt in pts)

    def test_full_population_only_loses(self):
        p = q("Q1", 1000)
        f = [pt.f for pt in follower_trajectory_ode(p, AttentionState(1000, r=3, m=1), 5.0, 0.1)]
        assert all(a >= b for a, b in zip(f, f[1:]))

    def test_step_halving(self):
        p, s = q("Q1", 10**6), AttentionState(5000, r=40, m=8)
        a = follower_trajectory_ode(p, s, 10.0, 0.1)[-1].f
        b = follower_trajectory_ode(p, s, 10.0, 0.05)[-1].f
        assert abs(a - b) <= 1e-6 * abs(b)

    def test_exact_solution(self):
        # constant probabilities: f(t) = f* + (f0 - f*) exp(-(P+ + P-) t)
        p, s = q("Q1", 10**5), AttentionState(2000, r=30, m=4)
        pp, pm = gain_probability(p, s), loss_probability(p, s)
        fstar = p.N * pp / (pp + pm)
        exact = fstar + (s.f0 - fstar) * math.exp(-(pp + pm) * 3.0)
        assert follower_trajectory_ode(p, s, 3.0, 0.01)[-1].f == pytest.approx(exact, rel=1e-10)

    def test_lands_on_t_end(self):
        pts = follower_trajectory_ode(q("Q1"), AttentionState(10, r=1), 1.0, 0.3)
        assert [pt.t for pt in pts] == pytest.approx([0, 0.3, 0.6, 0.9, 1.0])

    def test_zero_horizon(self):
        assert follower_trajectory_ode(q("Q1"), AttentionState(10), 0.0, 0.1) == [(0.0, 10.0)]

    @pytest.mark.parametrize("dt", [0.0, -1.0])
    def test_bad_step(self, dt):
        with pytest.raises(BadStep):
            follower_trajectory_ode(q("Q1"), AttentionState(10), 1.0, dt)

    def test_f0_above_n(self):
        with pytest.raises(ValueError):
            follower_trajectory_ode(q("Q1", 100), AttentionState(101), 1.0, 0.1)

    @given(
        st.floats(-1, 1), st.floats(-1, 1), st.floats(-5, 5), st.floats(-2, 2),
        st.floats(0, 1), st.floats(0, 500), st.floats(0.01, 1.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_moves_monotonically_to_fixed_point(self, w1, w2, w3, theta, f_frac, r, dt):
        n = 1000
        p = ModelParams(0.7, 0.5, theta, w1, w2, w3, 0.0, N=n)
        s = AttentionState(f_frac * n, r=r, m=r / 3)
        f = np.array([pt.f for pt in follower_trajectory_ode(p, s, 5.0, dt)])
        assert np.all((f >= 0) & (f <= n))
        pp, pm = gain_probability(p, s), loss_probability(p, s)
        if pp + pm == 0:
            assert np.all(f == s.f0)
            return
        fstar = n * pp / (pp + pm)
        # never overshoots the fixed point, so the safety clip never engages
        side = np.sign(s.f0 - fstar)
        assert np.all(side * (f - fstar) >= -1e-9 * n)
        assert np.all(side * np.diff(f) <= 1e-9 * n)


class TestProxies:
    def test_linear_retweets(self):
        assert retweet_count(ProxyParams(1, 1, 1, 1, 0, 0), 10, 5) == 15

    def test_silent_user(self):
        assert retweet_count(ProxyParams(2, 0.5, 3, 1.5, 0, 0), 0, 0) == 0

    def test_constant_mentions(self):
        assert mention_count(ProxyParams(a_m=2, b_m=0), 12345) == 2

    def test_mentions_at_zero(self):
        assert mention_count(ProxyParams(a_m=0.7, b_m=0.3), 0) == 0.7

    def test_mentions_overflow(self):
        with pytest.raises(NonFiniteResult):
            mention_count(ProxyParams(a_m=1, b_m=1), 1e6)

    def test_vectorised(self):
        out = retweet_count(ProxyParams(1, 1, 1, 1, 0, 0), np.array([1.0, 2.0]), np.array([3.0, 4.0]))
        assert out.tolist() == [4.0, 6.0]


class TestParams:
    def test_published_rows(self):
        p = q("Q3", 5600)
        assert (p.w3, p.C, p.theta) == (-300.0, -9.0, -0.020)

    def test_json_roundtrip(self):
        p = q("Q1", 1944383)
        assert ModelParams.from_json(p.to_json()) == p
        assert ModelParams.loads(p.to_json()) == p

    def test_kv_roundtrip(self):
        p = q("Q2", 5600).with_(alpha=0.1 + 0.2)
        assert ModelParams.from_kv(p.to_kv()) == p
        assert ModelParams.loads(p.to_kv()) == p

    def test_n_required(self):
        with pytest.raises(TypeError):
            ModelParams(0, 0, 0, 0, 0, 0, 0)

    def test_model_time(self):
        assert model_time([0, TIME_UNIT_SECONDS, 2 * TIME_UNIT_SECONDS]).tolist() == [0, 1, 2]
