from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from attention_inequality.errors import (
    BadBase,
    DegenerateSeries,
    EmptySample,
    FractionOutOfRange,
    NegativeValue,
    TooShort,
    ZeroMean,
)
from attention_inequality.inequality import (
    gini,
    gini_pairwise,
    inequality_report,
    kurtosis_burstiness,
    log_bin,
    lorenz,
    top_share,
)

positive_samples = arrays(
    np.float64,
    st.integers(1, 60),
    elements=st.floats(0, 1e6, allow_nan=False, allow_subnormal=False),
).filter(lambda x: x.sum() > 1e-3)


def exact_gini(values):
    """Pairwise definition in rational arithmetic."""
    xs = [Fraction(v) for v in values]
    n = len(xs)
    total = sum(abs(a - b) for a in xs for b in xs)
    return total / (2 * n * sum(xs))


class TestGini:
    @pytest.mark.parametrize(
        "values, expected",
        [
            ([5, 5, 5, 5], 0.0),
            ([8, 0, 0, 0], 0.75),
            ([1, 2, 3, 4], 0.25),
            ([3], 0.0),
            ([0, 0, 1], 2 / 3),
        ],
    )
    def test_known_values(self, values, expected):
        assert gini(values) == pytest.approx(expected, abs=1e-12)

    def test_matches_rational_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = rng.integers(0, 50, size=int(rng.integers(2, 30))).astype(float)
            x[0] += 1
            assert gini(x) == pytest.approx(float(exact_gini(x)), abs=1e-13)

    @pytest.mark.parametrize(
        "bad, err",
        [([], EmptySample), ([0, 0, 0], ZeroMean), ([1, -1], NegativeValue), ([1, np.nan], NegativeValue)],
    )
    def test_rejects(self, bad, err):
        with pytest.raises(err):
            gini(bad)

    @given(positive_samples, st.floats(1e-3, 1e3))
    def test_scale_invariant(self, x, c):
        assert gini(c * x) == pytest.approx(gini(x), abs=1e-12)

    @given(positive_samples)
    def test_bounds(self, x):
        g = gini(x)
        assert 0.0 <= g <= (x.size - 1) / x.size + 1e-12

    @given(positive_samples)
    def test_sorted_equals_pairwise(self, x):
        assert gini(x) == pytest.approx(gini_pairwise(x), abs=1e-10)

    def test_order_does_not_matter(self):
        x = np.array([9.0, 1.0, 4.0, 4.0, 0.0, 2.5])
        assert gini(x) == gini(x[::-1])


class TestLorenz:
    def test_equality_is_diagonal(self):
        assert lorenz([1, 1, 1, 1]).points == [(0, 0), (0.25, 0.25), (0.5, 0.5), (0.75, 0.75), (1, 1)]

    def test_two_values(self):
        assert lorenz([3, 1]).points == [(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]

    @given(positive_samples)
    def test_area_gap_is_half_gini(self, x):
        curve = lorenz(x)
        assert 2 * curve.area_gap() == pytest.approx(gini(x), abs=1e-9)

    @given(positive_samples)
    def test_shape(self, x):
        c = lorenz(x)
        assert c.value_frac[0] == 0.0 and c.value_frac[-1] == 1.0
        assert np.all(np.diff(c.value_frac) >= 0)
        assert np.all(c.value_frac <= c.pop_frac + 1e-12)
        assert np.all(np.diff(c.value_frac, 2) >= -1e-12)
        assert len(c) == x.size + 1


class TestTopShare:
    def test_single_leader(self):
        assert top_share([60, 20, 10, 6, 4], 0.2) == pytest.approx(0.6)

    def test_equality(self):
        assert top_share([1, 1, 1, 1, 1], 0.2) == pytest.approx(0.2)

    def test_uses_ceiling(self):
        # ceil(0.01 * 5) = 1 user
        assert top_share([5, 1, 1, 1, 2], 0.01) == pytest.approx(0.5)
        # 0.07 * 100 is 7.000000000000001 in floating point; still 7 users
        x = np.arange(1, 101, dtype=float)
        assert top_share(x, 0.07) == pytest.approx(sum(range(94, 101)) / x.sum())

    @pytest.mark.parametrize("f", [0.0, 1.0, -0.1, 1.5])
    def test_fraction_range(self, f):
        with pytest.raises(FractionOutOfRange):
            top_share([1, 2], f)

    @given(positive_samples, st.floats(0.01, 0.98), st.floats(0.0, 0.5))
    def test_monotone_in_fraction(self, x, f, df):
        g = min(f + df, 0.99)
        assert top_share(x, g) >= top_share(x, f) - 1e-12

    def test_tends_to_one(self):
        x = np.random.default_rng(2).exponential(size=50)
        assert top_share(x, 1 - 1e-6) == pytest.approx(1.0)


class TestKurtosis:
    def test_moment_oracle(self):
        # m2 = 3, m4 = 21
        assert kurtosis_burstiness([0, 0, 0, 4]) == pytest.approx(21 / 9, abs=1e-12)

    def test_constant(self):
        with pytest.raises(DegenerateSeries):
            kurtosis_burstiness([3, 3, 3, 3])

    def test_too_short(self):
        with pytest.raises(TooShort):
            kurtosis_burstiness([1])

    def test_two_point_series(self):
        assert kurtosis_burstiness([0, 1]) == pytest.approx(1.0)

    @given(
        arrays(np.float64, st.integers(3, 40), elements=st.floats(-100, 100, allow_subnormal=False)).filter(
            lambda x: np.ptp(x) > 1e-3
        ),
        st.floats(-50, 50),
        st.floats(0.1, 10).flatmap(lambda b: st.sampled_from([b, -b])),
    )
    def test_affine_invariant(self, x, a, b):
        assert kurtosis_burstiness(a + b * x) == pytest.approx(kurtosis_burstiness(x), rel=1e-9, abs=1e-9)


class TestLogBin:
    def test_conservation_1_to_1000(self):
        bins = log_bin(np.arange(1, 1001))
        assert sum(b.count for b in bins) == 1000
        assert bins[0].bin_lo == 1.0 and bins[0].bin_hi == 2.0
        assert bins[-1].bin_lo == 512.0

    def test_empty(self):
        assert log_bin([]) == []

    def test_zero_bin(self):
        bins = log_bin([0, 0, 1, 3])
        assert bins[0] == (0.0, 0.0, 2, 0.5)
        # [1, 2) holds 1, [2, 4) holds 3: density = 1 / (4 * 2)
        assert bins[2].density == pytest.approx(1 / 8)

    def test_below_one(self):
        bins = log_bin([0.3, 1.5], base=2.0)
        assert bins[0].bin_lo == 0.25
        assert sum(b.count for b in bins) == 2

    def test_bin_edges_half_open(self):
        bins = log_bin([2.0, 4.0], base=2.0)
        assert [(b.bin_lo, b.count) for b in bins] == [(1.0, 0), (2.0, 1), (4.0, 1)]

    @pytest.mark.parametrize("base", [1.0, 0.5, np.inf, np.nan])
    def test_bad_base(self, base):
        with pytest.raises(BadBase):
            log_bin([1, 2], base=base)

    def test_pareto_tail_decreases(self):
        x = np.random.default_rng(5).pareto(1.5, 50_000) + 1
        bins = [b for b in log_bin(x) if b.count > 0]
        dens = [b.density for b in bins]
        mode = int(np.argmax(dens))
        # sparse far tail is noisy; require monotone decline while bins hold >= 20 values
        tail = [b.density for b in bins[mode:] if b.count >= 20]
        assert all(a >= b for a, b in zip(tail, tail[1:]))

    @given(
        arrays(np.float64, st.integers(0, 50), elements=st.floats(0, 1e9, allow_subnormal=False)),
        st.floats(1.1, 10),
    )
    @settings(max_examples=50)
    def test_conservation_property(self, x, base):
        assert sum(b.count for b in log_bin(x, base)) == x.size


def test_report_bundles_metrics():
    rep = inequality_report([1, 2, 3, 4])
    assert rep.gini == pytest.approx(0.25)
    assert set(rep.top_shares) == {0.01, 0.2}
    assert rep.top_shares[0.2] == pytest.approx(0.4)
    assert rep.n == 4 and len(rep.lorenz) == 5
