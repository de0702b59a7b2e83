import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cclmarket.analytics import (
    DataIntegrityError,
    EmptyInputError,
    InsufficientDataError,
    PriceChangeRecord,
    TradeObservation,
    UndefinedCorrelationError,
    UndefinedRatioError,
    bootstrap_correlation,
    decomposition_check,
    direction_volatility,
    ecdf_summary,
    literal_realized_volatility,
    pearson,
    price_change_series,
    realized_volatility,
    sample_indices,
    skipping_cost,
    split_by_direction,
    volatility_signature,
    vwap,
    z_ratio,
)
from cclmarket.common import Direction

from oracles import literal_volatility

BUY, SELL = Direction.BUYER_INITIATED, Direction.SELLER_INITIATED


def obs(k, direction, p, b, a, m=None):
    return TradeObservation(k, k, direction, p, b, a, (b + a) / 2 if m is None else m)


# -- skipping cost --------------------------------------------------------------


def test_skip_zero_at_best():
    assert skipping_cost(obs(0, BUY, 1.00005, 1.0, 1.00005)) == (0.0, 0.0)


def test_skip_buy():
    r, bp = skipping_cost(obs(0, BUY, 1.00010, 1.0, 1.00005, m=1.0))
    assert r == pytest.approx(0.00005, abs=1e-15) and bp == pytest.approx(0.5, abs=1e-10)


def test_skip_sell():
    r, bp = skipping_cost(obs(0, SELL, 0.99990, 1.0, 1.00005, m=1.0))
    assert r == pytest.approx(0.0001, abs=1e-15) and bp == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("o", [obs(0, BUY, 1.0, 0.9999, 1.0001), obs(0, SELL, 1.0, 0.9999, 1.0001),
                               obs(0, BUY, 1.0, 0.9, 1.0, m=0.0)])
def test_skip_integrity(o):
    with pytest.raises(DataIntegrityError):
        skipping_cost(o)


@settings(max_examples=200)
@given(q=st.floats(0.5, 2.0), gap=st.floats(0, 0.01), spread=st.floats(0, 0.01), buy=st.booleans())
def test_skip_sign_and_normalization(q, gap, spread, buy):
    if buy:
        o = obs(0, BUY, q + gap, q - spread, q)
    else:
        o = obs(0, SELL, q - gap, q, q + spread)
    assume(o.m > 0)
    r, bp = skipping_cost(o)
    assert r >= 0 and bp >= 0
    # r_bp = r / m * 1e4 and the check multiply back: four roundings in all
    assert abs(bp * o.m / 1e4 - r) <= 2 * math.ulp(r)


# -- decomposition --------------------------------------------------------------


def test_buyer_decomposition_example():
    recs = price_change_series([obs(0, BUY, 1.0000, 0.9999, 1.0000), obs(1, BUY, 1.0002, 1.0, 1.0001)])
    (r,) = recs
    assert (r.f, r.g, r.h) == pytest.approx((0.0002, 0.0001, 0.0001), abs=1e-15)
    assert r.f - r.g - r.h == 0


def test_seller_decomposition_example():
    (r,) = price_change_series([obs(0, SELL, 1.0000, 1.0000, 1.0001), obs(1, SELL, 0.9996, 0.9998, 1.0001)])
    assert (r.f, r.g, r.h) == pytest.approx((0.0004, 0.0002, 0.0002), abs=1e-15)
    assert r.f - r.g - r.h == 0


def test_identical_observations_give_zero_changes():
    o = obs(0, BUY, 1.0001, 0.9999, 1.0)
    (r,) = price_change_series([o, obs(1, BUY, 1.0001, 0.9999, 1.0)])
    assert (r.f, r.g, r.h) == (0.0, 0.0, 0.0)


def test_changes_never_mix_directions():
    series = [obs(0, BUY, 1.0, 0.9999, 1.0), obs(1, SELL, 0.9, 0.9, 1.1), obs(2, BUY, 1.0002, 0.9999, 1.0001)]
    recs = price_change_series(series)
    assert [(r.k, r.direction) for r in recs] == [(2, BUY)]
    assert recs[0].f == pytest.approx(0.0002)
    assert {d: len(v) for d, v in split_by_direction(series).items()} == {BUY: 2, SELL: 1}


def test_decomposition_check_detects_corruption():
    assert decomposition_check([]) == 0.0
    good = PriceChangeRecord(1, BUY, 0.0002, 0.0001, 0.0001, 2.0, 0.0, 0.0)
    bad = PriceChangeRecord(1, BUY, 0.0002, 0.0001, 0.0001 + 1e-5, 2.0, 0.0, 0.0)
    assert decomposition_check([good]) == pytest.approx(0.0, abs=1e-20)
    assert decomposition_check([good, bad]) == pytest.approx(1e-5, rel=1e-9)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.booleans(), st.integers(-50, 50), st.integers(0, 10), st.integers(0, 10)),
                min_size=2, max_size=40))
def test_identity_exact_on_tick_grid(rows):
    # Prices near 1 on a 1e-5 grid, as produced by the engine and ingest.
    series = []
    for k, (buy, mid, spread, gap) in enumerate(rows):
        b = (100_000 + mid) / 1e5
        a = (100_000 + mid + spread + 1) / 1e5
        p = a + gap / 1e5 if buy else b - gap / 1e5
        series.append(obs(k, BUY if buy else SELL, p, b, a))
    assert all(r.f - r.g - r.h == 0 for r in price_change_series(series))


# -- VWAP and ECDF --------------------------------------------------------------


def test_vwap_examples():
    assert vwap([1.0, 1.00005], [1e6, 1e6]) == pytest.approx(1.000025, abs=1e-15)
    assert vwap([1.0, 1.00005], [1e6, 0.5e6]) == pytest.approx(1.0000166667, abs=1e-10)
    assert vwap([1.00003], [7.0]) == 1.00003
    assert vwap([0.1, 0.1, 0.1], [1, 2, 3]) == 0.1
    with pytest.raises(EmptyInputError):
        vwap([], [])


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(99_990, 100_010), st.floats(1e3, 1e7)), min_size=1, max_size=10))
def test_vwap_stays_in_range(rows):
    prices = [t / 1e5 for t, _ in rows]
    v = vwap(prices, [s for _, s in rows])
    assert min(prices) <= v <= max(prices)


def test_ecdf_examples():
    z = ecdf_summary([0, 0, 0])
    assert (z.median, z.mean, z.std) == (0, 0, 0)
    s = ecdf_summary([0, 0, 0, 1])
    assert s.at(0) == 0.75 and s.survivor[0] == 0.25 and s.mean == 0.25
    assert s.at(-1) == 0.0 and s.at(5) == 1.0
    one = ecdf_summary([2.5])
    assert one.min == one.median == one.max == one.mean == 2.5 and one.std == 0
    assert ecdf_summary([1.0, 3.0]).std == pytest.approx(math.sqrt(2))
    with pytest.raises(EmptyInputError):
        ecdf_summary([])


# -- bootstrap correlation ------------------------------------------------------


def test_bootstrap_perfect_correlation():
    x = np.random.default_rng(0).normal(size=200)
    c = bootstrap_correlation(x, x, 500, np.random.default_rng(1))
    assert c.rho == pytest.approx(1.0) and c.stderr < 1e-12
    assert bootstrap_correlation(x, -x, 500, np.random.default_rng(1)).rho == pytest.approx(-1.0)


def test_bootstrap_independent_normals():
    rng = np.random.default_rng(42)
    x, y = rng.normal(size=10_000), rng.normal(size=10_000)
    c = bootstrap_correlation(x, y, 1000, np.random.default_rng(7))
    assert abs(c.rho) < 0.05
    assert 0.005 < c.stderr < 0.02


def test_bootstrap_is_seeded():
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=50), rng.normal(size=50)
    a = bootstrap_correlation(x, y, 300, np.random.default_rng(9))
    b = bootstrap_correlation(x, y, 300, np.random.default_rng(9))
    assert a == b


def test_bootstrap_undefined_and_degenerate():
    with pytest.raises(UndefinedCorrelationError):
        bootstrap_correlation(np.ones(10), np.arange(10.0), 10)
    with pytest.raises(InsufficientDataError):
        bootstrap_correlation([1.0, 2.0], [1.0, 3.0], 10)
    # three points: many resamples repeat one point and must be redrawn
    c = bootstrap_correlation([0.0, 1.0, 2.0], [0.0, 1.0, 5.0], 400, np.random.default_rng(0))
    assert -1 <= c.rho <= 1 and c.n_degenerate == 0


@settings(max_examples=100)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(0.1, 100), b=st.floats(-100, 100),
       c=st.floats(0.1, 100), d=st.floats(-100, 100))
def test_pearson_affine_invariance(seed, a, b, c, d):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=30), rng.normal(size=30)
    assert pearson(a * x + b, c * y + d) == pytest.approx(pearson(x, y), abs=1e-9)


# -- realized volatility --------------------------------------------------------


def test_volatility_constant_series():
    assert realized_volatility(np.full(500, 1.2345), 50, 7).value == 0.0


def test_volatility_doubling_series():
    est = realized_volatility([1, 2, 4, 8], 4, 1)
    assert (est.T, est.tau, est.D) == (1.0, 1.0, 4)
    assert est.value == pytest.approx(3 * math.log(2) ** 2, rel=1e-15)
    assert est.value == pytest.approx(1.44135, abs=1e-5)


def test_volatility_exponential_series():
    assert realized_volatility([1, math.e, math.e**2, math.e**3], 4, 1).value == pytest.approx(3.0, rel=1e-15)


def test_sample_indices_clamp():
    # D=10, K=4, L=3: i*T + j*tau with T=2.5, tau=5/6
    assert sample_indices(10, 4, 3, 0).tolist() == [2, 5, 7, 10]
    assert sample_indices(10, 4, 3, 2).tolist() == [4, 6, 9, 10]


def test_volatility_single_offset_is_v0():
    rng = np.random.default_rng(5)
    p = np.exp(np.cumsum(rng.normal(0, 1e-3, 1000)))
    idx = sample_indices(1000, 108, 1, 0) - 1
    r = np.diff(np.log(p[idx]))
    assert realized_volatility(p, 108, 1).value == pytest.approx(float(np.sum(r * r)), rel=1e-12)


def test_volatility_preconditions():
    with pytest.raises(InsufficientDataError):
        realized_volatility([1.0] * 10, 50, 1)
    with pytest.raises(DataIntegrityError):
        realized_volatility([1.0, -1.0, 2.0], 2, 1)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), D=st.integers(4, 400), K=st.integers(2, 60), L=st.integers(1, 12))
def test_volatility_matches_literal_oracle(seed, D, K, L):
    assume(K <= D)
    p = np.exp(np.cumsum(np.random.default_rng(seed).normal(0, 1e-3, D))).tolist()
    v = realized_volatility(p, K, L).value
    assert v == literal_volatility(p, K, L)
    assert v == literal_realized_volatility(p, K, L)


def test_signature_flat_for_iid_returns():
    p = np.exp(np.cumsum(np.random.default_rng(1).normal(0, 1e-4, 10_000)))
    vals = [row.value for row in volatility_signature(p, range(50, 501, 50), 10)]
    assert (max(vals) - min(vals)) / np.mean(vals) < 0.25
    assert all(v == 0 for v in (r.value for r in volatility_signature(np.ones(600), [50, 500], 5)))


def test_signature_grows_under_bid_ask_bounce():
    rng = np.random.default_rng(2)
    efficient = np.exp(np.cumsum(rng.normal(0, 1e-5, 10_000)))
    side = rng.choice([-1.0, 1.0], size=10_000)  # each trade hits the bid or the ask
    bounce = efficient * (1 + 5e-5 * side)
    vals = [row.value for row in volatility_signature(bounce, [50, 100, 250, 500], 10)]
    assert vals == sorted(vals) and vals[-1] > 2 * vals[0]


def test_signature_reports_insufficient_data():
    rows = volatility_signature(np.ones(60), [50, 100], 1)
    assert rows[0].value == 0.0 and rows[1].value is None and "cannot fill" in rows[1].error


# -- z ----------------------------------------------------------------------------


def test_z_examples():
    assert z_ratio(2.0, 2.0) == 0.0
    assert z_ratio(math.e * 3.0, 3.0) == pytest.approx(1.0, rel=1e-15)
    assert z_ratio(1.2, 1.0) == pytest.approx(0.18232, abs=1e-5)
    with pytest.raises(UndefinedRatioError):
        z_ratio(0.0, 1.0)


@given(vt=st.floats(1e-12, 1e3), vq=st.floats(1e-12, 1e3), c=st.floats(1e-3, 1e3))
def test_z_scale_invariance(vt, vq, c):
    assert z_ratio(c * vt, c * vq) == pytest.approx(z_ratio(vt, vq), abs=1e-12)


def test_direction_volatility_uses_one_direction():
    rng = np.random.default_rng(4)
    rows = []
    for k in range(400):
        buy = k % 2 == 0
        m = 1 + 1e-3 * rng.normal()
        b, a = m - 1e-4, m + 1e-4
        rows.append(obs(k, BUY if buy else SELL, a if buy else b, b, a))
    dv = direction_volatility(rows, BUY, 50, 5)
    only = [o for o in rows if o.direction is BUY]
    assert dv.trade.value == realized_volatility([o.p for o in only], 50, 5).value
    assert dv.quote.value == realized_volatility([o.a for o in only], 50, 5).value
    assert dv.z == 0.0 and dv.trade.D == 200
