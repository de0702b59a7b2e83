import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cclmarket.common import Side
from cclmarket.engine import (
    UNLIMITED,
    ConfigError,
    EngineConfig,
    InvalidAmountError,
    InvalidPairError,
    OrderNotFound,
    OrderRejected,
    QclobEngine,
    parse_limit,
)

from helpers import compare_market_order, random_engine


def two_sells(ccl_ab=UNLIMITED):
    """Sells from B=1 at 1.00000 and C=2 at 1.00005; taker A=0."""
    eng = QclobEngine()
    eng.set_ccl(0, 1, ccl_ab)
    eng.submit_limit_order(1, "sell", "1.00000", 1e6, 1)
    eng.submit_limit_order(2, "sell", "1.00005", 1e6, 2)
    return eng


# -- credit -------------------------------------------------------------------


def test_zero_limit_blocks_all_trading():
    eng = QclobEngine()
    eng.set_ccl(1, 2, 0)
    eng.submit_limit_order(2, "sell", "1.00000", 1e6, 0)
    assert eng.submit_market_order(1, "buy", 1e6, 1).fills == []
    eng.submit_limit_order(1, "sell", "1.00000", 1e6, 2)
    assert eng.submit_market_order(2, "buy", 1e6, 3).fills == []


def test_bilateral_is_min_of_directed_limits():
    eng = QclobEngine()
    eng.set_ccl(1, 2, "unlimited")
    eng.set_ccl(2, 1, 2e6)
    assert eng.bilateral_limit(1, 2) == 2e6
    eng.set_ccl(1, 2, 5e6)
    assert eng.bilateral_limit(1, 2) == eng.bilateral_limit(2, 1) == 2e6


def test_self_limit_rejected():
    with pytest.raises(InvalidPairError):
        QclobEngine().set_ccl(3, 3, 1e6)


@pytest.mark.parametrize("bad", [-1, "-5", float("nan")])
def test_negative_limit_rejected(bad):
    with pytest.raises(InvalidAmountError):
        parse_limit(bad)


def test_limit_words():
    assert parse_limit("Unlimited") == UNLIMITED
    assert parse_limit("2e6") == 2e6


# -- limit orders -------------------------------------------------------------


def test_limit_order_rests_and_sets_best_ask():
    eng = QclobEngine()
    res = eng.submit_limit_order(1, "sell", "1.00000", 1e6, 0)
    assert res.fills == [] and res.resting is not None
    assert eng.best_ask() == 1.0 and eng.best_bid() is None


@pytest.mark.parametrize("price", ["1.000003", 1.000003, "0", "-1.00000", "abc"])
def test_off_grid_price_rejected(price):
    with pytest.raises(OrderRejected):
        QclobEngine().submit_limit_order(1, "buy", price, 1e6)


def test_float_price_on_grid_accepted():
    eng = QclobEngine()
    eng.submit_limit_order(1, "buy", 1.00001, 1e6)
    assert eng.best_bid() == 1.00001


def test_crossing_limit_order_fills_immediately():
    eng = QclobEngine()
    eng.submit_limit_order(1, "sell", "1.00000", 1e6, 0)
    res = eng.submit_limit_order(2, "buy", "1.00000", 1e6, 1)
    assert [(f.price, f.size, f.maker) for f in res.fills] == [(1.0, 1e6, 1)]
    assert res.resting is None
    assert eng.resting_orders() == []


def test_limit_order_does_not_trade_through_its_price():
    eng = QclobEngine()
    eng.submit_limit_order(1, "sell", "1.00000", 1e6, 0)
    eng.submit_limit_order(1, "sell", "1.00010", 1e6, 0)
    res = eng.submit_limit_order(2, "buy", "1.00005", 3e6, 1)
    assert [f.price for f in res.fills] == [1.0]
    assert res.resting.size == 2e6 and eng.best_bid() == 1.00005


def test_size_below_minimum_rejected():
    with pytest.raises(OrderRejected):
        QclobEngine().submit_market_order(0, "buy", 0.001)


def test_duplicate_order_id_rejected():
    eng = QclobEngine()
    eng.submit_limit_order(1, "sell", "1.00000", 1e6, 0, order_id=7)
    with pytest.raises(OrderRejected):
        eng.submit_limit_order(1, "sell", "1.00000", 1e6, 0, order_id=7)
    assert eng.submit_limit_order(1, "sell", "1.00000", 1e6, 0).order_id == 1


def test_config_from_text():
    cfg = EngineConfig.from_text("tick-size = 0.0001\nmin_order_size = 1000\ndefault_ccl = 5e6\n")
    assert str(cfg.tick_size) == "0.0001" and cfg.min_order_size == 1000 and cfg.default_ccl == 5e6
    with pytest.raises(ConfigError):
        EngineConfig.from_text("tick_sise = 1\n")
    with pytest.raises(ConfigError):
        EngineConfig.from_text("settlement = auto\n")


# -- cancel -------------------------------------------------------------------


def test_cancel_removes_order_and_second_cancel_fails():
    eng = QclobEngine()
    oid = eng.submit_limit_order(1, "sell", "1.00000", 1e6).order_id
    eng.cancel_order(oid)
    assert eng.resting_orders() == [] and eng.best_ask() is None
    with pytest.raises(OrderNotFound):
        eng.cancel_order(oid)


def test_cancel_then_match_next_priority():
    eng = two_sells()
    eng.cancel_order(1)
    res = eng.submit_market_order(0, "buy", 1e6, 3)
    assert [(f.maker_order_id, f.price) for f in res.fills] == [(2, 1.00005)]


# -- market orders ------------------------------------------------------------


def test_credit_blocked_best_is_skipped():
    eng = two_sells(ccl_ab=0)
    res = eng.submit_market_order(0, "buy", 1e6, 3)
    (f,) = res.fills
    assert f.price == 1.00005 and f.maker == 2
    assert f.global_best_at_match == 1.0
    assert f.ticks == 100_005
    assert f.skipping_cost == pytest.approx(0.00005, abs=1e-15)


def test_unconstrained_book_has_no_skipping():
    eng = two_sells()
    (f,) = eng.submit_market_order(0, "buy", 1e6, 3).fills
    assert f.price == 1.0 and f.skipping_cost == 0.0


def test_walk_the_book_vwap():
    eng = two_sells()
    res = eng.submit_market_order(0, "buy", 2e6, 3)
    assert [f.price for f in res.fills] == [1.0, 1.00005]
    assert res.vwap == pytest.approx(1.000025, abs=1e-15)
    assert res.residual == 0 and eng.best_ask() is None


def test_market_order_residual_is_cancelled():
    eng = two_sells(ccl_ab=0)
    res = eng.submit_market_order(0, "buy", 5e6, 3)
    assert res.filled == 1e6 and res.residual == 4e6
    assert eng.best_bid() is None


def test_self_trade_skipped():
    eng = QclobEngine()
    eng.submit_limit_order(0, "sell", "1.00000", 1e6, 0)
    eng.submit_limit_order(1, "sell", "1.00002", 1e6, 0)
    (f,) = eng.submit_market_order(0, "buy", 1e6, 1).fills
    assert f.maker == 1 and f.skipping_cost > 0


def test_capacity_limits_fill_size():
    eng = QclobEngine()
    eng.set_ccl(0, 1, 1.5e6)
    eng.submit_limit_order(1, "sell", "1.00000", 2e6, 0)
    assert eng.submit_market_order(0, "buy", 2e6, 1).filled == 1.5e6
    assert eng.capacity(0, 1, 1.0) == 0.0


def test_price_time_priority():
    eng = QclobEngine()
    eng.submit_limit_order(1, "buy", "0.99990", 1e6, 0)
    eng.submit_limit_order(2, "buy", "0.99995", 1e6, 5)
    eng.submit_limit_order(3, "buy", "0.99995", 1e6, 5)
    res = eng.submit_market_order(0, "sell", 3e6, 6)
    assert [f.maker_order_id for f in res.fills] == [2, 3, 1]


# -- filtered book and exposure -----------------------------------------------


def test_filtered_book_unlimited_equals_global():
    eng = two_sells()
    view = eng.filtered_book(0)
    assert [(v.order_id, v.visible_size) for v in view] == [(o.order_id, o.size) for o in eng.resting_orders()]


def test_filtered_book_hides_zero_credit():
    eng = two_sells(ccl_ab=0)
    assert [v.owner for v in eng.filtered_book(0)] == [2]


def test_filtered_book_cuts_to_capacity():
    eng = QclobEngine()
    eng.set_ccl(0, 1, 1.5e6)
    eng.submit_limit_order(1, "sell", "1.00000", 2e6)
    (v,) = eng.filtered_book(0)
    assert v.visible_size == 1.5e6


def test_release_exposure():
    eng = QclobEngine()
    eng.set_ccl(0, 1, 3e6)
    eng.submit_limit_order(1, "sell", "1.00000", 1e6)
    eng.submit_market_order(0, "buy", 1e6)
    assert eng.exposure.get(0, 1) == 1e6
    eng.release_exposure(0, 1, 0)
    assert eng.exposure.get(1, 0) == 1e6
    eng.release_exposure(0, 1, 4e5)
    assert eng.exposure.get(0, 1) == pytest.approx(6e5, abs=1e-9)
    eng.release_exposure(0, 1, eng.exposure.get(0, 1))
    assert eng.capacity(0, 1, 1.0) == eng.bilateral_limit(0, 1)
    with pytest.raises(InvalidAmountError):
        eng.release_exposure(0, 1, 1.0)


def test_settle_all_resets_capacity():
    eng = QclobEngine()
    eng.set_ccl(0, 1, 1e6)
    eng.submit_limit_order(1, "sell", "1.00000", 3e6)
    eng.submit_market_order(0, "buy", 3e6)
    assert eng.capacity(0, 1, 1.0) == 0
    eng.settle_all()
    assert eng.submit_market_order(0, "buy", 3e6).filled == 1e6


# -- oracle and invariants ------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_inst=st.integers(2, 10), n_orders=st.integers(0, 100),
       unlimited=st.booleans())
def test_matches_brute_force_oracle(seed, n_inst, n_orders, unlimited):
    rng = np.random.default_rng(seed)
    eng = random_engine(rng, n_inst, n_orders, unlimited=unlimited)
    for t in range(3):
        side = "buy" if rng.random() < 0.5 else "sell"
        size = float(rng.choice([5e5, 1e6, 4e6, 2e7]))
        assert compare_market_order(eng, n_inst, int(rng.integers(n_inst)), side, size, 1000 + t) == []


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_inst=st.integers(2, 8))
def test_engine_invariants(seed, n_inst):
    rng = np.random.default_rng(seed)
    eng = random_engine(rng, n_inst, 60)
    for t in range(20):
        taker = int(rng.integers(n_inst))
        side = Side.BUY if rng.random() < 0.5 else Side.SELL
        size = float(rng.choice([5e5, 1e6, 4e6]))
        view = {v.order_id: v for v in eng.filtered_book(taker)}
        opp = eng.resting_orders(side.opposite)
        best_reachable = bool(opp) and any(
            o.ticks == opp[0].ticks and o.owner != taker and eng.capacity(taker, o.owner, o.price) > 0 for o in opp)
        res = eng.submit_market_order(taker, side, size, 100 + t)
        assert math.isclose(res.filled + res.residual, size, rel_tol=1e-12)
        for f in res.fills:
            assert f.skipping_cost >= 0
            # the maker order was visible to the taker with at least the filled size
            assert f.maker_order_id in view and f.size <= view[f.maker_order_id].visible_size * (1 + 1e-12)
        if best_reachable:
            assert res.fills[0].skipping_cost == 0
        for (i, j), e in eng.exposure.items():
            assert e <= eng.bilateral_limit(i, j)
        if rng.random() < 0.2:
            eng.settle_all()
