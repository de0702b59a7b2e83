"""Skipping costs, price-change decomposition and realized volatility.

All series are handled one trade direction at a time: buyer-initiated trades
are compared with the previous buyer-initiated trade and seller-initiated with
seller-initiated, so the bid-ask bounce never enters a price change.

Sign conventions (``p`` trade price, ``b``/``a`` global best bid/ask just
before the trade, primes denote the previous same-direction trade)::

    buyer-initiated:   r = p - a      f = p - p'   g = a - a'   h = r - r'
    seller-initiated:  r = b - p      f = p' - p   g = b' - b   h = r - r'

so that ``f = g + h`` and ``r >= 0`` in both directions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .common import Direction

BP = 1e4  # ratio -> basis points
DEFAULT_K = 108
DEFAULT_L = 10
DEFAULT_BOOTSTRAP = 10_000
BOOTSTRAP_REDRAW_CAP = 100


class AnalyticsError(ValueError):
    pass


class DataIntegrityError(AnalyticsError):
    pass


class EmptyInputError(AnalyticsError):
    pass


class InsufficientDataError(AnalyticsError):
    pass


class UndefinedCorrelationError(AnalyticsError):
    pass


class UndefinedRatioError(AnalyticsError):
    pass


@dataclass(frozen=True)
class TradeObservation:
    """One (possibly aggregated) trade and the global quotes just before it.

    ``m`` is the normalising mid: ``(b + a) / 2`` for order-book data, the
    mean institution mid for simulator output.
    """

    k: int
    time: float
    direction: Direction
    p: float
    b: float
    a: float
    m: float

    @property
    def quote(self) -> float:
        """Best opposite quote the trade is measured against."""
        return self.a if self.direction is Direction.BUYER_INITIATED else self.b


def skipping_cost(obs: TradeObservation) -> tuple[float, float]:
    """Return ``(r, r_bp)``: distance from the best opposite quote, raw and in bp of ``m``."""
    if obs.direction is Direction.BUYER_INITIATED:
        r = obs.p - obs.a
    else:
        r = obs.b - obs.p
    if r < 0:
        raise DataIntegrityError(
            f"trade {obs.k}: {obs.direction.value} at {obs.p!r} beats the best quote "
            f"(b={obs.b!r}, a={obs.a!r})"
        )
    if not obs.m > 0:
        raise DataIntegrityError(f"trade {obs.k}: non-positive mid {obs.m!r}")
    return r, r / obs.m * BP


@dataclass(frozen=True)
class PriceChangeRecord:
    k: int
    direction: Direction
    f: float
    g: float
    h: float
    f_bp: float
    r: float
    r_bp: float


def price_change_series(trades: Iterable[TradeObservation]) -> list[PriceChangeRecord]:
    """Changes in trade price, quote price and skipping cost against the previous same-direction trade.

    The first trade of each direction has no predecessor and yields no record.
    Input must be in time order.
    """
    prev: dict[Direction, TradeObservation] = {}
    out = []
    for obs in trades:
        r, r_bp = skipping_cost(obs)
        before = prev.get(obs.direction)
        prev[obs.direction] = obs
        if before is None:
            continue
        if obs.direction is Direction.BUYER_INITIATED:
            f = obs.p - before.p
            g = obs.a - before.a
            h = (obs.p - obs.a) - (before.p - before.a)
        else:
            f = before.p - obs.p
            g = before.b - obs.b
            h = (obs.b - obs.p) - (before.b - before.p)
        out.append(PriceChangeRecord(obs.k, obs.direction, f, g, h, f / obs.m * BP, r, r_bp))
    return out


def decomposition_check(records: Iterable[PriceChangeRecord]) -> float:
    """Largest ``|f - (g + h)|``; 0.0 for an empty series."""
    worst = 0.0
    for rec in records:
        worst = max(worst, abs(rec.f - (rec.g + rec.h)))
    return worst


def vwap(prices: Sequence[float], sizes: Sequence[float]) -> float:
    """Volume-weighted average price, kept inside ``[min(prices), max(prices)]``.

    A group filled at a single price returns that price exactly, so a trade
    at the best quote keeps a skipping cost of exactly zero.
    """
    if len(prices) == 0 or len(prices) != len(sizes):
        raise EmptyInputError("vwap needs matching, nonempty prices and sizes")
    lo, hi = min(prices), max(prices)
    if lo == hi:
        return float(lo)
    value = math.fsum(p * v for p, v in zip(prices, sizes)) / math.fsum(sizes)
    return min(max(value, lo), hi)


def split_by_direction(trades: Iterable[TradeObservation]) -> dict[Direction, list[TradeObservation]]:
    out: dict[Direction, list[TradeObservation]] = {d: [] for d in Direction}
    for obs in trades:
        out[obs.direction].append(obs)
    return out


# ---------------------------------------------------------------------------
# Distribution summaries


@dataclass(frozen=True)
class EcdfSummary:
    x: np.ndarray  # distinct values, ascending
    ecdf: np.ndarray  # P(X <= x)
    survivor: np.ndarray  # 1 - ecdf
    n: int
    min: float
    median: float
    max: float
    mean: float
    std: float

    def at(self, value: float) -> float:
        """Empirical CDF evaluated at an arbitrary point."""
        idx = np.searchsorted(self.x, value, side="right")
        return 0.0 if idx == 0 else float(self.ecdf[idx - 1])

    def stats(self) -> dict[str, float]:
        return {"min": self.min, "median": self.median, "max": self.max, "mean": self.mean, "std": self.std}


def ecdf_summary(values: Sequence[float] | np.ndarray) -> EcdfSummary:
    """Empirical CDF, survivor function and min/median/max/mean/std.

    ``std`` is the sample standard deviation (``ddof=1``), taken as 0 for a
    single value.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise EmptyInputError("ecdf_summary needs at least one value")
    xs, counts = np.unique(v, return_counts=True)
    cdf = np.cumsum(counts) / v.size
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return EcdfSummary(
        x=xs, ecdf=cdf, survivor=1.0 - cdf, n=int(v.size),
        min=float(xs[0]), median=float(np.median(v)), max=float(xs[-1]),
        mean=float(v.mean()), std=std,
    )


# ---------------------------------------------------------------------------
# Correlation with bootstrap standard error


@dataclass(frozen=True)
class BootstrapCorrelation:
    rho: float
    stderr: float
    n_resamples: int
    n_degenerate: int = 0  # resamples that hit the redraw cap and contributed rho = 0


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("correlation undefined: a series has zero variance")
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def _row_pearson(xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dx = xs - xs.mean(axis=1, keepdims=True)
    dy = ys - ys.mean(axis=1, keepdims=True)
    sxx = np.einsum("ij,ij->i", dx, dx)
    syy = np.einsum("ij,ij->i", dy, dy)
    sxy = np.einsum("ij,ij->i", dx, dy)
    ok = (sxx > 0) & (syy > 0)
    rho = np.zeros(xs.shape[0])
    rho[ok] = np.clip(sxy[ok] / np.sqrt(sxx[ok] * syy[ok]), -1.0, 1.0)
    return rho, ok


def bootstrap_correlation(x, y, n_resamples: int = DEFAULT_BOOTSTRAP,
                          rng: np.random.Generator | None = None) -> BootstrapCorrelation:
    """Pearson correlation with the standard deviation of its paired-bootstrap replicates."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise AnalyticsError("x and y must be 1-D and of equal length")
    n = x.size
    if n < 3:
        raise InsufficientDataError("bootstrap correlation needs at least 3 pairs")
    rho = pearson(x, y)
    rng = rng if rng is not None else np.random.default_rng()
    reps = np.empty(n_resamples)
    degenerate = 0
    chunk = max(1, min(n_resamples, 2_000_000 // n))
    for start in range(0, n_resamples, chunk):
        stop = min(start + chunk, n_resamples)
        idx = rng.integers(0, n, size=(stop - start, n))
        r, ok = _row_pearson(x[idx], y[idx])
        for row in np.flatnonzero(~ok):
            for _ in range(BOOTSTRAP_REDRAW_CAP):
                one = rng.integers(0, n, size=(1, n))
                rr, good = _row_pearson(x[one], y[one])
                if good[0]:
                    r[row] = rr[0]
                    break
            else:
                r[row] = 0.0
                degenerate += 1
        reps[start:stop] = r
    stderr = float(reps.std(ddof=1)) if n_resamples > 1 else 0.0
    return BootstrapCorrelation(rho, stderr, n_resamples, degenerate)


# ---------------------------------------------------------------------------
# Realized volatility


@dataclass(frozen=True)
class VolatilityEstimate:
    series_id: str
    K: int
    L: int
    D: int
    T: float
    tau: float
    value: float


def sample_indices(D: int, K: int, L: int, j: int) -> np.ndarray:
    """1-based indices ``floor(i*T + j*tau)`` for ``i = 1..K``, clamped to ``D``.

    ``T = D/K`` and ``tau = T/L`` are evaluated exactly in integers:
    ``i*T + j*tau = (i*L + j) * D / (K*L)``.
    """
    i = np.arange(1, K + 1, dtype=np.int64)
    idx = ((i * L + j) * D) // (K * L)
    return np.minimum(idx, D)


def realized_volatility(prices, K: int = DEFAULT_K, L: int = DEFAULT_L, series_id: str = "") -> VolatilityEstimate:
    """Subsampled quadratic variation of log prices in event time.

    For each offset ``j`` in ``0..L-1`` the series is sampled at
    ``floor(i*T + j*tau)`` (1-based, ``i = 1..K``) and the ``K-1`` squared log
    returns are summed; the result averages the ``L`` sums. Indices past the
    end of the series are clamped to the last observation.
    """
    p = np.asarray(prices, dtype=np.float64)
    D = int(p.size)
    if K < 2 or L < 1:
        raise AnalyticsError(f"need K >= 2 and L >= 1, got K={K}, L={L}")
    if D < K:
        raise InsufficientDataError(f"{D} observations cannot fill K={K} intervals")
    if not np.all(p > 0):
        raise DataIntegrityError("prices must be positive")
    # math.log is correctly rounded on common platforms; np.log may differ by an ulp.
    logp = np.array([math.log(v) for v in p.tolist()])
    per_offset = []
    for j in range(L):
        lp = logp[sample_indices(D, K, L, j) - 1]
        ret = lp[1:] - lp[:-1]
        per_offset.append(math.fsum((ret * ret).tolist()))
    value = math.fsum(per_offset) / L
    T = D / K
    return VolatilityEstimate(series_id, K, L, D, T, T / L, value)


def z_ratio(v_trade: float, v_quote: float) -> float:
    """Log ratio of trade-price to quote-price volatility for one direction."""
    if not (v_trade > 0 and v_quote > 0):
        raise UndefinedRatioError(f"z needs positive volatilities, got {v_trade!r} and {v_quote!r}")
    return math.log(v_trade / v_quote)


@dataclass(frozen=True)
class SignatureRow:
    K: int
    value: float | None
    error: str | None = None


def volatility_signature(prices, K_values: Iterable[int], L: int = DEFAULT_L) -> list[SignatureRow]:
    rows = []
    for K in K_values:
        try:
            rows.append(SignatureRow(K, realized_volatility(prices, K, L).value))
        except AnalyticsError as exc:
            rows.append(SignatureRow(K, None, str(exc)))
    return rows


@dataclass(frozen=True)
class DirectionVolatility:
    """Trade- and quote-price volatility for one direction, with their z ratio.

    For buyer-initiated trades these are v_A (trade prices) and v_a (asks);
    for seller-initiated, v_B and v_b (bids).
    """

    direction: Direction
    trade: VolatilityEstimate
    quote: VolatilityEstimate
    z: float | None


def direction_volatility(trades: Sequence[TradeObservation], direction: Direction,
                         K: int = DEFAULT_K, L: int = DEFAULT_L) -> DirectionVolatility:
    sel = [t for t in trades if t.direction is direction]
    buy = direction is Direction.BUYER_INITIATED
    p = [t.p for t in sel]
    q = [t.a if buy else t.b for t in sel]
    vt = realized_volatility(p, K, L, "v_A" if buy else "v_B")
    vq = realized_volatility(q, K, L, "v_a" if buy else "v_b")
    try:
        z = z_ratio(vt.value, vq.value)
    except UndefinedRatioError:
        z = None
    return DirectionVolatility(direction, vt, vq, z)


def literal_realized_volatility(prices: Sequence[float], K: int, L: int) -> float:
    """Term-by-term evaluation with exact rational sampling times and sums.

    Kept deliberately separate from :func:`realized_volatility` (no shared
    helpers) so each can check the other.
    """
    D = len(prices)
    T = Fraction(D, K)
    tau = T / L
    total = Fraction(0)
    for j in range(L):
        v_j = Fraction(0)
        for i in range(1, K):
            hi = min(math.floor((i + 1) * T + j * tau), D)
            lo = min(math.floor(i * T + j * tau), D)
            r = math.log(prices[hi - 1]) - math.log(prices[lo - 1])
            v_j += Fraction(r * r)
        total += Fraction(float(v_j))
    return float(total) / L
