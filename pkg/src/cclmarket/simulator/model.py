"""Multi-institution trading model over a binary CCL network.

Each institution carries a mid-price ``M`` and spread ``s``; its buy and
sell valuations are ``B = M - s/2`` and ``A = M + s/2``. Between trades the
spread decays towards ``s0`` and the mid follows a driftless geometric
Brownian motion. Connected institutions whose valuations cross trade.

The free functions in this module are the readable reference for one step
of the model. :func:`run` drives the same logic through the compiled loop in
``_kernel`` and is bit-identical to chaining the reference functions.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..common import Direction
from ..network import CclNetwork
from . import _kernel as K


class SimulationError(RuntimeError):
    """Initialization or trade resolution failed to reach quiescence."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


PAIRING_RULES = ("best_quote", "furthest")


@dataclass(frozen=True)
class ModelParams:
    """Model parameters; ``None`` fields take their N- or epsilon-derived defaults.

    ``pairing`` decides which crossing is traded first when a step leaves
    several. ``"furthest"`` takes the crossing whose price is furthest from
    the mean mid. ``"best_quote"`` (default) applies the same ordering but
    only to pairs where the acceptor holds the initiator's best crossing
    quote, i.e. the initiator hits the best price it can reach. The two
    rules agree whenever a step produces a single crossing.
    """

    n: int = 128
    epsilon: float = 0.001
    kappa: float = 1.0
    gamma: float | None = None  # None: epsilon * sqrt(kappa)
    m0_bar: float = 1.0
    dt: float | None = None  # None: 1 / (3 N^2)
    t_burn: float = 2.0
    t_end: float = 10.0
    seed: int = 0
    init_budget: int | None = None  # None: 10 N^2
    resolve_cap: int | None = None  # None: N^2
    pairing: str = "best_quote"  # or "furthest"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two institutions")
        if self.gamma is None:
            object.__setattr__(self, "gamma", self.epsilon * math.sqrt(self.kappa))
        if self.dt is None:
            object.__setattr__(self, "dt", 1.0 / (3 * self.n**2))
        if self.init_budget is None:
            object.__setattr__(self, "init_budget", 10 * self.n**2)
        if self.resolve_cap is None:
            object.__setattr__(self, "resolve_cap", self.n**2)
        if min(self.epsilon, self.dt, self.t_end, self.m0_bar) <= 0 or self.kappa < 0 or self.gamma < 0:
            raise ValueError("epsilon, dt, t_end and m0_bar must be positive; kappa, gamma non-negative")
        if not self.t_burn < self.t_end:
            raise ValueError("burn-in must end before the horizon")
        if self.pairing not in PAIRING_RULES:
            raise ValueError(f"pairing must be one of {PAIRING_RULES}")
        if self.kappa * self.dt >= 1:
            raise ValueError("kappa * dt must be < 1 for the spread update to stay above s0")

    @property
    def s0(self) -> float:
        return self.epsilon * self.m0_bar

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class MarketState:
    """Mutable per-institution state. ``B``/``A`` are kept in sync with ``M``/``S``."""

    M: np.ndarray
    S: np.ndarray
    B: np.ndarray = field(init=False)
    A: np.ndarray = field(init=False)

    def __post_init__(self):
        self.M = np.array(self.M, dtype=np.float64)
        self.S = np.array(self.S, dtype=np.float64)
        self.B = np.empty_like(self.M)
        self.A = np.empty_like(self.M)
        self.refresh()

    def refresh(self) -> None:
        self.B[:] = self.M - 0.5 * self.S
        self.A[:] = self.M + 0.5 * self.S

    def copy(self) -> "MarketState":
        return MarketState(self.M.copy(), self.S.copy())

    @property
    def n(self) -> int:
        return self.M.shape[0]

    def mean_mid(self) -> float:
        total = 0.0
        for m in self.M:
            total += float(m)
        return total / self.n


@dataclass(frozen=True)
class SimTrade:
    time: float
    price: float
    buyer: int
    seller: int
    direction: Direction
    global_best: float
    skipping_cost: float
    mean_mid: float
    acceptor_quote: float
    global_bid: float  # highest B over all institutions before the trade
    global_ask: float  # lowest A over all institutions before the trade

    @property
    def initiator(self) -> int:
        return self.buyer if self.direction is Direction.BUYER_INITIATED else self.seller

    @property
    def acceptor(self) -> int:
        return self.seller if self.direction is Direction.BUYER_INITIATED else self.buyer


@dataclass
class SimOutput:
    """Post-burn-in trades plus the per-step global quote series.

    Trade columns are stored as arrays; :meth:`trades` materialises
    :class:`SimTrade` records.
    """

    params: ModelParams
    network_id: str
    trade_f: np.ndarray  # (n_trades, 8) see _kernel.T_* columns
    trade_i: np.ndarray  # (n_trades, 3)
    quotes: np.ndarray  # (n_steps, 2): global max buy, global min sell
    meta: dict

    @property
    def n_trades(self) -> int:
        return self.trade_f.shape[0]

    @property
    def step_times(self) -> np.ndarray:
        return np.arange(1, self.quotes.shape[0] + 1) * self.params.dt

    def trades(self) -> list[SimTrade]:
        out = []
        for f, i in zip(self.trade_f, self.trade_i):
            out.append(SimTrade(
                time=float(f[K.T_TIME]),
                price=float(f[K.T_PRICE]),
                buyer=int(i[K.T_BUYER]),
                seller=int(i[K.T_SELLER]),
                direction=Direction.from_code(int(i[K.T_DIRECTION])),
                global_best=float(f[K.T_GLOBAL_BEST]),
                skipping_cost=float(f[K.T_SKIP]),
                mean_mid=float(f[K.T_MEAN_MID]),
                acceptor_quote=float(f[K.T_ACCEPTOR_QUOTE]),
                global_bid=float(f[K.T_GLOBAL_BID]),
                global_ask=float(f[K.T_GLOBAL_ASK]),
            ))
        return out


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


# ---------------------------------------------------------------------------
# Reference operations


def step(state: MarketState, params: ModelParams, z: np.ndarray) -> None:
    """One explicit Euler-Maruyama step in place; ``z`` holds one normal per institution.

    Spreads are updated before mids.
    """
    dt, kappa, s0 = params.dt, params.kappa, params.s0
    sq = math.sqrt(dt)
    S, M = state.S, state.M
    for i in range(state.n):
        S[i] = S[i] - kappa * (S[i] - s0) * dt
    for i in range(state.n):
        M[i] = M[i] + params.gamma * M[i] * sq * z[i]
    state.refresh()


def detect_crossings(state: MarketState, net: CclNetwork) -> list[tuple[int, int]]:
    """All connected ``(buyer, seller)`` pairs with ``B[buyer] >= A[seller]``, sorted."""
    out = []
    for i, j in net.edges:
        if state.B[i] >= state.A[j]:
            out.append((i, j))
        if state.B[j] >= state.A[i]:
            out.append((j, i))
    return sorted(out)


def classify_trade(price: float, mean_mid: float, buyer: int, seller: int) -> tuple[Direction, int, int]:
    """Return ``(direction, initiator, acceptor)``; prices at the mean count as seller-initiated."""
    if price > mean_mid:
        return Direction.BUYER_INITIATED, buyer, seller
    return Direction.SELLER_INITIATED, seller, buyer


def process_trade(state: MarketState, buyer: int, seller: int, params: ModelParams, time: float = 0.0) -> SimTrade:
    """Execute the trade between a crossing pair in place and return its record.

    The global best quote is snapshot over all institutions before any state
    changes. The skipping cost is measured from the acceptor's quote.
    """
    B, A = state.B, state.A
    if not B[buyer] >= A[seller]:
        raise SimulationError(f"process_trade called on non-crossing pair ({buyer}, {seller})")
    mbar = state.mean_mid()
    price = (B[buyer] + A[seller]) * 0.5
    direction, _, _ = classify_trade(price, mbar, buyer, seller)
    min_a, max_b = float(A.min()), float(B.max())
    if direction is Direction.BUYER_INITIATED:
        best = min_a
        quote = float(A[seller])
        skip = quote - best
    else:
        best = max_b
        quote = float(B[buyer])
        skip = best - quote
    half = 0.5 * params.s0
    state.M[buyer] -= half
    state.M[seller] += half
    state.S[buyer] += half
    state.S[seller] += half
    state.refresh()
    return SimTrade(time, float(price), buyer, seller, direction, best, skip, mbar, quote, max_b, min_a)


def _select(state: MarketState, crossings: list[tuple[int, int]], mbar: float, pairing: str) -> tuple[int, int]:
    B, A = state.B, state.A
    eligible = crossings
    if pairing == "best_quote":
        best_seller: dict[int, int] = {}
        best_buyer: dict[int, int] = {}
        for i, j in crossings:
            if i not in best_seller or A[j] < A[best_seller[i]]:
                best_seller[i] = j
            if j not in best_buyer or B[i] > B[best_buyer[j]]:
                best_buyer[j] = i
        eligible = [
            (i, j) for i, j in crossings
            if (best_seller[i] == j if (B[i] + A[j]) * 0.5 > mbar else best_buyer[j] == i)
        ]
    chosen, best_d = eligible[0], -1.0
    for i, j in eligible:
        d = abs((B[i] + A[j]) * 0.5 - mbar)
        if d > best_d:
            chosen, best_d = (i, j), d
    return chosen


def resolve_multiple(state: MarketState, net: CclNetwork, params: ModelParams,
                     time: float = 0.0, cap: int | None = None) -> list[SimTrade]:
    """Trade away every crossing, one pair at a time, re-detecting after each.

    The next pair is the crossing furthest from the current mean mid, subject
    to ``params.pairing``; ties go to the lowest (buyer, seller).
    """
    cap = params.resolve_cap if cap is None else cap
    trades: list[SimTrade] = []
    while True:
        crossings = detect_crossings(state, net)
        if not crossings:
            return trades
        if len(trades) >= cap:
            raise SimulationError(
                f"trade resolution exceeded {cap} iterations",
                {"time": time, "pending_crossings": len(crossings)},
            )
        i, j = _select(state, crossings, state.mean_mid(), params.pairing)
        trades.append(process_trade(state, i, j, params, time))


def _check_network(params: ModelParams, net: CclNetwork) -> None:
    if net.n_nodes != params.n:
        raise ValueError(f"network has {net.n_nodes} nodes but params.n = {params.n}")
    if not net.is_connected():
        raise ValueError("the CCL network must be connected")


def draw_initial(params: ModelParams, rng: np.random.Generator) -> MarketState:
    mids = rng.normal(params.m0_bar, params.epsilon * params.m0_bar, size=params.n)
    return MarketState(mids, np.full(params.n, params.s0))


def init_state(params: ModelParams, net: CclNetwork, rng: np.random.Generator) -> tuple[MarketState, int]:
    """Draw mids, set spreads to ``s0`` and trade until quiescent.

    Returns the state and the number of discarded initialization trades.
    """
    _check_network(params, net)
    state = draw_initial(params, rng)
    try:
        trades = resolve_multiple(state, net, params, cap=params.init_budget)
    except SimulationError as exc:
        raise SimulationError(f"initialization did not reach quiescence: {exc}", exc.diagnostics) from exc
    return state, len(trades)


def run_reference(params: ModelParams, net: CclNetwork) -> tuple[list[SimTrade], np.ndarray]:
    """Pure-Python run; slow, used to cross-check :func:`run` on small cases."""
    rng = make_rng(params.seed)
    state, _ = init_state(params, net, rng)
    trades: list[SimTrade] = []
    quotes = np.empty((params.n_steps, 2))
    for k in range(1, params.n_steps + 1):
        step(state, params, rng.standard_normal(params.n))
        t = k * params.dt
        done = resolve_multiple(state, net, params, time=t)
        if t > params.t_burn:
            trades.extend(done)
        quotes[k - 1] = state.B.max(), state.A.min()
    return trades, quotes


# ---------------------------------------------------------------------------
# Compiled driver

_CHUNK_STEPS = 1 << 16


def run(params: ModelParams, net: CclNetwork, *, network_id: str | None = None) -> SimOutput:
    """Simulate from t=0 to ``t_end`` and keep trades after ``t_burn``.

    Deterministic in ``(params, net)``: the seed sits in ``params``.
    """
    _check_network(params, net)
    rng = make_rng(params.seed)
    state = draw_initial(params, rng)
    indptr, indices = net.adjacency_csr()
    n_pairs = max(2 * net.n_edges, 1)
    scratch_i = np.empty(n_pairs, dtype=np.int64)
    scratch_j = np.empty(n_pairs, dtype=np.int64)
    best_seller = np.full(params.n, -1, dtype=np.int64)
    best_buyer = np.full(params.n, -1, dtype=np.int64)
    literal = params.pairing == "furthest"
    M, S, B, A = state.M, state.S, state.B, state.A

    dummy_f = np.empty((1, K.N_FLOAT_COLS))
    dummy_i = np.empty((1, K.N_INT_COLS), dtype=np.int64)
    status, _, n_init, _, _ = K.resolve(M, S, B, A, params.s0, indptr, indices, scratch_i, scratch_j,
                                         best_seller, best_buyer, literal, params.init_budget,
                                         dummy_f, dummy_i, 0, False, 0.0)
    if status != K.STATUS_OK:
        raise SimulationError("initialization did not reach quiescence",
                              {"budget": params.init_budget, "trades": int(n_init)})

    n_steps = params.n_steps
    cap = params.resolve_cap
    capacity = max(4 * cap + 16, 1 << 14)
    trade_f = np.empty((capacity, K.N_FLOAT_COLS))
    trade_i = np.empty((capacity, K.N_INT_COLS), dtype=np.int64)
    quotes = np.empty((n_steps, 2))
    diag = np.zeros(2, dtype=np.int64)
    n_tr = 0
    step_no = 1
    while step_no <= n_steps:
        count = min(_CHUNK_STEPS, n_steps - step_no + 1)
        status, done, n_tr = K.advance(
            M, S, B, A, rng, step_no, count, params.dt, params.kappa, params.gamma,
            params.s0, params.t_burn, indptr, indices, scratch_i, scratch_j,
            best_seller, best_buyer, literal, cap, trade_f, trade_i, n_tr, quotes, diag)
        step_no += done
        if status == K.STATUS_BUFFER_FULL:
            trade_f = np.concatenate([trade_f, np.empty_like(trade_f)])
            trade_i = np.concatenate([trade_i, np.empty_like(trade_i)])
        elif status == K.STATUS_RESOLVE_CAP:
            raise SimulationError(
                f"trade resolution exceeded {cap} iterations at step {step_no}",
                {"step": step_no, "time": step_no * params.dt},
            )
    meta = {
        "seed": params.seed,
        "network_id": network_id or net.fingerprint(),
        "init_trades": int(n_init),
        "multi_trade_steps": int(diag[0]),
        "max_trades_in_step": int(diag[1]),
    }
    return SimOutput(params, meta["network_id"], trade_f[:n_tr].copy(), trade_i[:n_tr].copy(), quotes, meta)
