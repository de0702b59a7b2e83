"""Compiled inner loop of the trading model.

Everything here works on flat float64 arrays: mids ``M``, spreads ``S`` and
the derived buy/sell valuations ``B``/``A``. The Python-level functions in
``model.py`` define the same operations one at a time and serve as the
reference these loops are tested against.
"""
import numpy as np
from numba import njit

# Columns of the float trade buffer.
T_TIME, T_PRICE, T_GLOBAL_BEST, T_SKIP, T_MEAN_MID, T_ACCEPTOR_QUOTE, T_GLOBAL_BID, T_GLOBAL_ASK = range(8)
N_FLOAT_COLS = 8
# Columns of the integer trade buffer.
T_BUYER, T_SELLER, T_DIRECTION = range(3)
N_INT_COLS = 3

BUYER_INITIATED = 1
SELLER_INITIATED = -1

STATUS_OK = 0
STATUS_BUFFER_FULL = 1
STATUS_RESOLVE_CAP = 2


@njit(cache=True)
def mean_mid(M):
    total = 0.0
    for i in range(M.shape[0]):
        total += M[i]
    return total / M.shape[0]


@njit(cache=True)
def detect(B, A, indptr, indices, out_i, out_j):
    """Fill ``out_i/out_j`` with connected pairs where ``B[i] >= A[j]``.

    Pairs come out sorted by (buyer, seller). Returns ``(count, max_B, min_A)``.
    """
    n = B.shape[0]
    min_a = A[0]
    max_b = B[0]
    for k in range(1, n):
        if A[k] < min_a:
            min_a = A[k]
        if B[k] > max_b:
            max_b = B[k]
    count = 0
    if max_b < min_a:
        return count, max_b, min_a
    for i in range(n):
        bi = B[i]
        if bi < min_a:
            continue
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if bi >= A[j]:
                out_i[count] = i
                out_j[count] = j
                count += 1
    return count, max_b, min_a


@njit(cache=True)
def process(M, S, B, A, i, j, s0, mbar, trade_f, trade_i, row, time):
    """Trade between buyer ``i`` and seller ``j``; write one record at ``row``."""
    price = (B[i] + A[j]) * 0.5
    min_a = A[0]
    max_b = B[0]
    for k in range(1, A.shape[0]):
        if A[k] < min_a:
            min_a = A[k]
        if B[k] > max_b:
            max_b = B[k]
    if price > mbar:
        direction = BUYER_INITIATED
        best = min_a
        quote = A[j]
        skip = quote - best
    else:
        direction = SELLER_INITIATED
        best = max_b
        quote = B[i]
        skip = best - quote
    if row >= 0:
        trade_f[row, T_TIME] = time
        trade_f[row, T_PRICE] = price
        trade_f[row, T_GLOBAL_BEST] = best
        trade_f[row, T_SKIP] = skip
        trade_f[row, T_MEAN_MID] = mbar
        trade_f[row, T_ACCEPTOR_QUOTE] = quote
        trade_f[row, T_GLOBAL_BID] = max_b
        trade_f[row, T_GLOBAL_ASK] = min_a
        trade_i[row, T_BUYER] = i
        trade_i[row, T_SELLER] = j
        trade_i[row, T_DIRECTION] = direction
    half = 0.5 * s0
    M[i] = M[i] - half
    M[j] = M[j] + half
    S[i] = S[i] + half
    S[j] = S[j] + half
    B[i] = M[i] - 0.5 * S[i]
    A[i] = M[i] + 0.5 * S[i]
    B[j] = M[j] - 0.5 * S[j]
    A[j] = M[j] + 0.5 * S[j]


@njit(cache=True)
def select(B, A, mbar, scratch_i, scratch_j, count, best_seller, best_buyer, literal):
    """Index into the crossing list of the pair to process next.

    ``literal``: the crossing furthest from ``mbar``. Otherwise the same
    ordering applies only to pairs whose acceptor is the initiator's best
    crossing counterparty (lowest sell for a buyer, highest buy for a
    seller). Ties go to the lowest (buyer, seller).
    """
    if not literal:
        for c in range(count):
            i = scratch_i[c]
            j = scratch_j[c]
            k = best_seller[i]
            if k < 0 or A[j] < A[k]:
                best_seller[i] = j
            k = best_buyer[j]
            if k < 0 or B[i] > B[k]:
                best_buyer[j] = i
    chosen = -1
    best_d = -1.0
    for c in range(count):
        i = scratch_i[c]
        j = scratch_j[c]
        p = (B[i] + A[j]) * 0.5
        if not literal:
            if p > mbar:
                ok = best_seller[i] == j
            else:
                ok = best_buyer[j] == i
            if not ok:
                continue
        d = abs(p - mbar)
        if d > best_d:
            best_d = d
            chosen = c
    if not literal:
        for c in range(count):
            best_seller[scratch_i[c]] = -1
            best_buyer[scratch_j[c]] = -1
        if chosen < 0:
            # Unreachable: the largest-overshoot pair is always mutually best.
            for c in range(count):
                d = abs((B[scratch_i[c]] + A[scratch_j[c]]) * 0.5 - mbar)
                if d > best_d:
                    best_d = d
                    chosen = c
    return chosen


@njit(cache=True)
def resolve(M, S, B, A, s0, indptr, indices, scratch_i, scratch_j, best_seller, best_buyer,
            literal, cap, trade_f, trade_i, n_tr, record, time):
    """Process crossings one at a time until none remain.

    Returns ``(status, n_tr, n_processed, max_b, min_a)``; ``max_b/min_a`` are
    the global extremes of the final, quiescent state.
    """
    processed = 0
    while True:
        count, max_b, min_a = detect(B, A, indptr, indices, scratch_i, scratch_j)
        if count == 0:
            return STATUS_OK, n_tr, processed, max_b, min_a
        if processed >= cap:
            return STATUS_RESOLVE_CAP, n_tr, processed, max_b, min_a
        mbar = mean_mid(M)
        c = select(B, A, mbar, scratch_i, scratch_j, count, best_seller, best_buyer, literal)
        row = n_tr if record else -1
        process(M, S, B, A, scratch_i[c], scratch_j[c], s0, mbar, trade_f, trade_i, row, time)
        if record:
            n_tr += 1
        processed += 1


@njit(cache=True)
def advance(M, S, B, A, rng, first_step, n_steps, dt, kappa, gamma, s0, burn_time,
            indptr, indices, scratch_i, scratch_j, best_seller, best_buyer, literal, cap,
            trade_f, trade_i, n_tr, quotes, diag):
    """Run up to ``n_steps`` Euler-Maruyama steps starting at ``first_step``.

    One standard normal is drawn per institution per step, in index order.
    Stops early (status BUFFER_FULL) when the trade buffers could overflow
    on the next step. Returns ``(status, steps_done, n_tr)``. ``diag`` holds
    [steps with >1 trade, max trades in one step].
    """
    n = M.shape[0]
    sq = np.sqrt(dt)
    buffer_rows = trade_f.shape[0]
    for k in range(n_steps):
        if n_tr + cap + 1 > buffer_rows:
            return STATUS_BUFFER_FULL, k, n_tr
        step = first_step + k
        for i in range(n):
            S[i] = S[i] - kappa * (S[i] - s0) * dt
        for i in range(n):
            M[i] = M[i] + gamma * M[i] * sq * rng.standard_normal()
        for i in range(n):
            B[i] = M[i] - 0.5 * S[i]
            A[i] = M[i] + 0.5 * S[i]
        time = step * dt
        status, n_tr, processed, max_b, min_a = resolve(
            M, S, B, A, s0, indptr, indices, scratch_i, scratch_j, best_seller, best_buyer,
            literal, cap, trade_f, trade_i, n_tr, time > burn_time, time)
        if status != STATUS_OK:
            return status, k, n_tr
        if processed > 1:
            diag[0] += 1
        if processed > diag[1]:
            diag[1] = processed
        quotes[step - 1, 0] = max_b
        quotes[step - 1, 1] = min_a
    return STATUS_OK, n_steps, n_tr
