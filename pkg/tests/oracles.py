"""Independent reference implementations used as test oracles.

Nothing here imports from the package's matching or volatility code; each
function is a direct, slow restatement of the rule it checks.
"""
from __future__ import annotations

import math
from fractions import Fraction


def brute_force_fills(orders, credit, exposure, taker, side, size):
    """Fills of a market order by repeated full scans of the opposite side.

    ``orders``: list of dicts with order_id, owner, side, price (Fraction),
    size (float), arrival. ``credit``: dict (i, j) -> directed limit (missing
    means unlimited). ``exposure``: dict frozenset{i, j} -> notional.
    Mutates its inputs; returns [(maker_order_id, price, size)].
    """
    opp = "sell" if side == "buy" else "buy"

    def limit(i, j):
        return min(credit.get((i, j), math.inf), credit.get((j, i), math.inf))

    def room(owner, price):
        r = limit(taker, owner) - exposure.get(frozenset((taker, owner)), 0.0)
        return 0.0 if r <= 0 else r / float(price)

    fills = []
    remaining = float(size)
    skipped: set[int] = set()
    while remaining > 0:
        best = None
        for o in orders:
            if o["side"] != opp or o["size"] <= 0 or o["owner"] == taker or o["order_id"] in skipped:
                continue
            if room(o["owner"], o["price"]) <= 0:
                continue
            key = (o["price"] if side == "buy" else -o["price"], o["arrival"], o["order_id"])
            if best is None or key < best[0]:
                best = (key, o)
        if best is None:
            break
        o = best[1]
        qty = min(remaining, o["size"], room(o["owner"], o["price"]))
        pair = frozenset((taker, o["owner"]))
        cap = limit(taker, o["owner"])
        exposure[pair] = min(exposure.get(pair, 0.0) + float(o["price"]) * qty, cap)
        o["size"] -= qty
        if o["size"] <= 0:
            o["size"] = 0.0
        fills.append((o["order_id"], o["price"], qty))
        remaining -= qty
        if remaining <= 0:
            break
    return fills


def literal_volatility(prices, K, L):
    """Realized volatility with exact rational sampling times.

    For each offset j: v_j = sum over i = 1..K-1 of the squared log return
    between samples floor(i T + j tau) and floor((i+1) T + j tau), indices
    1-based and clamped to D, with T = D/K and tau = T/L. Each v_j is rounded
    once to a float; the result is the mean of the L values.
    """
    D = len(prices)
    T = Fraction(D, K)
    tau = T / L
    vs = []
    for j in range(L):
        acc = Fraction(0)
        for i in range(1, K):
            a = min(math.floor(i * T + j * tau), D)
            b = min(math.floor((i + 1) * T + j * tau), D)
            ret = math.log(prices[b - 1]) - math.log(prices[a - 1])
            acc += Fraction(ret * ret)
        vs.append(float(acc))
    return float(sum(Fraction(v) for v in vs)) / L


def bfs_connected(n, edges):
    adj = {i: set() for i in range(n)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    seen = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return len(seen) == n
