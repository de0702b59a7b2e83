"""Binary CCL networks: Erdos-Renyi and core-periphery constructions.

An edge ``(i, j)`` means institutions ``i`` and ``j`` extend each other
credit and may trade. Nodes are 0-indexed; edges are stored with ``i < j``.
"""
from __future__ import annotations

import hashlib
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

DEFAULT_REJECTION_BUDGET = 10**6


class InvalidNetworkError(ValueError):
    pass


class GenerationFailure(RuntimeError):
    pass


def _canonical(edges: Iterable[tuple[int, int]], n_nodes: int) -> frozenset[tuple[int, int]]:
    out = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise InvalidNetworkError(f"self-loop on node {i}")
        if not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise InvalidNetworkError(f"edge ({i}, {j}) outside 0..{n_nodes - 1}")
        out.add((i, j) if i < j else (j, i))
    return frozenset(out)


@dataclass(frozen=True)
class CclNetwork:
    """Undirected, simple graph over ``n_nodes`` institutions.

    ``meta`` carries generation diagnostics (rejection count, clamping) and
    does not take part in equality.
    """

    n_nodes: int
    edges: frozenset[tuple[int, int]]
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.n_nodes < 1:
            raise InvalidNetworkError("network needs at least one node")
        object.__setattr__(self, "edges", _canonical(self.edges, self.n_nodes))

    @classmethod
    def complete(cls, n_nodes: int) -> "CclNetwork":
        return cls(n_nodes, frozenset((i, j) for i in range(n_nodes) for j in range(i + 1, n_nodes)))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def has_edge(self, i: int, j: int) -> bool:
        return (i, j) in self.edges or (j, i) in self.edges

    def adjacency_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(indptr, indices)`` with each row's neighbours ascending."""
        nbrs: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        for i, row in enumerate(nbrs):
            row.sort()
            indptr[i + 1] = indptr[i] + len(row)
        indices = np.fromiter((j for row in nbrs for j in row), dtype=np.int64, count=int(indptr[-1]))
        return indptr, indices

    def is_connected(self) -> bool:
        return is_connected(self.n_nodes, self.edges)

    def density(self) -> float:
        return edge_density(self)

    def fingerprint(self) -> str:
        """Short stable identifier of the edge set."""
        h = hashlib.sha256(f"N {self.n_nodes}\n".encode())
        for i, j in self.sorted_edges():
            h.update(f"{i} {j}\n".encode())
        return h.hexdigest()[:16]


def is_connected(n_nodes: int, edges: Iterable[tuple[int, int]]) -> bool:
    parent = list(range(n_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = n_nodes
    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            components -= 1
    return components == 1


def edge_density(net: CclNetwork) -> float:
    """Fraction of the ``N(N-1)/2`` possible edges that are present."""
    n = net.n_nodes
    if n < 2:
        raise InvalidNetworkError("edge density needs N >= 2")
    return 2 * net.n_edges / (n * (n - 1))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def required_edge_count(n_nodes: int, density: float, *, report: dict | None = None) -> int:
    """Edge count for ``density``, clamped to ``[N-1, N(N-1)/2]``.

    Clamping is recorded in ``report`` (if given) under ``"clamped_from"``.
    """
    if n_nodes < 2:
        raise InvalidNetworkError("N must be >= 2")
    if not 0 < density <= 1:
        raise InvalidNetworkError(f"density must lie in (0, 1], got {density}")
    max_edges = n_nodes * (n_nodes - 1) // 2
    raw = _round_half_up(density * max_edges)
    count = min(max(raw, n_nodes - 1), max_edges)
    if report is not None and count != raw:
        report["clamped_from"] = raw
    return count


def _pair_from_index(k: int, n: int) -> tuple[int, int]:
    # Row-major enumeration of the upper triangle: (0,1), (0,2), ..., (n-2,n-1).
    i = 0
    row_len = n - 1
    while k >= row_len:
        k -= row_len
        i += 1
        row_len -= 1
    return i, i + 1 + k


def generate_erdos_renyi(
    n_nodes: int,
    density: float,
    rng: np.random.Generator,
    *,
    rejection_budget: int = DEFAULT_REJECTION_BUDGET,
) -> CclNetwork:
    """Uniformly random connected network with a fixed number of edges.

    Draws exactly ``required_edge_count(N, d)`` distinct edges uniformly and
    redraws until the result forms a single component.
    """
    meta: dict = {}
    n_edges = required_edge_count(n_nodes, density, report=meta)
    max_edges = n_nodes * (n_nodes - 1) // 2
    pairs = [_pair_from_index(k, n_nodes) for k in range(max_edges)]
    rejections = 0
    while True:
        if n_edges == max_edges:
            chosen = range(max_edges)
        else:
            chosen = rng.choice(max_edges, size=n_edges, replace=False)
        edges = [pairs[int(k)] for k in chosen]
        if is_connected(n_nodes, edges):
            break
        rejections += 1
        if rejections >= rejection_budget:
            raise GenerationFailure(
                f"no connected network with N={n_nodes}, n={n_edges} after {rejections} draws"
            )
    meta.update(topology="erdos_renyi", target_density=density, rejections=rejections)
    return CclNetwork(n_nodes, frozenset(edges), meta)


def core_size(n_nodes: int, psi: float) -> int:
    if n_nodes < 2:
        raise InvalidNetworkError("N must be >= 2")
    if not 0 <= psi < 1:
        raise InvalidNetworkError(f"periphery fraction must lie in [0, 1), got {psi}")
    n_core = n_nodes - _round_half_up(psi * n_nodes)
    if n_core < 1:
        raise InvalidNetworkError(f"psi={psi} leaves no core nodes for N={n_nodes}")
    return n_core


def generate_core_periphery(n_nodes: int, psi: float) -> CclNetwork:
    """Complete core plus periphery spokes, assigned round-robin.

    Nodes ``0..c-1`` form the core; periphery node ``c + k`` attaches to core
    node ``k mod c`` so no two core degrees differ by more than one.
    """
    c = core_size(n_nodes, psi)
    edges = [(i, j) for i in range(c) for j in range(i + 1, c)]
    edges += [(k % c, c + k) for k in range(n_nodes - c)]
    return CclNetwork(n_nodes, frozenset(edges), {"topology": "core_periphery", "psi": psi, "n_core": c})


def core_periphery_edge_count(n_nodes: int, n_core: int) -> int:
    return n_core * (n_core - 1) // 2 + (n_nodes - n_core)


def psi_for_density(n_nodes: int, density: float) -> float:
    """Periphery fraction whose core-periphery network is densest-closest to ``density``.

    Ties go to the larger core. The returned psi reproduces the chosen core
    size under ``core_size``.
    """
    max_edges = n_nodes * (n_nodes - 1) // 2
    best_c, best_err = n_nodes, math.inf
    for c in range(n_nodes, 0, -1):
        err = abs(core_periphery_edge_count(n_nodes, c) / max_edges - density)
        if err < best_err:
            best_c, best_err = c, err
    return (n_nodes - best_c) / n_nodes


def write_edge_list(net: CclNetwork, path: str | Path) -> None:
    lines = [f"N {net.n_nodes}"] + [f"{i} {j}" for i, j in net.sorted_edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path: str | Path) -> CclNetwork:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("N "):
        raise InvalidNetworkError(f"{path}: first line must be 'N <count>'")
    n_nodes = int(lines[0].split()[1])
    edges = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 2:
            raise InvalidNetworkError(f"{path}:{lineno}: expected 'i j'")
        i, j = int(parts[0]), int(parts[1])
        if i >= j:
            raise InvalidNetworkError(f"{path}:{lineno}: edges must be written with i < j")
        edges.append((i, j))
    if len(set(edges)) != len(edges):
        raise InvalidNetworkError(f"{path}: duplicate edge")
    return CclNetwork(n_nodes, frozenset(edges))
