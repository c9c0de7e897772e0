"""Brute-force reference computations for small instances.

These routines are deliberately naive and share no code with the solvers
they check.  Transport problems are solved by enumerating every basic
feasible solution of the transportation polytope: a basis is a spanning
tree of the complete bipartite source/sink graph, and the flow on a tree is
a fixed linear function of the marginals.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import TooLarge

MAX_SUBSETS = 2_000_000


def _is_spanning_tree(cells, n: int, m: int) -> bool:
    parent = list(range(n + m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in cells:
        a, b = find(i), find(n + j)
        if a == b:
            return False
        parent[a] = b
    return True


def spanning_tree_bases(n: int, m: int) -> list:
    """All bases (spanning trees of K_{n,m}) as tuples of (row, col) cells."""
    k = n + m - 1
    if math.comb(n * m, k) > MAX_SUBSETS:
        raise TooLarge(f"{math.comb(n * m, k)} candidate bases for a {n}x{m} problem")
    cells = [(i, j) for i in range(n) for j in range(m)]
    return [b for b in itertools.combinations(cells, k) if _is_spanning_tree(b, n, m)]


class VertexTransport:
    """Exact transport costs from a fixed supply to many demand vectors."""

    def __init__(self, supply, cost):
        self.supply = np.asarray(supply, dtype=float)
        self.cost = np.asarray(cost, dtype=float)
        n, m = self.cost.shape
        self.bases = spanning_tree_bases(n, m)
        maps, costs = [], []
        for basis in self.bases:
            a = np.zeros((n + m, n + m - 1))
            for e, (i, j) in enumerate(basis):
                a[i, e] = 1.0
                a[n + j, e] = 1.0
            maps.append(np.linalg.pinv(a))
            costs.append([self.cost[i, j] for i, j in basis])
        self.maps = np.array(maps)          # [basis, edge, n + m]
        self.edge_costs = np.array(costs)   # [basis, edge]

    def flows(self, demand: np.ndarray) -> np.ndarray:
        """Basis flows for each demand row; shape [basis, edge, N]."""
        demand = np.atleast_2d(demand)
        rhs = np.concatenate((np.broadcast_to(self.supply[:, None],
                                              (self.supply.size, demand.shape[0])),
                              demand.T), axis=0)
        return np.einsum("bek,kn->ben", self.maps, rhs)

    def costs(self, demand: np.ndarray, chunk: int = 20000) -> np.ndarray:
        """Minimal transport cost for every row of ``demand`` (rows sum to 1)."""
        demand = np.atleast_2d(np.asarray(demand, dtype=float))
        out = np.empty(demand.shape[0])
        for s in range(0, demand.shape[0], chunk):
            x = self.flows(demand[s:s + chunk])
            value = np.einsum("be,ben->bn", self.edge_costs, x)
            value[(x < -1e-12).any(axis=1)] = np.inf
            out[s:s + chunk] = value.min(axis=0)
        return out

    def plan(self, demand: np.ndarray) -> np.ndarray:
        x = self.flows(demand)[:, :, 0]
        value = (self.edge_costs * x).sum(axis=1)
        value[(x < -1e-12).any(axis=1)] = np.inf
        b = int(value.argmin())
        n, m = self.cost.shape
        out = np.zeros((n, m))
        for e, (i, j) in enumerate(self.bases[b]):
            out[i, j] = max(x[b, e], 0.0)
        return out


def brute_force_transport(supply, demand, cost) -> float:
    """Minimal coupling cost by enumerating every vertex of the polytope."""
    supply = np.asarray(supply, dtype=float)
    demand = np.asarray(demand, dtype=float)
    demand = demand * (supply.sum() / demand.sum())
    return float(VertexTransport(supply, cost).costs(demand[None, :])[0])


def simplex_lattice(k: int, step: float, center=None, halfwidth: float = math.inf
                    ) -> np.ndarray:
    """Points of the probability simplex on the lattice ``center + step * Z^k``.

    Without a center the lattice is anchored at the origin and ``1/step``
    must be an integer.  With a center only points within ``halfwidth`` (max
    norm) of it are returned.
    """
    if center is None:
        n = int(round(1.0 / step))
        axes = [np.arange(n + 1)] * (k - 1)
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k - 1)
        grid = grid[grid.sum(axis=1) <= n]
        pts = np.concatenate((grid, n - grid.sum(axis=1, keepdims=True)), axis=1) / n
        return pts
    center = np.asarray(center, dtype=float)
    span = int(math.floor(halfwidth / step))
    axes = [np.arange(-span, span + 1)] * (k - 1)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k - 1)
    offs = np.concatenate((grid, -grid.sum(axis=1, keepdims=True)), axis=1) * step
    pts = center[None, :] + offs
    keep = (pts >= -1e-15).all(axis=1) & (np.abs(offs).max(axis=1) <= halfwidth + 1e-15)
    pts = np.maximum(pts[keep], 0.0)
    return pts / pts.sum(axis=1, keepdims=True)


__all__ = ["spanning_tree_bases", "VertexTransport", "brute_force_transport",
           "simplex_lattice"]
