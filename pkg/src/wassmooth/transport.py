"""Exact p-Wasserstein distances between finitely supported measures.

Two solvers share one contract:

- ``wasserstein_1d``: monotone (quantile) coupling on the line.  For two
  weighted supports the quantile functions are step functions, so
  W_p^p = integral over [0,1] of |F^{-1} - G^{-1}|^p reduces to a finite
  sum over the merged cumulative-weight breakpoints.  Exact.

- ``wasserstein_discrete``: min-cost flow in any dimension.  Weights are
  scaled by 10^9 and rounded with largest-remainder correction (marginals
  stay exact in scaled units); costs are scaled to integers near 2^48 so
  the network simplex runs in exact integer arithmetic and results are
  bit-reproducible.  The value reported is the true float cost of the
  optimal integer plan; cost quantization perturbs plan selection by at
  most ~1e-14 relative, far inside the 1e-9 contract.

``neighborhood_lower_bound`` evaluates the elementary certificate
W_p(mu, nu)^p >= r^p (mu(B) - nu(B^(r)))^+ for closed balls B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple, Union

import networkx as nx
import numpy as np

from .measures import DiscreteMeasure, SampleCloud

WeightedInput = Union[DiscreteMeasure, SampleCloud]

_WEIGHT_SCALE = 10 ** 9
_COST_BITS = 48
_MAX_COST_ENTRIES = 10 ** 7


class CapacityError(ValueError):
    """Instance exceeds the documented solver capacity."""


@dataclass(frozen=True)
class TransportPlan:
    """Feasible coupling as (source index, target index, mass) triples."""

    pairs: Tuple[Tuple[int, int, float], ...]
    cost_p: float

    def mass_matrix(self, m: int, n: int) -> np.ndarray:
        out = np.zeros((m, n))
        for i, j, mass in self.pairs:
            out[i, j] += mass
        return out


def as_weighted_points(obj: WeightedInput) -> Tuple[np.ndarray, np.ndarray]:
    """(points, weights) view of a measure or cloud."""
    if isinstance(obj, DiscreteMeasure):
        return obj.points, obj.weights
    if isinstance(obj, SampleCloud):
        n = len(obj)
        return obj.points, np.full(n, 1.0 / n)
    raise TypeError(f"expected DiscreteMeasure or SampleCloud, got {type(obj)!r}")


def wasserstein_1d(a: WeightedInput, b: WeightedInput, p: float) -> float:
    """Exact W_p on the line via the monotone rearrangement."""
    if p < 1:
        raise ValueError("p must be >= 1")
    xa, wa = as_weighted_points(a)
    xb, wb = as_weighted_points(b)
    if xa.shape[1] != 1 or xb.shape[1] != 1:
        raise ValueError("wasserstein_1d requires dimension 1")
    return _quantile_wp(xa[:, 0], wa, xb[:, 0], wb, p)


def _quantile_wp(xa, wa, xb, wb, p: float) -> float:
    ia = np.argsort(xa, kind="stable")
    ib = np.argsort(xb, kind="stable")
    xa, wa = xa[ia], wa[ia]
    xb, wb = xb[ib], wb[ib]
    ca = np.cumsum(wa)
    cb = np.cumsum(wb)
    # all interior breakpoints of either quantile function
    levels = np.union1d(ca[:-1], cb[:-1])
    levels = levels[(levels > 0.0) & (levels < 1.0)]
    edges = np.concatenate([[0.0], levels, [1.0]])
    mids = 0.5 * (edges[:-1] + edges[1:])
    qa = xa[np.searchsorted(ca, mids, side="left")]
    qb = xb[np.searchsorted(cb, mids, side="left")]
    seg = np.diff(edges)
    return float(np.sum(seg * np.abs(qa - qb) ** p) ** (1.0 / p))


def _largest_remainder(weights: np.ndarray, scale: int) -> np.ndarray:
    scaled = weights * scale
    base = np.floor(scaled).astype(np.int64)
    short = scale - int(base.sum())
    if short:
        order = np.argsort(-(scaled - base), kind="stable")
        base[order[:short]] += 1
    return base


def wasserstein_discrete(a: DiscreteMeasure, b: DiscreteMeasure,
                         p: float) -> Tuple[float, TransportPlan]:
    """Exact W_p between discrete measures plus an optimal plan.

    Solved as integer min-cost flow (network simplex) on the bipartite
    support graph.  Among optimal plans the solver's pivoting is
    deterministic; returned pairs are reported in lexicographic
    (source, target) order.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if a.dimension != b.dimension:
        raise ValueError(
            f"dimension mismatch: {a.dimension} vs {b.dimension}")
    m, n = len(a), len(b)
    if m * n > _MAX_COST_ENTRIES:
        raise CapacityError(f"support product {m * n} exceeds {_MAX_COST_ENTRIES}")

    cost = np.linalg.norm(a.points[:, None, :] - b.points[None, :, :], axis=2) ** p
    sa = _largest_remainder(a.weights, _WEIGHT_SCALE)
    sb = _largest_remainder(b.weights, _WEIGHT_SCALE)

    max_cost = float(cost.max())
    if max_cost == 0.0:
        # all pairwise distances vanish; points within a measure are
        # distinct, so both supports are the same single point
        return 0.0, TransportPlan(pairs=((0, 0, 1.0),), cost_p=0.0)
    cost_scale = float(2 ** _COST_BITS) / max_cost
    icost = np.rint(cost * cost_scale).astype(np.int64)

    graph = nx.DiGraph()
    for i in range(m):
        graph.add_node(("s", i), demand=-int(sa[i]))
    for j in range(n):
        graph.add_node(("t", j), demand=int(sb[j]))
    for i in range(m):
        row = icost[i]
        for j in range(n):
            graph.add_edge(("s", i), ("t", j), weight=int(row[j]))
    _, flow = nx.network_simplex(graph)

    pairs: List[Tuple[int, int, float]] = []
    cost_p = 0.0
    for i in range(m):
        out = flow[("s", i)]
        for j in range(n):
            units = out.get(("t", j), 0)
            if units:
                mass = units / _WEIGHT_SCALE
                pairs.append((i, j, mass))
                cost_p += mass * cost[i, j]
    pairs.sort(key=lambda e: (e[0], e[1]))
    return cost_p ** (1.0 / p), TransportPlan(pairs=tuple(pairs), cost_p=cost_p)


def ball_mass(obj, center: np.ndarray, radius: float) -> float:
    """Mass of the closed ball B(center, radius) under a measure.

    Discrete measures and clouds are summed exactly; any other object must
    expose a ``ball_mass(center, radius)`` method (closed-form measures).
    """
    if isinstance(obj, (DiscreteMeasure, SampleCloud)):
        pts, w = as_weighted_points(obj)
        center = np.atleast_1d(np.asarray(center, dtype=float))
        inside = np.linalg.norm(pts - center[None, :], axis=1) <= radius
        return float(np.sum(w[inside]))
    if hasattr(obj, "ball_mass"):
        return float(obj.ball_mass(center, radius))
    raise TypeError(f"no ball-mass rule for {type(obj)!r}")


def neighborhood_lower_bound(a, b, center, radius_b: float, r: float,
                             p: float) -> float:
    """r^p (a(B) - b(B^(r)))^+ for the closed ball B = B(center, radius_b).

    The closed r-neighborhood of a closed ball is the concentric ball with
    radius enlarged by r.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if radius_b < 0:
        raise ValueError("radius_b must be non-negative")
    mass_a = ball_mass(a, center, radius_b)
    mass_b = ball_mass(b, center, radius_b + r)
    return r ** p * max(0.0, mass_a - mass_b)
