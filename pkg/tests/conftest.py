"""Shared helpers for the test suite."""

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from wassmooth.measures import DiscreteMeasure


def random_discrete_measure(rng: np.random.Generator, n_atoms: int, d: int,
                            spread: float = 2.0) -> DiscreteMeasure:
    """Random measure with distinct atoms in [-spread, spread]^d.

    Weights are drawn from a Dirichlet and snapped onto the 1e-9 grid used
    by the flow solver's integerization, so exact-agreement checks between
    solvers compare answers to the same instance.
    """
    while True:
        pts = rng.uniform(-spread, spread, size=(n_atoms, d))
        if len(np.unique(pts, axis=0)) == n_atoms:
            break
    scale = 10 ** 9
    raw = rng.dirichlet(np.ones(n_atoms)) * scale
    units = np.floor(raw).astype(np.int64)
    short = scale - int(units.sum())
    order = np.argsort(-(raw - units), kind="stable")
    units[order[:short]] += 1
    return DiscreteMeasure(points=pts, weights=units / scale)


def lp_transport_cost(a: DiscreteMeasure, b: DiscreteMeasure, p: float) -> float:
    """Reference optimum of the transport LP via an independent solver."""
    m, n = len(a), len(b)
    cost = np.linalg.norm(a.points[:, None, :] - b.points[None, :, :], axis=2) ** p
    rows_a = sparse.kron(sparse.eye(m), np.ones((1, n)))
    rows_b = sparse.kron(np.ones((1, m)), sparse.eye(n))
    eq = sparse.vstack([rows_a, rows_b]).tocsc()
    rhs = np.concatenate([a.weights, b.weights])
    res = linprog(cost.ravel(), A_eq=eq, b_eq=rhs, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"reference LP failed: {res.message}")
    return float(res.fun)
