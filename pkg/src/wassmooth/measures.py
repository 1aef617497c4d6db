"""Distribution catalog, sampling, moments, and tail functions.

Measures come in two concrete flavors:

- ``DiscreteMeasure``: finitely supported, explicit weights;
- ``SampleCloud``: equal-weight i.i.d. sample with seed provenance.

``MeasureSpec`` describes a sampleable distribution together with whatever
closed-form structure it has (tail function of |X|, density, known absolute
moments).  The catalog includes a heavy-tailed family whose q-th moments
are finite exactly up to a critical order, and the dyadic atomic measure

    a_0 delta_0 + sum_k (a_k / 2)(delta_{x_k} + delta_{-x_k}),
    a_k = 2^(-k^2),  x_k = 2^k e_1,

used by the sharp-rate lower-bound experiment.

Randomness discipline: all sampling goes through ``stream_rng(seed, *path)``,
a counter-based (Philox) generator keyed on the experiment seed plus an
explicit stream path, so replicate r of experiment seed s always uses the
same stream regardless of scheduling.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .numerics import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    gamma_fn,
    normal_cdf,
    tail_integral,
)

_MASK64 = (1 << 64) - 1


def stream_rng(seed: int, *path: int) -> np.random.Generator:
    """Counter-based generator for stream ``path`` of experiment ``seed``."""
    entropy = (int(seed) & _MASK64,) + tuple(int(p) & _MASK64 for p in path)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def _as_points(points, name: str) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty (n, d) array")
    return arr


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure on R^d."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        pts = _as_points(self.points, "points")
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.shape[0] != pts.shape[0]:
            raise ValueError("weights must be one per point")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        total = math.fsum(w.tolist())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (got {total!r})")
        if len(np.unique(pts, axis=0)) != pts.shape[0]:
            raise ValueError("points must be pairwise distinct")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class SampleCloud:
    """Equal-weight i.i.d. sample of size N with seed provenance."""

    points: np.ndarray
    seed: int
    source: str

    def __post_init__(self) -> None:
        pts = _as_points(self.points, "points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


#: sampler signature: (rng, n) -> array of shape (n, d)
Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True, eq=False)
class MeasureSpec:
    """Catalog entry for a sampleable distribution.

    ``tail_fn`` maps t >= 0 to P(|X| > t) and must be non-increasing with
    ``tail_fn(0) <= 1``.  ``known_moments`` maps q to M_q = E[|X|^q]^(1/q).
    """

    name: str
    dimension: int
    sampler: Sampler
    tail_fn: Optional[Callable[[float], float]] = None
    density: Optional[Callable[[float], float]] = None
    known_moments: Mapping[float, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.tail_fn is not None and self.tail_fn(0.0) > 1.0 + 1e-12:
            raise ValueError("tail_fn(0) must be <= 1")


def sample(spec: MeasureSpec, n: int, seed: int) -> SampleCloud:
    """N i.i.d. draws; identical (spec, N, seed) give bit-identical clouds."""
    if n < 1:
        raise ValueError("N must be >= 1")
    rng = stream_rng(seed)
    pts = np.asarray(spec.sampler(rng, n), dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return SampleCloud(points=pts, seed=int(seed), source=spec.name)


def point_norms(obj: Union[DiscreteMeasure, SampleCloud]) -> np.ndarray:
    return np.linalg.norm(obj.points, axis=1)


def moment(obj: Union[DiscreteMeasure, SampleCloud, MeasureSpec], q: float,
           quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """M_q = (integral of |x|^q)^(1/q).

    Exact finite sums for clouds and discrete measures; for specs, the tail
    representation  M_q^q = integral of q t^(q-1) P(|X| > t) dt  evaluated
    by ``tail_integral`` (which raises ``IntegralDivergenceError`` for
    non-integrable tails), falling back to the density when no tail
    function is declared.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if isinstance(obj, (DiscreteMeasure, SampleCloud)):
        norms = point_norms(obj)
        if isinstance(obj, DiscreteMeasure):
            mq_q = math.fsum((obj.weights * norms ** q).tolist())
        else:
            mq_q = math.fsum((norms ** q).tolist()) / len(obj)
        return mq_q ** (1.0 / q)
    if obj.tail_fn is not None:
        tail = obj.tail_fn
        mq_q = tail_integral(lambda t: q * t ** (q - 1.0) * tail(t), 0.0, quad)
        return mq_q ** (1.0 / q)
    if obj.density is not None:
        if obj.dimension != 1:
            raise ValueError("density-based moments are implemented for d = 1")
        dens = obj.density
        mq_q = tail_integral(lambda t: t ** q * (dens(t) + dens(-t)), 0.0, quad)
        return mq_q ** (1.0 / q)
    raise ValueError(f"spec {obj.name!r} declares neither tail_fn nor density")


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def point_mass_spec(d: int = 1) -> MeasureSpec:
    """Degenerate measure delta_0 in R^d."""
    return MeasureSpec(
        name="point_mass",
        dimension=d,
        sampler=lambda rng, n: np.zeros((n, d)),
        tail_fn=lambda t: 0.0 if t >= 0 else 1.0,
        known_moments={1.0: 0.0, 2.0: 0.0, 4.0: 0.0},
    )


def gaussian_abs_moment(q: float, d: int) -> float:
    """M_q of the standard normal in R^d: (2^(q/2) Gamma((q+d)/2)/Gamma(d/2))^(1/q)."""
    return (2.0 ** (q / 2.0) * gamma_fn((q + d) / 2.0) / gamma_fn(d / 2.0)) ** (1.0 / q)


def gaussian_spec(d: int = 1) -> MeasureSpec:
    tail = None
    density = None
    if d == 1:
        tail = lambda t: 2.0 * (1.0 - normal_cdf(t)) if t > 0 else 1.0
        density = lambda x: math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return MeasureSpec(
        name="gaussian",
        dimension=d,
        sampler=lambda rng, n: rng.standard_normal((n, d)),
        tail_fn=tail,
        density=density,
        known_moments={q: gaussian_abs_moment(q, d) for q in (1.0, 2.0, 3.0, 4.0)},
    )


def exponential_spec() -> MeasureSpec:
    """Exponential(1) on [0, inf): tail e^(-t), M_q = Gamma(q+1)^(1/q)."""
    return MeasureSpec(
        name="exponential",
        dimension=1,
        sampler=lambda rng, n: rng.exponential(size=(n, 1)),
        tail_fn=lambda t: math.exp(-t) if t > 0 else 1.0,
        density=lambda x: math.exp(-x) if x >= 0 else 0.0,
        known_moments={q: gamma_fn(q + 1.0) ** (1.0 / q) for q in (1.0, 2.0, 3.0, 4.0)},
    )


# -- dyadic sharp-rate measure ----------------------------------------------

#: a_k = 2^(-k^2) vanishes in double precision past this index
_SHARP_K_FLOAT_MAX = 26


def _sharp_weights_exact(k_max: int) -> list[Fraction]:
    """[a_0', a_1, ..., a_k_max] with the truncated tail folded into a_0'."""
    aks = [Fraction(1, 2 ** (k * k)) for k in range(1, k_max + 1)]
    a0 = 1 - sum(aks)
    return [a0] + aks


def sharp_rate_measure(d: int, k_max: int) -> DiscreteMeasure:
    """Truncation of the dyadic atomic measure to atoms 0, +/- 2^k e_1, k <= k_max.

    The untruncated tail mass (below 2^(-(k_max+1)^2 + 1)) is folded into
    the atom at the origin, so the total mass is exactly 1 in dyadic
    arithmetic and every q-th moment is perturbed by less than
    2^(-(k_max+1)^2 + 1) * 2^(q (k_max + 1)).
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if d < 1:
        raise ValueError("d must be >= 1")
    exact = _sharp_weights_exact(k_max)
    pts = [np.zeros(d)]
    wts = [float(exact[0])]
    for k in range(1, k_max + 1):
        half = float(exact[k] / 2)
        for sign in (1.0, -1.0):
            x = np.zeros(d)
            x[0] = sign * 2.0 ** k
            pts.append(x)
            wts.append(half)
    return DiscreteMeasure(points=np.array(pts), weights=np.array(wts))


def _sharp_cdf_boundaries() -> tuple[np.ndarray, np.ndarray]:
    """Inverse-CDF partition of [0, 1) for the untruncated dyadic measure.

    Returns (boundaries, atom positions): a uniform u falling in interval j
    maps to position[j] on the e_1 axis.  Atoms past k = 26 carry less mass
    than one double-precision ulp of 1 and are unreachable.
    """
    bounds = []
    positions = [0.0]
    acc = Fraction(1) - sum(Fraction(1, 2 ** (k * k))
                            for k in range(1, _SHARP_K_FLOAT_MAX + 1))
    bounds.append(float(acc))
    for k in range(1, _SHARP_K_FLOAT_MAX + 1):
        ak = Fraction(1, 2 ** (k * k))
        for sign in (1.0, -1.0):
            acc += ak / 2
            bounds.append(float(acc))
            positions.append(sign * 2.0 ** k)
    positions.append(0.0)  # fold any float leftover above the last bound into 0
    return np.array(bounds), np.array(positions)


_SHARP_BOUNDS, _SHARP_POSITIONS = _sharp_cdf_boundaries()


def _sharp_sampler(d: int) -> Sampler:
    def draw(rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random(n)
        idx = np.searchsorted(_SHARP_BOUNDS, u, side="right")
        pts = np.zeros((n, d))
        pts[:, 0] = _SHARP_POSITIONS[idx]
        return pts

    return draw


def _sharp_tail(t: float) -> float:
    # P(|X| > t) = sum of a_k over k with 2^k > t
    if t < 1.0:
        return float(1.0 - _SHARP_BOUNDS[0])  # everything but the origin atom
    k_min = int(math.floor(math.log2(t))) + 1
    if 2.0 ** (k_min - 1) > t:  # guard rounding of log2 at exact powers
        k_min -= 1
    while 2.0 ** k_min <= t:
        k_min += 1
    return math.fsum(2.0 ** -(k * k) for k in range(k_min, _SHARP_K_FLOAT_MAX + 1))


def sharp_moment_series(q: float, tol: float = 1e-18) -> float:
    """M_q^q of the dyadic measure: sum of 2^(-(k^2 - q k)), summed to < tol."""
    total = 0.0
    k = 1
    while True:
        term = 2.0 ** -(k * k - q * k)
        total += term
        if k > q and term < tol:
            return total
        k += 1


def sharp_rate_spec(d: int = 1) -> MeasureSpec:
    return MeasureSpec(
        name="sharp_rate",
        dimension=d,
        sampler=_sharp_sampler(d),
        tail_fn=_sharp_tail,
        known_moments={q: sharp_moment_series(q) ** (1.0 / q) for q in (1.0, 2.0, 3.0, 4.0)},
    )


def sample_sharp_rate(d: int, n: int, seed: int) -> SampleCloud:
    """Exact inverse-CDF sampling from the untruncated dyadic measure."""
    return sample(sharp_rate_spec(d), n, seed)


# -- Zygmund-class heavy tails ----------------------------------------------

def zygmund_tail(p: float, alpha: float) -> Callable[[float], float]:
    """t -> min(1, t^(-p) log(e + t)^(-(alpha + 2)))."""
    expo = alpha + 2.0

    def tail(t: float) -> float:
        if t <= 0.0:
            return 1.0
        if math.isinf(t):
            return 0.0
        v = t ** -p * math.log(math.e + t) ** -expo
        return v if v < 1.0 else 1.0

    return tail


def _zygmund_sampler(p: float, alpha: float) -> Sampler:
    expo = alpha + 2.0

    def log_tail(y: np.ndarray) -> np.ndarray:
        # log of the tail at t = e^y (un-clipped branch); the exp argument
        # is capped to stay finite, which cannot move a bracketing decision
        # because the tail at e^700 is already below any representable draw
        t = np.exp(np.minimum(y, 700.0))
        return -p * y - expo * np.log(np.log(np.e + t))

    def draw(rng: np.random.Generator, n: int) -> np.ndarray:
        u = np.clip(rng.random(n), 1e-300, None)
        log_u = np.log(u)
        # bracket in y = log t: tail(e^y) is strictly decreasing once < 1
        lo = np.full(n, -40.0)
        hi = np.full(n, 1.0)
        need = log_tail(hi) > log_u
        while np.any(need):
            hi[need] *= 2.0
            need = log_tail(hi) > log_u
        for _ in range(64):  # bisection to ~1e-12 relative in t
            mid = 0.5 * (lo + hi)
            go_right = log_tail(mid) > log_u
            lo = np.where(go_right, mid, lo)
            hi = np.where(go_right, hi, mid)
        radius = np.exp(0.5 * (lo + hi))
        signs = rng.integers(0, 2, size=n) * 2.0 - 1.0
        return (signs * radius)[:, None]

    return draw


def zygmund_spec(p: float, alpha: float) -> MeasureSpec:
    """Symmetric 1-d measure with M_p finite but M_q = inf for every q > p.

    The exponent alpha + 2 on the log factor makes the Zygmund functional
    E[|X|^p log(1 + |X|)^alpha] finite as well.  Sampling inverts the tail
    by bisection in log t (tolerance ~1e-12 relative).
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    return MeasureSpec(
        name=f"zygmund[p={p:g},alpha={alpha:g}]",
        dimension=1,
        sampler=_zygmund_sampler(p, alpha),
        tail_fn=zygmund_tail(p, alpha),
    )


_CATALOG: Mapping[str, Callable[..., MeasureSpec]] = {
    "point_mass": lambda d=1, **_: point_mass_spec(d),
    "gaussian": lambda d=1, **_: gaussian_spec(d),
    "exponential": lambda **_: exponential_spec(),
    "sharp_rate": lambda d=1, **_: sharp_rate_spec(d),
    "zygmund": lambda p=1.0, alpha=1.0, **_: zygmund_spec(p, alpha),
}


def get_measure(name: str, **params) -> MeasureSpec:
    """Look up a catalog measure by name (used by the CLI)."""
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise KeyError(
            f"unknown measure {name!r}; available: {sorted(_CATALOG)}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# CSV serialization: one row per point, columns x_1..x_d[,weight]
# ---------------------------------------------------------------------------

def _write_rows(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.17g}" for v in row])


def save_measure_csv(m: DiscreteMeasure, path) -> None:
    header = [f"x_{i+1}" for i in range(m.dimension)] + ["weight"]
    _write_rows(path, header, np.column_stack([m.points, m.weights]))


def save_cloud_csv(c: SampleCloud, path) -> None:
    header = [f"x_{i+1}" for i in range(c.dimension)]
    _write_rows(path, header, c.points)


def load_measure_csv(path) -> DiscreteMeasure:
    data = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
    if data.shape[1] < 2:
        raise ValueError("measure CSV needs at least one coordinate and a weight")
    weights = data[:, -1]
    total = math.fsum(weights.tolist())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"weight sum {total!r} violates tolerance 1e-9")
    weights = weights / total
    return DiscreteMeasure(points=data[:, :-1], weights=weights)


def load_cloud_csv(path, seed: int = -1, source: str = "csv") -> SampleCloud:
    data = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
    return SampleCloud(points=data, seed=seed, source=source)
