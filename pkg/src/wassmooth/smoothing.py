"""Gaussian smoothing machinery.

Convolving a finitely supported measure with an isotropic Gaussian of scale
sigma produces a mixture density (exactly evaluable), and the smoothed
distance W_p^(sigma)(mu, nu) = W_p(mu * N_sigma, nu * N_sigma) can be
estimated by the plug-in route: draw m points from each smoothed measure
and take the exact W_p between the two clouds.  The plug-in statistic is
an upper-biased proxy (empirical distances between equal samples do not
vanish), so downstream consumers use it for slope fitting and
bound-dominance checks, never for exact values.

Sampling from mu_N * N_sigma resamples atom indices uniformly with
replacement before adding noise, which is exactly a draw from the
convolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .measures import (
    DiscreteMeasure,
    MeasureSpec,
    SampleCloud,
    stream_rng,
)
from .numerics import DEFAULT_QUADRATURE, QuadratureSpec, integrate, normal_cdf
from .transport import (
    CapacityError,
    as_weighted_points,
    wasserstein_1d,
    wasserstein_discrete,
)

#: plug-in cloud capacity for the exact solvers
M_PLUGIN_MAX_1D = 4096
M_PLUGIN_MAX_ND = 512


class TailUnboundedError(ValueError):
    """No tail majorant declared; the bound's remainder cannot be estimated."""


@dataclass(frozen=True)
class SmoothingParams:
    """Plug-in estimator parameters."""

    sigma: float
    p: float = 1.0
    m_plugin: int = 1024
    reps: int = 32

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.m_plugin < 2:
            raise ValueError("m_plugin must be >= 2")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")


def phi_sigma(x, sigma: float) -> float:
    """Isotropic Gaussian density at x; the sup over x is (2 pi sigma^2)^(-d/2)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.shape[-1]
    norm2 = float(np.dot(x, x))
    return ((2.0 * math.pi) ** (-d / 2.0) * sigma ** (-d)
            * math.exp(-norm2 / (2.0 * sigma * sigma)))


def density_g_sigma(x, mu: Union[DiscreteMeasure, SampleCloud], sigma: float) -> float:
    """Mixture density of mu * N_sigma at the point x."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    pts, w = as_weighted_points(mu)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = pts.shape[1]
    sq = np.sum((x[None, :] - pts) ** 2, axis=1)
    kernel = np.exp(-sq / (2.0 * sigma * sigma))
    return float((2.0 * math.pi) ** (-d / 2.0) * sigma ** (-d) * np.dot(w, kernel))


def smooth_cloud(cloud: SampleCloud, sigma: float, seed: int) -> SampleCloud:
    """The coupled cloud {X_k + sigma Z_k} with fresh standard normal Z_k."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    rng = stream_rng(seed)
    noise = rng.standard_normal(cloud.points.shape)
    return SampleCloud(points=cloud.points + sigma * noise, seed=cloud.seed,
                       source=f"{cloud.source}*N({sigma:g})")


def smoothed_mass_1d(mu: Union[DiscreteMeasure, SampleCloud], sigma: float,
                     a: float, b: float) -> float:
    """Exact (mu * N_sigma)([a, b]) for a one-dimensional atomic mu."""
    pts, w = as_weighted_points(mu)
    if pts.shape[1] != 1:
        raise ValueError("smoothed_mass_1d requires dimension 1")
    atoms = pts[:, 0]
    hi = np.array([normal_cdf((b - m) / sigma) for m in atoms])
    lo = np.array([normal_cdf((a - m) / sigma) for m in atoms])
    return float(np.dot(w, hi - lo))


@dataclass(frozen=True)
class GaussianSmoothedMeasure1D:
    """Closed-form view of mu * N_sigma in d = 1 (interval masses via Phi)."""

    mu: Union[DiscreteMeasure, SampleCloud]
    sigma: float

    def interval_mass(self, a: float, b: float) -> float:
        return smoothed_mass_1d(self.mu, self.sigma, a, b)

    def ball_mass(self, center, radius: float) -> float:
        c = float(np.atleast_1d(center)[0])
        return self.interval_mass(c - radius, c + radius)


@dataclass(frozen=True)
class DensityDiffBound:
    """2^(p-1) * integral of |x|^p |f - g| over [-R, R], plus a tail estimate."""

    core: float
    tail_remainder: float

    @property
    def total(self) -> float:
        return self.core + self.tail_remainder

    def __float__(self) -> float:
        return self.total


def smoothed_measure_tail(mu: Union[DiscreteMeasure, SampleCloud], sigma: float,
                          p: float,
                          quad: QuadratureSpec = DEFAULT_QUADRATURE
                          ) -> Callable[[float], float]:
    """Tail majorant R -> estimate of the integral of |x|^p d(mu*N_sigma) over |x| > R.

    Evaluated by quadrature out to 40 sigma past the largest atom, beyond
    which the Gaussian mass is below double-precision resolution.
    """
    pts, _ = as_weighted_points(mu)
    if pts.shape[1] != 1:
        raise ValueError("tail majorants are implemented for d = 1")
    reach = float(np.max(np.abs(pts[:, 0]))) + 40.0 * sigma

    def tail(r: float) -> float:
        if r >= reach:
            return 0.0
        dens = lambda x: density_g_sigma([x], mu, sigma)
        upper = integrate(lambda x: x ** p * dens(x), (r, reach), quad)
        lower = integrate(lambda x: x ** p * dens(-x), (r, reach), quad)
        return upper + lower

    return tail


def density_diff_bound(f: Callable[[float], float], g: Callable[[float], float],
                       p: float, domain_radius: float,
                       quad: QuadratureSpec = DEFAULT_QUADRATURE,
                       tail_f: Optional[Callable[[float], float]] = None,
                       tail_g: Optional[Callable[[float], float]] = None
                       ) -> DensityDiffBound:
    """One-dimensional evaluation of W_p^p(f, g) <= 2^(p-1) integral |x|^p |f-g|.

    The integral is truncated at |x| <= domain_radius; the remainder is
    estimated from the declared tail majorants (R -> bound on the |x|^p
    mass beyond R).  At least one majorant must be declared, otherwise the
    remainder is unknowable and ``TailUnboundedError`` is raised.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if tail_f is None and tail_g is None:
        raise TailUnboundedError(
            "declare a tail majorant for at least one density")
    pref = 2.0 ** (p - 1.0)
    core = pref * integrate(
        lambda x: abs(x) ** p * abs(f(x) - g(x)),
        (-domain_radius, domain_radius), quad)
    remainder = 0.0
    for tail in (tail_f, tail_g):
        if tail is not None:
            remainder += pref * tail(domain_radius)
    return DensityDiffBound(core=core, tail_remainder=remainder)


def quadrature_radius(mu: Union[DiscreteMeasure, SampleCloud], sigma: float) -> float:
    """Truncation radius for density quadrature: max atom norm + 12 sigma."""
    pts, _ = as_weighted_points(mu)
    return float(np.max(np.linalg.norm(pts, axis=1))) + 12.0 * sigma


# ---------------------------------------------------------------------------
# plug-in estimators
# ---------------------------------------------------------------------------

def _check_capacity(m_plugin: int, d: int) -> None:
    cap = M_PLUGIN_MAX_1D if d == 1 else M_PLUGIN_MAX_ND
    if m_plugin > cap:
        raise CapacityError(
            f"m_plugin={m_plugin} exceeds the exact-solver capacity {cap} in d={d}")


def _cloud_wp(points_a: np.ndarray, points_b: np.ndarray, p: float) -> float:
    """Exact W_p between equal-size equal-weight clouds."""
    m = points_a.shape[0]
    a = SampleCloud(points=points_a, seed=0, source="plugin")
    b = SampleCloud(points=points_b, seed=0, source="plugin")
    if points_a.shape[1] == 1:
        return wasserstein_1d(a, b, p)
    w = np.full(m, 1.0 / m)
    w[-1] += 1.0 - w.sum()
    value, _ = wasserstein_discrete(
        DiscreteMeasure(points=_jitter_duplicates(points_a), weights=w),
        DiscreteMeasure(points=_jitter_duplicates(points_b), weights=w), p)
    return value


def _jitter_duplicates(points: np.ndarray) -> np.ndarray:
    """Separate coincident rows by a sub-1e-12 offset (transport needs distinct atoms)."""
    pts = np.array(points, copy=True)
    _, first = np.unique(pts, axis=0, return_index=True)
    dup = np.ones(len(pts), dtype=bool)
    dup[first] = False
    if dup.any():
        scale = max(1.0, float(np.abs(pts).max()))
        pts[dup] += (np.arange(1, dup.sum() + 1)[:, None] * 1e-13 * scale)
    return pts


def smoothed_wp_p_replicate(spec: MeasureSpec, n: int, params: SmoothingParams,
                            seed: int, rep: int) -> float:
    """One replicate of the plug-in estimate of E[(W_p^(sigma)(mu_N, mu))^p].

    Streams: (seed, rep, 0) draws mu_N, (seed, rep, 1) resamples its atoms
    and adds noise, (seed, rep, 2) draws fresh mu points and adds noise.
    """
    d = spec.dimension
    _check_capacity(params.m_plugin, d)
    m, sigma = params.m_plugin, params.sigma
    rng0 = stream_rng(seed, rep, 0)
    base = np.asarray(spec.sampler(rng0, n), dtype=float).reshape(n, d)
    rng1 = stream_rng(seed, rep, 1)
    idx = rng1.integers(0, n, size=m)
    cloud_n = base[idx] + sigma * rng1.standard_normal((m, d))
    rng2 = stream_rng(seed, rep, 2)
    fresh = np.asarray(spec.sampler(rng2, m), dtype=float).reshape(m, d)
    cloud_mu = fresh + sigma * rng2.standard_normal((m, d))
    return _cloud_wp(cloud_n, cloud_mu, params.p) ** params.p


def smoothed_wp_p_samples(spec: MeasureSpec, n: int, params: SmoothingParams,
                          seed: int) -> np.ndarray:
    """All replicate values of the plug-in W_p^p statistic."""
    return np.array([smoothed_wp_p_replicate(spec, n, params, seed, r)
                     for r in range(params.reps)])


def estimate_smoothed_wp_p(spec: MeasureSpec, n: int, params: SmoothingParams,
                           seed: int) -> Tuple[float, float]:
    """(mean, standard error) of the plug-in W_p^p statistic over replicates."""
    vals = smoothed_wp_p_samples(spec, n, params, seed)
    est = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return est, stderr


def pair_smoothed_distance(a: Union[DiscreteMeasure, SampleCloud],
                           b: Union[DiscreteMeasure, SampleCloud],
                           sigma: float, p: float, m_plugin: int, reps: int,
                           seed: int) -> Tuple[float, float]:
    """Plug-in estimate (mean, stderr) of W_p^(sigma)(a, b) for fixed measures.

    Each replicate draws m_plugin points from a * N_sigma and from
    b * N_sigma (atom resampling plus noise) and takes the exact W_p
    between the clouds.
    """
    pts_a, w_a = as_weighted_points(a)
    pts_b, w_b = as_weighted_points(b)
    d = pts_a.shape[1]
    if pts_b.shape[1] != d:
        raise ValueError("dimension mismatch")
    _check_capacity(m_plugin, d)
    vals = np.empty(reps)
    for r in range(reps):
        rng = stream_rng(seed, r)
        ia = rng.choice(len(w_a), size=m_plugin, p=w_a)
        ib = rng.choice(len(w_b), size=m_plugin, p=w_b)
        cloud_a = pts_a[ia] + sigma * rng.standard_normal((m_plugin, d))
        cloud_b = pts_b[ib] + sigma * rng.standard_normal((m_plugin, d))
        vals[r] = _cloud_wp(cloud_a, cloud_b, p)
    est = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return est, stderr
