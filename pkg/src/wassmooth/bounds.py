"""Closed-form constants and upper-bound expressions for the smoothed rate.

The expected p-th power of the Gaussian-smoothed distance between a measure
with finite q-th moment (q > p) and its N-point empirical measure obeys

    E[(W_p^(sigma)(mu_N, mu))^p]  <=  C_{beta,sigma} / N^min((beta-1)/beta, 1/2)

for every beta in (1, (q+d)/(p+d)).  Two proof routes give two explicit
constants ("carlson" and "dyadic" variants below); this module evaluates
both, the auxiliary constants they are assembled from, and the comparator
rate shapes from the classical (unsmoothed) empirical-measure literature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .numerics import gamma_fn, log_gamma


def c_pd(p: float, d: int) -> float:
    """Smoothing-cost constant 2^(3/2) (Gamma((p+d)/2) / Gamma(d/2))^(1/p).

    Equals twice the p-th absolute moment of the standard normal, so
    W_p(mu, nu) <= c_pd * sigma + W_p^(sigma)(mu, nu).
    """
    if p < 1 or d < 1:
        raise ValueError("need p >= 1 and d >= 1")
    return 2.0 ** 1.5 * math.exp(
        (log_gamma((p + d) / 2.0) - log_gamma(d / 2.0)) / p)


def gaussian_moment(p: float, d: int) -> float:
    """M_p^p of the standard normal in R^d: 2^(p/2) Gamma((p+d)/2)/Gamma(d/2)."""
    if p < 0 or d < 1:
        raise ValueError("need p >= 0 and d >= 1")
    return 2.0 ** (p / 2.0) * math.exp(
        log_gamma((p + d) / 2.0) - log_gamma(d / 2.0))


def i_abd(alpha: float, beta: float, d: int) -> float:
    """Gamma closed form of the radial integral in the Carlson constant.

    I = Gamma(d/alpha) Gamma(1/(beta-1) - d/alpha) / Gamma(1/(beta-1)),
    which equals the integral of s^(d/alpha - 1) (1+s)^(-1/(beta-1)) over
    [0, inf); it converges iff alpha > d (beta - 1).
    """
    if beta <= 1:
        raise ValueError("beta must be > 1")
    if alpha <= d * (beta - 1.0):
        raise ValueError(
            f"alpha={alpha} must exceed d(beta-1)={d * (beta - 1.0)} for convergence")
    one_over = 1.0 / (beta - 1.0)
    return math.exp(log_gamma(d / alpha) + log_gamma(one_over - d / alpha)
                    - log_gamma(one_over))


def carlson_constant(alpha: float, beta: float, d: int) -> float:
    """Constant of the generalized Carlson inequality.

    With m = d (beta - 1):
        C = (alpha/m)^(1/beta) * (m/(alpha-m))^((alpha-m)/(alpha beta))
            * ((2 pi^(d/2) / Gamma(d/2)) * I / alpha)^((beta-1)/beta)
    bounds  (integral of g)  by a product of powers of (integral of g^beta)
    and (integral of |x|^alpha g^beta) for non-negative g on R^d.
    """
    m = d * (beta - 1.0)
    if beta <= 1 or alpha <= m:
        raise ValueError("need beta > 1 and alpha > d(beta-1)")
    sphere = 2.0 * math.pi ** (d / 2.0) / gamma_fn(d / 2.0)
    return ((alpha / m) ** (1.0 / beta)
            * (m / (alpha - m)) ** ((alpha - m) / (alpha * beta))
            * (sphere * i_abd(alpha, beta, d) / alpha) ** ((beta - 1.0) / beta))


def mz_constant(beta: float) -> float:
    """Marcinkiewicz-Zygmund constant 2 sqrt([beta/2] + 1) ([.] integer part)."""
    if beta < 1:
        raise ValueError("beta must be >= 1")
    return 2.0 * math.sqrt(math.floor(beta / 2.0) + 1.0)


def mz_rate_exponent(beta: float) -> float:
    """Sample-mean L^beta decay exponent min((beta-1)/beta, 1/2)."""
    if beta < 1:
        raise ValueError("beta must be >= 1")
    return min((beta - 1.0) / beta, 0.5)


@dataclass(frozen=True)
class SmoothRateConstantSpec:
    """Parameters (p, q, d, sigma, beta, M_q(mu)) of the smoothed-rate constant.

    alpha is always derived as q - p*beta and is not an independent input.
    """

    p: float
    q: float
    d: int
    sigma: float
    beta: float
    m_q: float
    variant: str = "carlson"

    def __post_init__(self) -> None:
        if self.p < 1 or self.d < 1:
            raise ValueError("need p >= 1 and d >= 1")
        if self.q <= self.p:
            raise ValueError("need q > p")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        hi = (self.q + self.d) / (self.p + self.d)
        if not (1.0 < self.beta < hi):
            raise ValueError(
                f"beta must lie in (1, (q+d)/(p+d)) = (1, {hi}); got {self.beta}")
        if self.m_q < 0:
            raise ValueError("m_q must be non-negative")
        if self.variant not in ("carlson", "dyadic"):
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def alpha(self) -> float:
        return self.q - self.p * self.beta


def _carlson_variant_constant(s: SmoothRateConstantSpec) -> float:
    p, q, d, sigma, beta = s.p, s.q, s.d, s.sigma, s.beta
    prefactor = (2.0 ** p * mz_constant(beta) * carlson_constant(s.alpha, beta, d)
                 / (2.0 * math.pi * sigma ** 2) ** (d * (beta - 1.0) / (2.0 * beta)))
    brace = (2.0 ** (q - 1.0) * s.m_q ** q
             + 2.0 ** (1.5 * q - 1.0) * sigma ** q
             * math.exp(log_gamma((q + d) / 2.0) - log_gamma(d / 2.0)))
    exponent = ((p + d) * beta - d) / (q * beta)
    return prefactor * brace ** exponent


def _dyadic_gaussian_series(p: float, d: int, sigma: float, beta: float) -> float:
    """1 + sum over n >= 1 of 2^(pn + dn(1 - 1/beta)) (2d)^(1/beta) e^(-2^(2n-5)/(beta sigma^2)).

    The terms grow geometrically before the double-exponential factor takes
    over; summation stops once the remainder (at most twice the next term,
    since the term ratio is below 1/2 past the crossover) is negligible.
    """
    total = 1.0
    growth = p * math.log(2.0) + d * (1.0 - 1.0 / beta) * math.log(2.0)
    amp = (2.0 * d) ** (1.0 / beta)
    prev = math.inf
    for n in range(1, 10_000):
        log_term = n * growth - 2.0 ** (2 * n - 5) / (beta * sigma ** 2)
        term = amp * math.exp(log_term)
        total += term
        if term < prev and 2.0 * term < 1e-16 * total:
            return total
        prev = term
    raise RuntimeError("dyadic series failed to converge in 10^4 terms")


def _dyadic_variant_constant(s: SmoothRateConstantSpec) -> float:
    p, q, d, sigma, beta = s.p, s.q, s.d, s.sigma, s.beta
    prefactor = (2.0 ** (p + d * (1.0 - 1.0 / beta)) * d ** (p / 2.0)
                 * mz_constant(beta)
                 / (2.0 * math.pi * sigma ** 2) ** (d * (beta - 1.0) / (2.0 * beta)))
    ratio_exp = p + d - (q + d) / beta  # < 0 exactly when beta < (q+d)/(p+d)
    moment_part = (2.0 ** (2.0 * q / beta) / (1.0 - 2.0 ** ratio_exp)
                   * s.m_q ** (q / beta))
    return prefactor * (moment_part + _dyadic_gaussian_series(p, d, sigma, beta))


def rate_smooth_constant(spec: SmoothRateConstantSpec) -> float:
    """C_{beta,sigma} under the chosen proof variant."""
    if spec.variant == "carlson":
        return _carlson_variant_constant(spec)
    return _dyadic_variant_constant(spec)


def rate_smooth_bound(spec: SmoothRateConstantSpec, n: int) -> float:
    """min-variant C_{beta,sigma} times N^(-min((beta-1)/beta, 1/2))."""
    if n < 1:
        raise ValueError("N must be >= 1")
    c = min(_carlson_variant_constant(spec), _dyadic_variant_constant(spec))
    return c * float(n) ** -mz_rate_exponent(spec.beta)


def best_beta(p: float, q: float, d: int) -> tuple[float, float]:
    """(beta, exponent) maximizing the rate over the open interval.

    The exponent sup (q-p)/(q+d) is not attained; when it exceeds 1/2 the
    cap is attained at beta = 2, otherwise we back off by a relative 1e-3
    from the right endpoint (and, in the sliver where that backoff would
    leave the interval, take the midpoint instead).
    """
    if q <= p:
        raise ValueError("need q > p")
    hi = (q + d) / (p + d)
    if hi > 2.0:
        return 2.0, 0.5
    beta = (1.0 - 1e-3) * hi
    if beta <= 1.0:
        beta = 0.5 * (1.0 + hi)
    return beta, (beta - 1.0) / beta


class BoundaryCaseError(ValueError):
    """q sits on an excluded equality boundary of the comparator rate."""


def fg15_rate_shape(p: float, q: float, d: int, n: int) -> float:
    """N-dependent factor of the classical empirical-measure moment bound.

    Case selection on p vs d/2, with the multiplicative constant and
    M_q^p(mu) treated as external multipliers (callers default them to 1):

        p > d/2, q != 2p        : N^(-1/2) + N^(-(q-p)/q)
        p = d/2, q != 2p        : N^(-1/2) log(1+N) + N^(-(q-p)/q)
        p < d/2, q != dp/(d-p)  : N^(-p/d) + N^(-(q-p)/q)
    """
    if q <= p:
        raise ValueError("need q > p")
    if n < 1:
        raise ValueError("N must be >= 1")
    nn = float(n)
    moment_term = nn ** (-(q - p) / q)
    if p > d / 2.0:
        if q == 2.0 * p:
            raise BoundaryCaseError("q = 2p is excluded when p > d/2")
        return nn ** -0.5 + moment_term
    if p == d / 2.0:
        if q == 2.0 * p:
            raise BoundaryCaseError("q = 2p is excluded when p = d/2")
        return nn ** -0.5 * math.log1p(nn) + moment_term
    if q == d * p / (d - p):
        raise BoundaryCaseError("q = dp/(d-p) is excluded when p < d/2")
    return nn ** (-p / d) + moment_term
