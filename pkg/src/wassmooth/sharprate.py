"""Desk-scale audit of the sharp-rate lower-bound construction.

The dyadic atomic measure (see ``measures.sharp_rate_measure``) admits a
lower bound of order N^(-1/2-eps) for the smoothed empirical distance.
The proof tracks one distinguished atom x_N = 2^(k_N) e_1 with mass
w_N = 2^(-k_N^2 - 1), where k_N = [log2 log2 N], and runs a chain:

  I.   quantities L_N, k_N, x_N, r_N = 2^(k_N - 3), w_N;
  II.  mass bounds  mu_N^sigma(B_N) >= (1 - eps_N) W_N   and
       mu^sigma(B_N^(r_N)) <= w_N + delta_N  with exact Gaussian tails;
  III. P(W_N - w_N >= c_1 sqrt(w_N/N)) >= c_0 via the binomial CLT;
  IV.  eps_N + delta_N <= (c_1/4) sqrt(w_N/N);
  V.   the neighborhood certificate turns the mass gap into a W_p^p bound;
  VI.  2^(k_N p - k_N^2/2) >= N^(-eps) eventually.

Everything here is exactly computable: the event in III depends on the
empirical measure only through a Binomial(N, w_N) count (no need to
materialize N draws), and interval masses under Gaussian smoothing reduce
to differences of normal CDFs.

The Berry-Esseen constant is not pinned by the analysis; this module uses
the published universal value 0.4748, giving the binomial floor
c_0 = (1 - Phi(1/2))/2 and threshold v_0 = ceil((C_BE/c_0)^2) = 10.
The choice is recorded in every report.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.special import gammaln

from .measures import (
    DiscreteMeasure,
    SampleCloud,
    sample_sharp_rate,
    sharp_rate_measure,
    stream_rng,
)
from .numerics import gaussian_tail_d, normal_cdf
from .smoothing import smoothed_mass_1d

#: published universal Berry-Esseen constant used to instantiate v_0
BERRY_ESSEEN_CONSTANT = 0.4748

C1 = math.sqrt(3.0) / 4.0
C0 = (1.0 - normal_cdf(0.5)) / 2.0
V0 = math.ceil((BERRY_ESSEEN_CONSTANT / C0) ** 2)

#: truncation depth for the reference measure; atoms beyond k = 26 carry
#: less mass than one ulp of 1 in double precision
_K_TRUNC = 26

_EXACT_BINOMIAL_LIMIT = 10 ** 7


@dataclass(frozen=True)
class SharpRateQuantities:
    """Step-I quantities at sample size N."""

    n: int
    l_n: float
    k_n: int
    x_n: float
    r_n: float
    w_n: float
    c_0: float
    c_1: float
    v_0: int

    def to_dict(self) -> dict:
        return asdict(self)


def sharp_quantities(n: int) -> SharpRateQuantities:
    """L_N = log2 N, k_N = [log2 L_N], x_N = 2^k_N, r_N = 2^(k_N-3), w_N = 2^(-k_N^2-1)."""
    if n < 16:
        raise ValueError("N must be >= 16")
    l_n = math.log2(n)
    k_n = int(math.floor(math.log2(l_n)))
    return SharpRateQuantities(
        n=n,
        l_n=l_n,
        k_n=k_n,
        x_n=2.0 ** k_n,
        r_n=2.0 ** (k_n - 3),
        w_n=2.0 ** (-(k_n * k_n) - 1),
        c_0=C0,
        c_1=C1,
        v_0=V0,
    )


@dataclass(frozen=True)
class BinomialTailEstimate:
    """P(X >= ceil(np + sqrt(np(1-p))/2)) with provenance of the path taken."""

    value: float
    stderr: float
    exact: bool

    def __float__(self) -> float:
        return self.value


def binomial_threshold(n: int, prob: float) -> int:
    """Smallest integer count in the event {X - np >= sqrt(np(1-p))/2}."""
    return math.ceil(n * prob + 0.5 * math.sqrt(n * prob * (1.0 - prob)))


def binomial_event_prob(n: int, prob: float, *, mc_reps: int = 400_000,
                        seed: int = 0) -> BinomialTailEstimate:
    """P(Bin(n, prob) >= threshold) by stable log-space summation.

    Exact for n <= 1e7 (log-pmf summed with one log-sum-exp pass); larger n
    falls back to Monte Carlo with the standard error reported.
    """
    if not (0.0 < prob < 1.0):
        raise ValueError("prob must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    k0 = binomial_threshold(n, prob)
    if k0 > n:
        return BinomialTailEstimate(value=0.0, stderr=0.0, exact=True)
    if k0 <= 0:
        return BinomialTailEstimate(value=1.0, stderr=0.0, exact=True)
    if n <= _EXACT_BINOMIAL_LIMIT:
        # terms beyond the mean + 60 sd carry less than e^-1000 of mass
        sd = math.sqrt(n * prob * (1.0 - prob))
        k_hi = min(n, int(math.ceil(n * prob + 60.0 * sd)) + 64)
        k = np.arange(k0, k_hi + 1, dtype=np.float64)
        log_pmf = (gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
                   + k * math.log(prob) + (n - k) * math.log1p(-prob))
        peak = float(log_pmf.max())
        value = float(math.exp(peak) * np.sum(np.exp(log_pmf - peak)))
        return BinomialTailEstimate(value=min(value, 1.0), stderr=0.0, exact=True)
    rng = stream_rng(seed, 0xB1)
    hits = rng.binomial(n, prob, size=mc_reps) >= k0
    est = float(hits.mean())
    stderr = math.sqrt(max(est * (1.0 - est), 1e-12) / mc_reps)
    return BinomialTailEstimate(value=est, stderr=stderr, exact=False)


def mass_smoothed_interval(measure: Union[DiscreteMeasure, SampleCloud],
                           sigma: float, interval: Tuple[float, float]) -> float:
    """Exact Gaussian-smoothed mass of [a, b] for a measure on the line."""
    a, b = interval
    if b < a:
        raise ValueError("empty interval")
    return smoothed_mass_1d(measure, sigma, a, b)


# ---------------------------------------------------------------------------
# the certified experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LowerBoundReport:
    """Outcome of the replicated lower-bound experiment."""

    quantities: SharpRateQuantities
    sigma: float
    p: float
    reps: int
    seed: int
    berry_esseen_constant: float
    threshold_count: int
    freq_en: float
    exact_event_prob: float
    min_mass_gap: float
    certified_lb: float
    paper_lb: float
    errors_ok: bool
    eps_n: float
    delta_n: float
    eps_lemma_bound: float
    delta_lemma_bound: float
    smoothed_reference_mass: float

    def to_dict(self) -> dict:
        out = asdict(self)
        out["quantities"] = self.quantities.to_dict()
        return out


def paper_lower_bound(n: int, p: float) -> float:
    """C N^(-1/2) 2^(k_N p - k_N^2/2) with C = (c_1 c_0 / 2) 2^(-3p - 1/2)."""
    q = sharp_quantities(n)
    c_const = (C1 * C0 / 2.0) * 2.0 ** (-3.0 * p - 0.5)
    return c_const * n ** -0.5 * 2.0 ** (q.k_n * p - q.k_n ** 2 / 2.0)


def lower_bound_experiment(n: int, sigma: float, p: float, reps: int,
                           seed: int) -> LowerBoundReport:
    """Replicated audit of Steps II-V at sample size N.

    Each replicate draws the count S ~ Bin(N, w_N) of hits on the
    distinguished atom (the event E_N depends on mu_N only through S).  On
    E_N = {W_N - w_N >= c_1 sqrt(w_N/N)} the mass gap

        (1 - eps_N) W_N - mu^sigma(B_N^(r_N))

    is evaluated with exact CDF masses, and the neighborhood certificate
    yields the certified bound r_N^p * (min gap)^+ * freq(E_N).  The report
    also carries the paper-form bound and the Step-IV error check
    eps_N + delta_N <= (c_1/4) sqrt(w_N/N).
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    q = sharp_quantities(n)
    w, r, x = q.w_n, q.r_n, q.x_n

    eps_n = 2.0 * (1.0 - normal_cdf(r / sigma))
    delta_n = 2.0 * (1.0 - normal_cdf(2.0 * r / sigma))
    eps_lemma = gaussian_tail_d(r, sigma, 1)
    delta_lemma = gaussian_tail_d(2.0 * r, sigma, 1)

    reference = sharp_rate_measure(1, _K_TRUNC)
    ref_mass = mass_smoothed_interval(reference, sigma, (x - 2.0 * r, x + 2.0 * r))

    threshold = binomial_threshold(n, w)
    counts = np.empty(reps, dtype=np.int64)
    for rep in range(reps):
        counts[rep] = stream_rng(seed, rep).binomial(n, w)
    event = counts / n - w >= C1 * math.sqrt(w / n)
    freq = float(event.mean())

    if event.any():
        w_emp = counts[event] / n
        gaps = (1.0 - eps_n) * w_emp - ref_mass
        min_gap = float(gaps.min())
    else:
        min_gap = 0.0
    certified = r ** p * max(min_gap, 0.0) * freq

    exact_prob = float(binomial_event_prob(n, w, seed=seed))
    errors_ok = eps_n + delta_n <= (C1 / 4.0) * math.sqrt(w / n)

    return LowerBoundReport(
        quantities=q,
        sigma=sigma,
        p=p,
        reps=reps,
        seed=seed,
        berry_esseen_constant=BERRY_ESSEEN_CONSTANT,
        threshold_count=threshold,
        freq_en=freq,
        exact_event_prob=exact_prob,
        min_mass_gap=min_gap,
        certified_lb=certified,
        paper_lb=paper_lower_bound(n, p),
        errors_ok=bool(errors_ok),
        eps_n=eps_n,
        delta_n=delta_n,
        eps_lemma_bound=eps_lemma,
        delta_lemma_bound=delta_lemma,
        smoothed_reference_mass=ref_mass,
    )


def step2_margins(n: int, sigma: float, n_clouds: int, seed: int
                  ) -> Tuple[np.ndarray, float]:
    """Margins of the two Step-II inequalities on sampled clouds.

    Returns (per-cloud margins of  mu_N^sigma(B_N) - (1-eps_N) W_N,  and
    the single margin  w_N + delta_N - mu^sigma(B_N^(r_N))  of the
    reference-mass inequality); both must be non-negative.
    """
    q = sharp_quantities(n)
    w, r, x = q.w_n, q.r_n, q.x_n
    eps_n = 2.0 * (1.0 - normal_cdf(r / sigma))
    delta_n = 2.0 * (1.0 - normal_cdf(2.0 * r / sigma))

    margins = np.empty(n_clouds)
    for j in range(n_clouds):
        cloud = sample_sharp_rate(1, n, seed=seed + j)
        w_emp = float(np.mean(cloud.points[:, 0] == x))
        emp_mass = mass_smoothed_interval(cloud, sigma, (x - r, x + r))
        margins[j] = emp_mass - (1.0 - eps_n) * w_emp

    reference = sharp_rate_measure(1, _K_TRUNC)
    ref_mass = mass_smoothed_interval(reference, sigma, (x - 2.0 * r, x + 2.0 * r))
    ref_margin = w + delta_n - ref_mass
    return margins, float(ref_margin)


# ---------------------------------------------------------------------------
# Step VI audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsilonAuditRow:
    n: int
    factor: float          # 2^(k_N p - k_N^2 / 2)
    n_power: float         # N^(-eps)
    factor_ok: bool        # factor >= N^(-eps)
    symbolic_ok: bool      # (log2 log2 N)^2 / 2 <= eps log2 N


@dataclass(frozen=True)
class EpsilonAudit:
    rows: Tuple[EpsilonAuditRow, ...]
    first_factor_ok: int | None
    first_symbolic_ok: int | None


def epsilon_vs_rate_audit(p: float, eps: float,
                          n_grid: Sequence[int]) -> EpsilonAudit:
    """Step-VI comparison of the dyadic factor against N^(-eps) on a grid.

    ``first_*`` report the smallest grid N from which the corresponding
    inequality holds for every larger grid value.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    rows = []
    for n in n_grid:
        q = sharp_quantities(int(n))
        factor = 2.0 ** (q.k_n * p - q.k_n ** 2 / 2.0)
        n_pow = float(n) ** -eps
        log2n = math.log2(n)
        symbolic = 0.5 * math.log2(log2n) ** 2 <= eps * log2n
        rows.append(EpsilonAuditRow(n=int(n), factor=factor, n_power=n_pow,
                                    factor_ok=factor >= n_pow,
                                    symbolic_ok=symbolic))

    def first_stable(flags):
        idx = None
        for i in range(len(flags) - 1, -1, -1):
            if not flags[i]:
                break
            idx = i
        return rows[idx].n if idx is not None else None

    return EpsilonAudit(
        rows=tuple(rows),
        first_factor_ok=first_stable([r.factor_ok for r in rows]),
        first_symbolic_ok=first_stable([r.symbolic_ok for r in rows]),
    )
