"""Scenario-optimization error bounds on the constraint-violation probability.

Everything here is closed-form or exact-tail mathematics relating a sample
count N, an observed violation count r, a confidence parameter delta, and
the certified error level epsilon:

* the binomial-tail certificate
  ``C(r+d-1, r) * sum_{i<=r+d-1} C(N,i) eps^i (1-eps)^(N-i) <= delta``,
  evaluated entirely in log space so it stays exact for N up to 1e8;
* its numerical inversion (the smallest certifiable epsilon);
* the no-violation closed form ``1 - delta^(1/N)``;
* the Chernoff-style closed form
  ``min{1, (r + ln(1/delta) + sqrt(ln^2(1/delta) + 2 r ln(1/delta))) / N}``;
* the conformal discount that replaces r with ``r * (1 - beta)``;
* the classic PAC sample-complexity floor ``N >= (ln H + ln(1/delta)) / eps``.

All functions are pure and safe for unrestricted concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

NO_VIOLATION = "no_violation"
CHERNOFF = "chernoff"
ADJUSTED = "adjusted"
EXACT = "exact"

_BISECTION_TOL = 1e-12
_BISECTION_MAX_STEPS = 200
_BRACKET_LO = 1e-15
_BRACKET_HI = 1.0 - 1e-15
_CHUNK = 1_000_000
_PRECOMPUTE_LIMIT = 5_000_000


@dataclass(frozen=True)
class EpsilonBound:
    """A certified error level and how it was obtained."""

    value: float
    method: str
    clamped: bool = False

    def __post_init__(self):
        if not (0.0 < self.value <= 1.0):
            raise ValueError(f"epsilon must lie in (0, 1], got {self.value}")
        if self.method not in (NO_VIOLATION, CHERNOFF, ADJUSTED, EXACT):
            raise ValueError(f"unknown bound method {self.method!r}")

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method, "clamped": self.clamped}


@dataclass(frozen=True)
class BoundQuery:
    """Inputs of one bound evaluation. ``violations`` is real-valued so the
    conformal discount ``r * (1 - beta)`` can be fed back through the same
    closed form."""

    n_samples: int
    violations: float
    delta: float
    dims: int = 1
    beta: float = 0.0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if not (0.0 <= self.violations <= self.n_samples):
            raise ValueError(f"violations must lie in [0, n_samples], got {self.violations}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie strictly in (0, 1), got {self.delta}")
        if not (0.0 <= self.beta < 1.0):
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        if self.dims < 1:
            raise ValueError(f"dims must be >= 1, got {self.dims}")


def _validate_core(n: int, r: int, d: int, delta: float) -> None:
    if n < 1:
        raise ValueError(f"N must be >= 1, got {n}")
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if r + d - 1 > n:
        raise ValueError(f"need r + d - 1 <= N, got r={r}, d={d}, N={n}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie strictly in (0, 1), got {delta}")


def _log_binom(n: float, k: float) -> float:
    return float(gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0))


def _log_binom_coefs(n: int, upto: int) -> np.ndarray:
    i = np.arange(upto + 1, dtype=np.float64)
    return gammaln(n + 1.0) - gammaln(i + 1.0) - gammaln(n - i + 1.0)


def _logsumexp_pair(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def _log_binomial_cdf(n: int, m: int, eps: float, log_coefs: np.ndarray | None = None) -> float:
    """log of sum_{i=0}^{m} C(n,i) eps^i (1-eps)^(n-i), accumulated stably."""
    log_eps = math.log(eps)
    log_1m = math.log1p(-eps)
    total = -math.inf
    for start in range(0, m + 1, _CHUNK):
        stop = min(m + 1, start + _CHUNK)
        i = np.arange(start, stop, dtype=np.float64)
        if log_coefs is not None:
            coefs = log_coefs[start:stop]
        else:
            coefs = gammaln(n + 1.0) - gammaln(i + 1.0) - gammaln(n - i + 1.0)
        terms = coefs + i * log_eps + (n - i) * log_1m
        peak = float(np.max(terms))
        chunk_lse = peak + math.log(float(np.sum(np.exp(terms - peak))))
        total = _logsumexp_pair(total, chunk_lse)
    return min(total, 0.0)  # the CDF cannot exceed 1; guard against rounding


def binomial_condition_holds(n: int, r: int, d: int, eps: float, delta: float) -> bool:
    """Exact tail certificate: does (N, r, d, eps) satisfy the delta condition?

    Evaluates ``C(r+d-1, r) * P[Binom(N, eps) <= r+d-1] <= delta`` in log
    space; monotone decreasing in ``eps``, which the inversion below relies
    on. ``eps`` must be strictly inside (0, 1): the endpoint Bernoulli cases
    are degenerate.
    """
    _validate_core(n, r, d, delta)
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie strictly in (0, 1), got {eps}")
    m = r + d - 1
    log_lhs = _log_binom(m, r) + _log_binomial_cdf(n, m, eps)
    return log_lhs <= math.log(delta)


def exact_epsilon(n: int, r: int, d: int = 1, delta: float = 1e-6) -> EpsilonBound:
    """Smallest epsilon (to 1e-12 absolute) satisfying the tail certificate.

    Bisects the monotone-decreasing condition over [1e-15, 1 - 1e-15] and
    returns the upper end of the final bracket, so the condition is known to
    hold at the returned value. Returns 1 (clamped) when no epsilon below 1
    works.
    """
    _validate_core(n, r, d, delta)
    m = r + d - 1
    log_delta = math.log(delta)
    log_coef = _log_binom(m, r)

    if m == n:
        # The binomial CDF is identically 1: the condition does not depend
        # on eps, so either every eps works or none does.
        if log_coef <= log_delta:
            return EpsilonBound(value=_BRACKET_LO, method=EXACT)
        return EpsilonBound(value=1.0, method=EXACT, clamped=True)

    log_coefs = _log_binom_coefs(n, m) if m + 1 <= _PRECOMPUTE_LIMIT else None

    def holds(eps: float) -> bool:
        return log_coef + _log_binomial_cdf(n, m, eps, log_coefs) <= log_delta

    lo, hi = _BRACKET_LO, _BRACKET_HI
    if not holds(hi):
        return EpsilonBound(value=1.0, method=EXACT, clamped=True)
    if holds(lo):
        return EpsilonBound(value=lo, method=EXACT)

    steps = 0
    while hi - lo > _BISECTION_TOL:
        steps += 1
        if steps > _BISECTION_MAX_STEPS:
            raise RuntimeError("bisection failed to converge; the condition should be monotone in eps")
        mid = 0.5 * (lo + hi)
        if holds(mid):
            hi = mid
        else:
            lo = mid
    return EpsilonBound(value=hi, method=EXACT)


def epsilon_no_violations(n: int, delta: float) -> EpsilonBound:
    """Closed form for the violation-free case: ``1 - delta^(1/N)``."""
    if n < 1:
        raise ValueError(f"N must be >= 1, got {n}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie strictly in (0, 1), got {delta}")
    value = -math.expm1(math.log(delta) / n)
    return EpsilonBound(value=value, method=NO_VIOLATION)


def _chernoff_value(n: int, r: float, delta: float) -> tuple[float, bool]:
    log_inv_delta = -math.log(delta)
    raw = (r + log_inv_delta + math.sqrt(log_inv_delta * log_inv_delta + 2.0 * r * log_inv_delta)) / n
    if raw > 1.0:
        return 1.0, True
    return raw, False


def epsilon_chernoff(n: int, r: float, delta: float) -> EpsilonBound:
    """Closed-form bound dominating the exact tail inversion at d=1.

    ``min{1, (r + ln(1/delta) + sqrt(ln^2(1/delta) + 2 r ln(1/delta))) / N}``
    with real-valued ``r`` so discounted violation counts pass through
    unchanged. The ``clamped`` flag records when the min fired.
    """
    if n < 1:
        raise ValueError(f"N must be >= 1, got {n}")
    if not (r >= 0.0 and math.isfinite(r)):
        raise ValueError(f"r must be a finite non-negative real, got {r}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie strictly in (0, 1), got {delta}")
    value, clamped = _chernoff_value(n, float(r), delta)
    return EpsilonBound(value=value, method=CHERNOFF, clamped=clamped)


def epsilon_adjusted(n: int, r: float, delta: float, beta: float) -> EpsilonBound:
    """Chernoff bound with the violation count discounted to ``r * (1 - beta)``.

    Of r flagged violations an expected ``beta * r`` are conformal errors
    rather than true violations, so the discounted count feeds the same
    closed form. Identical to :func:`epsilon_chernoff` at ``beta = 0``.
    """
    if not (0.0 <= beta < 1.0):
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    if not (r >= 0.0 and math.isfinite(r)):
        raise ValueError(f"r must be a finite non-negative real, got {r}")
    if n < 1:
        raise ValueError(f"N must be >= 1, got {n}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie strictly in (0, 1), got {delta}")
    value, clamped = _chernoff_value(n, float(r) * (1.0 - beta), delta)
    return EpsilonBound(value=value, method=ADJUSTED, clamped=clamped)


def pac_sample_complexity(eps: float, delta: float, ln_hypothesis_space: float = 0.0) -> int:
    """Smallest integer N with ``N >= (ln H + ln(1/delta)) / eps``."""
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie strictly in (0, 1), got {eps}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie strictly in (0, 1), got {delta}")
    if ln_hypothesis_space < 0.0:
        raise ValueError(f"ln_hypothesis_space must be >= 0, got {ln_hypothesis_space}")
    rhs = (ln_hypothesis_space - math.log(delta)) / eps
    return max(1, math.ceil(rhs))


def evaluate(query: BoundQuery) -> dict[str, EpsilonBound]:
    """All applicable bounds for one query (used by the CLI)."""
    out: dict[str, EpsilonBound] = {}
    r = query.violations
    if r == 0:
        out[NO_VIOLATION] = epsilon_no_violations(query.n_samples, query.delta)
    out[CHERNOFF] = epsilon_chernoff(query.n_samples, r, query.delta)
    out[ADJUSTED] = epsilon_adjusted(query.n_samples, r, query.delta, query.beta)
    if float(r).is_integer():
        out[EXACT] = exact_epsilon(query.n_samples, int(r), query.dims, query.delta)
    return out
