"""Monte-Carlo certification runs against a calibrated safety constraint.

A verification draws N latent samples, counts the null (out-of-distribution)
predictions, and certifies the error level via the conformal-discounted
closed form; the undiscounted and exact-tail bounds ride along for
diagnostics. Sampling is partitioned round-robin over workers (sample ``i``
belongs to worker ``i mod workers``), and because every sample is a pure
function of its index within the stream, the worker count never changes the
result.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import bounds, jsonio, latent
from .conformal import ConformalPredictor, conformity_many
from .latent import GaussianLatentModel, SampleStream


@dataclass(frozen=True)
class VerificationConfig:
    model: GaussianLatentModel
    predictor: ConformalPredictor
    n_samples: int
    delta: float
    stream: SampleStream = SampleStream()
    workers: int = 1

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie strictly in (0, 1), got {self.delta}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.predictor.dim != self.model.dim:
            raise ValueError(
                f"predictor dimension {self.predictor.dim} does not match model dimension {self.model.dim}"
            )


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of one certification run; ``epsilon`` is the headline bound."""

    n_samples: int
    violations: int
    observed_rate: float
    epsilon: bounds.EpsilonBound
    epsilon_unadjusted: bounds.EpsilonBound
    epsilon_exact: bounds.EpsilonBound
    delta: float
    beta: float
    seed: int
    stream_index: int
    elapsed: float

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "violations": self.violations,
            "observed_rate": self.observed_rate,
            "epsilon": self.epsilon.to_dict(),
            "epsilon_unadjusted": self.epsilon_unadjusted.to_dict(),
            "epsilon_exact": self.epsilon_exact.to_dict(),
            "delta": self.delta,
            "beta": self.beta,
            "seed": self.seed,
            "stream_index": self.stream_index,
            "elapsed": self.elapsed,
        }

    def to_json(self, indent: int = 2) -> str:
        return jsonio.dumps(self.to_dict(), indent=indent)


@dataclass(frozen=True)
class ScenarioResult:
    """Least uniform relaxation making every sampled constraint feasible."""

    lambda_star: float
    upper_bound: float
    violating_count: int

    def __post_init__(self):
        if not (0.0 <= self.lambda_star <= self.upper_bound):
            raise ValueError(
                f"lambda_star must lie in [0, {self.upper_bound}], got {self.lambda_star}"
            )

    def to_dict(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "upper_bound": self.upper_bound,
            "violating_count": self.violating_count,
        }


def count_violations(predictor: ConformalPredictor, samples) -> int:
    """Number of samples whose set prediction is empty (conformity below threshold)."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        return 0
    return int(np.count_nonzero(conformity_many(predictor, arr) < predictor.threshold))


def verify(config: VerificationConfig) -> VerificationReport:
    """Run the certification: sample, count violations, bound the error level.

    Deterministic for a fixed ``(seed, stream_index)``: reports from repeat
    runs are identical except for ``elapsed``, for any worker count.
    """
    start = time.perf_counter()
    samples = latent.sample(config.model, config.n_samples, config.stream)
    r = 0
    for worker in range(config.workers):
        r += count_violations(config.predictor, samples[worker :: config.workers])
    beta = config.predictor.beta
    report = VerificationReport(
        n_samples=config.n_samples,
        violations=r,
        observed_rate=r / config.n_samples,
        epsilon=bounds.epsilon_adjusted(config.n_samples, r, config.delta, beta),
        epsilon_unadjusted=bounds.epsilon_chernoff(config.n_samples, r, config.delta),
        epsilon_exact=bounds.exact_epsilon(config.n_samples, r, 1, config.delta),
        delta=config.delta,
        beta=beta,
        seed=config.stream.seed,
        stream_index=config.stream.stream_index,
        elapsed=time.perf_counter() - start,
    )
    return report


def scenario_relax(
    predictor: ConformalPredictor, samples, upper_bound: float = 1.0
) -> ScenarioResult:
    """Minimize the slack lambda subject to every sampled constraint.

    The constraint value at a sample is ``threshold - conformity``; the
    optimum is the largest constraint value clamped to ``[0, upper_bound]``.
    The default bound 1.0 is inert in practice since normalized thresholds
    cannot exceed 1.
    """
    if not upper_bound > 0.0:
        raise ValueError(f"upper_bound must be positive, got {upper_bound}")
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        return ScenarioResult(lambda_star=0.0, upper_bound=upper_bound, violating_count=0)
    slack = predictor.threshold - conformity_many(predictor, arr)
    lam = min(max(float(np.max(slack)), 0.0), upper_bound)
    return ScenarioResult(
        lambda_star=lam,
        upper_bound=upper_bound,
        violating_count=int(np.count_nonzero(slack > 0.0)),
    )
