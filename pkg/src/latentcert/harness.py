"""Desk-scale reproduction of the certification experiments.

``run_grid`` sweeps (N, delta) cells and records one trial per verification;
``violation_study`` measures how often observed error rates exceed their
certified bound. The synthetic scenario draws the calibration set and all
test samples from the same Gaussian model, so the ground-truth violation
rate is the conformal null rate — a controlled stand-in for a learned
pipeline.

One scenario (calibration draw) is shared by the whole grid, and trial
substreams are keyed by (sample-size index, trial index) only. Cells that
differ just in delta therefore score identical samples, which makes the
confidence trend (epsilon nondecreasing as delta shrinks) hold exactly
rather than statistically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from . import bounds, latent
from .conformal import CalibrationSet, KernelSpec, calibrate, load_calibration_csv
from .errors import FormatError
from .latent import GaussianLatentModel, SampleStream, load_model
from .verifier import count_violations

SYNTHETIC_GAUSSIAN = "synthetic_gaussian"
FROM_FILES = "from_files"

PER_TRIAL = "per_trial"
PILOT = "pilot"


@dataclass(frozen=True)
class ExperimentSpec:
    n_grid: tuple
    delta_grid: tuple
    trials_per_cell: int
    beta: float
    calibration_size: int
    scenario: str = SYNTHETIC_GAUSSIAN
    seed: int = 0
    dim: int = 2
    kernel: str = "uniform"
    bandwidth: float | None = None
    model_path: str | None = None
    calibration_path: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "delta_grid", tuple(float(d) for d in self.delta_grid))
        if not self.n_grid or not self.delta_grid:
            raise ValueError("n_grid and delta_grid must be non-empty")
        if any(n < 1 for n in self.n_grid):
            raise ValueError(f"sample sizes must be >= 1, got {self.n_grid}")
        if any(not 0.0 < d < 1.0 for d in self.delta_grid):
            raise ValueError(f"delta values must lie in (0, 1), got {self.delta_grid}")
        if self.trials_per_cell < 1:
            raise ValueError(f"trials_per_cell must be >= 1, got {self.trials_per_cell}")
        if not (0.0 < self.beta < 1.0):
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.calibration_size < 2:
            raise ValueError(f"calibration_size must be >= 2, got {self.calibration_size}")
        if self.scenario not in (SYNTHETIC_GAUSSIAN, FROM_FILES):
            raise ValueError(f"scenario must be '{SYNTHETIC_GAUSSIAN}' or '{FROM_FILES}', got {self.scenario!r}")
        if self.scenario == FROM_FILES and (self.model_path is None or self.calibration_path is None):
            raise ValueError("from_files scenario requires model_path and calibration_path")


@dataclass(frozen=True)
class TrialRecord:
    n: int
    delta: float
    trial_index: int
    violations: int
    observed_rate: float
    epsilon: float
    exceeded: bool


@dataclass(frozen=True)
class ViolationStats:
    delta: float
    trials: int
    exceed_fraction: float

    def __post_init__(self):
        if not (0.0 <= self.exceed_fraction <= 1.0):
            raise ValueError(f"exceed_fraction must lie in [0, 1], got {self.exceed_fraction}")


def load_spec(path) -> ExperimentSpec:
    """Read an experiment spec from its JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("top-level value must be a JSON object")
    required = ("n_grid", "delta_grid", "trials_per_cell", "beta", "calibration_size", "scenario", "seed")
    for field in required:
        if field not in doc:
            raise FormatError(f"missing field '{field}'")
    known = set(required) | {"dim", "kernel", "bandwidth", "model_path", "calibration_path"}
    unknown = set(doc) - known
    if unknown:
        raise FormatError(f"unknown field(s): {sorted(unknown)}")
    return ExperimentSpec(**doc)


def _build_scenario(spec: ExperimentSpec):
    """Model plus calibrated predictor for this spec (calibration uses substream 0)."""
    if spec.scenario == SYNTHETIC_GAUSSIAN:
        model = GaussianLatentModel.standard(spec.dim, label="synthetic-gaussian")
        points = latent.sample(model, spec.calibration_size, SampleStream(spec.seed, 0))
        cal = CalibrationSet(points=points, source_label="synthetic-gaussian")
    else:
        model = load_model(spec.model_path)
        cal = load_calibration_csv(spec.calibration_path)
    kernel = KernelSpec(kind=spec.kernel, bandwidth=spec.bandwidth if spec.bandwidth is not None else "scott")
    predictor = calibrate(cal, kernel, spec.beta)
    return model, predictor


def _trial_violations(spec: ExperimentSpec, model, predictor, n: int, n_index: int, trial: int) -> int:
    stream = SampleStream(spec.seed, 1 + n_index * spec.trials_per_cell + trial)
    samples = latent.sample(model, n, stream)
    return count_violations(predictor, samples)


def run_grid(spec: ExperimentSpec) -> list:
    """One TrialRecord per (N, delta, trial), ordered by (cell index, trial index).

    Cells iterate sample sizes in the outer loop and deltas inner; trials
    within a sample size reuse the same draws across deltas (the bound is
    the only delta-dependent quantity). ``exceeded`` compares each trial's
    observed rate against its own certified epsilon.
    """
    model, predictor = _build_scenario(spec)
    violations: dict = {}
    for i_n, n in enumerate(spec.n_grid):
        for trial in range(spec.trials_per_cell):
            violations[(i_n, trial)] = _trial_violations(spec, model, predictor, n, i_n, trial)

    records = []
    for i_n, n in enumerate(spec.n_grid):
        for delta in spec.delta_grid:
            for trial in range(spec.trials_per_cell):
                r = violations[(i_n, trial)]
                rate = r / n
                eps = bounds.epsilon_adjusted(n, r, delta, spec.beta).value
                records.append(
                    TrialRecord(
                        n=n,
                        delta=delta,
                        trial_index=trial,
                        violations=r,
                        observed_rate=rate,
                        epsilon=eps,
                        exceeded=rate > eps,
                    )
                )
    return records


def violation_study(spec: ExperimentSpec, mode: str = PER_TRIAL) -> list:
    """Exceedance fractions per delta; see :func:`violation_study_records`."""
    stats, _ = violation_study_records(spec, mode=mode)
    return stats


def violation_study_records(spec: ExperimentSpec, mode: str = PER_TRIAL):
    """Bound-exceedance study at N = n_grid[0] over ``trials_per_cell`` trials.

    ``per_trial`` (default) compares every trial's observed rate against the
    bound certified from that same trial's violation count — the pairing the
    per-trial scatter data is built from. ``pilot`` instead freezes one
    reference bound per delta from a pilot verification and compares fresh
    trials against it; the reference carries no coverage guarantee for
    fresh empirical rates, so its exceedance fractions degrade as N grows.

    Returns ``(stats, records)`` where stats hold one exceed-fraction per
    delta and records hold every (delta, trial) pair.
    """
    if mode not in (PER_TRIAL, PILOT):
        raise ValueError(f"mode must be '{PER_TRIAL}' or '{PILOT}', got {mode!r}")
    model, predictor = _build_scenario(spec)
    n = spec.n_grid[0]
    trials = spec.trials_per_cell

    counts = [_trial_violations(spec, model, predictor, n, 0, t) for t in range(trials)]
    pilot_count = None
    if mode == PILOT:
        pilot_stream = SampleStream(spec.seed, 1 + trials)
        pilot_count = count_violations(predictor, latent.sample(model, n, pilot_stream))

    stats = []
    records = []
    for delta in spec.delta_grid:
        if mode == PILOT:
            reference = bounds.epsilon_adjusted(n, pilot_count, delta, spec.beta).value
        exceed = 0
        for t, r in enumerate(counts):
            rate = r / n
            eps = reference if mode == PILOT else bounds.epsilon_adjusted(n, r, delta, spec.beta).value
            hit = rate > eps
            exceed += hit
            records.append(
                TrialRecord(
                    n=n,
                    delta=delta,
                    trial_index=t,
                    violations=r,
                    observed_rate=rate,
                    epsilon=eps,
                    exceeded=hit,
                )
            )
        stats.append(ViolationStats(delta=delta, trials=trials, exceed_fraction=exceed / trials))
    return stats, records


def emit_table(records) -> str:
    """Experiment results as CSV with the five result columns."""
    lines = ["N,delta,r,r/N,epsilon"]
    for rec in records:
        lines.append(f"{rec.n},{rec.delta!r},{rec.violations},{rec.observed_rate!r},{rec.epsilon!r}")
    return "\n".join(lines) + "\n"


def emit_plot_data(records) -> str:
    """Per-trial (N, observed rate, epsilon) rows grouped into one series per delta."""
    lines = ["delta,N,r/N,epsilon"]
    seen = []
    for rec in records:
        if rec.delta not in seen:
            seen.append(rec.delta)
    for delta in seen:
        for rec in records:
            if rec.delta == delta:
                lines.append(f"{delta!r},{rec.n},{rec.observed_rate!r},{rec.epsilon!r}")
    return "\n".join(lines) + "\n"


def emit_violation_stats(stats) -> str:
    lines = ["delta,trials,exceed_fraction"]
    for s in stats:
        lines.append(f"{s.delta!r},{s.trials},{s.exceed_fraction!r}")
    return "\n".join(lines) + "\n"
