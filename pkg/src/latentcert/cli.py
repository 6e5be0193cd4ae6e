"""Command-line entry point.

Every subcommand is a thin adapter over one module operation; outputs are
the module results serialized as-is. Exit codes: 0 on success, 1 for
validation or runtime failures (one ``error: ...`` line on stderr), 2 for
usage errors.
"""

from __future__ import annotations

import functools
import os
import sys

import click

from . import bounds, harness, jsonio
from .conformal import KernelSpec, calibrate as _calibrate, load_calibration_csv, load_predictor, save_predictor
from .latent import SampleStream, load_model
from .verifier import VerificationConfig, scenario_relax, verify as _verify


def _fail_cleanly(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, OSError, RuntimeError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
def main():
    """Conformal out-of-distribution certification toolkit.

    Builds kernel-density safety constraints over a latent space, certifies
    error bounds by Monte-Carlo sampling, and reproduces the bound-validity
    experiments. Seeds default to 0 so casual runs are reproducible.
    """


@main.command()
@click.option("--calibration", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Calibration CSV: header 'dim=<k>' then one row of k floats per point.")
@click.option("--beta", required=True, type=float, help="Significance level in (0, 1).")
@click.option("--kernel", required=True, type=click.Choice(["uniform", "gaussian"]))
@click.option("--bandwidth", type=float, default=None,
              help="Kernel bandwidth; defaults to Scott's rule when omitted.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Predictor snapshot JSON path.")
@_fail_cleanly
def calibrate(calibration, beta, kernel, bandwidth, out):
    """Calibrate a conformal predictor and write its snapshot."""
    cal = load_calibration_csv(calibration)
    spec = KernelSpec(kind=kernel, bandwidth=bandwidth if bandwidth is not None else "scott")
    pred = _calibrate(cal, spec, beta)
    save_predictor(pred, out, calibration_ref=os.path.relpath(os.path.abspath(calibration),
                                                              os.path.dirname(os.path.abspath(out))))
    click.echo(f"threshold {jsonio.format_float(pred.threshold)} (index {pred.threshold_index})")


@main.command()
@click.option("--model", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Latent-model JSON file.")
@click.option("--predictor", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Predictor snapshot JSON (its calibration_ref must resolve).")
@click.option("--n", required=True, type=int, help="Number of Monte-Carlo samples.")
@click.option("--delta", required=True, type=float, help="Confidence parameter in (0, 1).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True,
              help="Round-robin sample partitions; never changes the result.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Report JSON path.")
@_fail_cleanly
def verify(model, predictor, n, delta, seed, workers, out):
    """Run one certification and write the verification report."""
    config = VerificationConfig(
        model=load_model(model),
        predictor=load_predictor(predictor),
        n_samples=n,
        delta=delta,
        stream=SampleStream(seed, 0),
        workers=workers,
    )
    report = _verify(config)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    click.echo(
        f"r {report.violations}  r/N {jsonio.format_float(report.observed_rate)}  "
        f"epsilon {jsonio.format_float(report.epsilon.value)}"
    )


def _echo_bound(name: str, bound: bounds.EpsilonBound):
    suffix = " clamped" if bound.clamped else ""
    click.echo(f"{name} {jsonio.format_float(bound.value)}{suffix}")


@main.command()
@click.option("--n", required=True, type=int)
@click.option("--r", required=True, type=float, help="Violation count (real-valued allowed).")
@click.option("--delta", required=True, type=float)
@click.option("--beta", type=float, default=0.0, show_default=True,
              help="Conformal significance used for the discounted bound.")
@_fail_cleanly
def bound(n, r, delta, beta):
    """Print the closed-form bounds for (N, r, delta[, beta]).

    Lines are '<name> <value>[ clamped]' for the no-violation closed form
    (only when r = 0), the plain Chernoff-style bound, and the
    beta-discounted bound.
    """
    if r == 0:
        _echo_bound("no_violation", bounds.epsilon_no_violations(n, delta))
    _echo_bound("chernoff", bounds.epsilon_chernoff(n, r, delta))
    _echo_bound("adjusted", bounds.epsilon_adjusted(n, r, delta, beta))


@main.command("exact-bound")
@click.option("--n", required=True, type=int)
@click.option("--r", required=True, type=int)
@click.option("--delta", required=True, type=float)
@click.option("--d", type=int, default=1, show_default=True, help="Number of optimization variables.")
@_fail_cleanly
def exact_bound(n, r, delta, d):
    """Print the exact binomial-tail inversion for (N, r, d, delta)."""
    _echo_bound("exact", bounds.exact_epsilon(n, r, d, delta))


@main.command()
@click.option("--predictor", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n", required=True, type=int)
@click.option("--u", type=float, default=1.0, show_default=True, help="Upper bound on the relaxation.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Result JSON path (stdout when omitted).")
@_fail_cleanly
def scenario(predictor, model, n, u, seed, out):
    """Solve the sampled relaxation: the least slack making all constraints feasible."""
    from . import latent as _latent

    mdl = load_model(model)
    pred = load_predictor(predictor)
    samples = _latent.sample(mdl, n, SampleStream(seed, 0))
    result = scenario_relax(pred, samples, upper_bound=u)
    text = jsonio.dumps(result.to_dict(), indent=2)
    if out is None:
        click.echo(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Experiment spec JSON.")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@_fail_cleanly
def experiment(spec_path, out_dir):
    """Run the (N, delta) grid and write table.csv and plot_data.csv."""
    spec = harness.load_spec(spec_path)
    records = harness.run_grid(spec)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "table.csv"), "w", encoding="utf-8") as fh:
        fh.write(harness.emit_table(records))
    with open(os.path.join(out_dir, "plot_data.csv"), "w", encoding="utf-8") as fh:
        fh.write(harness.emit_plot_data(records))
    click.echo(f"wrote {len(records)} trial records to {out_dir}")


@main.command("violation-study")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Experiment spec JSON; the study runs at N = n_grid[0].")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--mode", type=click.Choice([harness.PER_TRIAL, harness.PILOT]),
              default=harness.PER_TRIAL, show_default=True,
              help="Compare each trial against its own bound, or against one pilot-fixed reference.")
@_fail_cleanly
def violation_study(spec_path, out_dir, mode):
    """Run the bound-exceedance study and write violation_stats.csv and trials.csv."""
    spec = harness.load_spec(spec_path)
    stats, records = harness.violation_study_records(spec, mode=mode)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "violation_stats.csv"), "w", encoding="utf-8") as fh:
        fh.write(harness.emit_violation_stats(stats))
    with open(os.path.join(out_dir, "trials.csv"), "w", encoding="utf-8") as fh:
        fh.write(harness.emit_plot_data(records))
    click.echo(f"wrote {len(stats)} delta cells to {out_dir}")


if __name__ == "__main__":
    main()
