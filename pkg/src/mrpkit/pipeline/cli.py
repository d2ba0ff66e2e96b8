"""Command-line front end for the full workflow.

Exit codes: 0 success, 2 usage error, 3 input/validation failure, 4 invalid
model spec, 5 sampling failure, 6 missing upstream artifact, 1 anything else.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from mrpkit import __version__
from mrpkit.errors import ArtifactError, InputError, SamplingError, SpecError
from mrpkit.pipeline import stages

EXIT_CODES = {
    InputError: 3,
    SpecError: 4,
    SamplingError: 5,
    ArtifactError: 6,
}


def _run(func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except (InputError, SpecError, SamplingError, ArtifactError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CODES[type(exc)])


def _default_out() -> str:
    return os.environ.get("MRP_RUN_DIR", "mrp_run")


out_option = click.option(
    "--out", default=None, help="run directory (default: $MRP_RUN_DIR or ./mrp_run)"
)


@click.group()
@click.version_option(version=__version__)
def main():
    """Multilevel-regression-and-poststratification surveillance pipeline."""


@main.command()
@click.option("--input", "records", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--acs", required=True, type=click.Path(exists=True, dir_okay=False),
              help="population counts per cell")
@click.option("--crosswalk", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--tracts", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", type=click.Path(exists=True, dir_okay=False),
              help="schema config JSON")
@click.option("--seed", default=0, show_default=True, type=int)
@out_option
def preprocess(records, acs, crosswalk, tracts, config, seed, out):
    """Parse, impute, aggregate, filter, link, and cross-classify the inputs."""
    out = out or _default_out()
    artifacts = _run(
        stages.stage_preprocess,
        records_path=records,
        acs_path=acs,
        crosswalk_path=crosswalk,
        tracts_path=tracts,
        config_path=config,
        seed=seed,
        run_dir=out,
    )
    click.echo(f"preprocess: {len(artifacts)} artifacts under {out}/preprocess")


@main.command()
@out_option
def describe(out):
    """Weekly positivity, county extremes, demographic comparison."""
    out = out or _default_out()
    artifacts = _run(stages.stage_describe, out)
    click.echo(f"describe: {len(artifacts)} artifacts under {out}/describe")


@main.command()
@click.option("--spec", "specs", multiple=True, required=True,
              type=click.Path(exists=True, dir_okay=False), help="model spec JSON (repeatable)")
@click.option("--seed", default=None, type=int, help="override the run seed")
@click.option("--chains", default=None, type=int)
@click.option("--iters", default=None, type=int, help="post-warmup draws per chain")
@click.option("--warmup", default=None, type=int)
@out_option
def fit(specs, seed, chains, iters, warmup, out):
    """Fit one or more model specs with the built-in gradient sampler."""
    out = out or _default_out()
    _run(
        stages.stage_fit,
        out,
        spec_paths=list(specs),
        seed=seed,
        chains=chains,
        sampling_iters=iters,
        warmup_iters=warmup,
        progress=_echo_progress,
    )
    for label in stages.fit_labels(out):
        for flag in stages.RunManifest(Path(out)).doc["stages"]["fit"]["flags"].get(label, []):
            click.echo(f"[{label}] {flag}", err=True)
    click.echo(f"fit: draws and summaries under {out}/fit")


def _echo_progress(label, chain, phase, iteration, total):
    if iteration % 500 == 0:
        click.echo(f"[{label}] chain {chain} {phase} {iteration}/{total}", err=True)


@main.command()
@click.option("--seed", default=None, type=int)
@click.option("--reps", default=10, show_default=True, type=int,
              help="posterior predictive replicates")
@out_option
def diagnose(seed, reps, out):
    """LOO cross-validation, model comparison, posterior predictive checks."""
    out = out or _default_out()
    _run(stages.stage_diagnose, out, seed=seed, n_reps=reps)
    click.echo(f"diagnose: artifacts under {out}/diagnose")


@main.command()
@click.option("--grouping", "groupings", multiple=True,
              help="overall, week, sex, race, age, county, or crossed like race:week "
                   "(repeatable; default standard set)")
@click.option("--seed", default=None, type=int)
@click.option("--keep-draws", is_flag=True,
              help="also dump per-draw group estimates for external validation plots")
@out_option
def poststratify(groupings, seed, keep_draws, out):
    """Population-weighted incidence estimates for the requested groupings."""
    out = out or _default_out()
    groupings = groupings or stages.DEFAULT_GROUPINGS
    _run(stages.stage_poststratify, out, groupings=groupings, seed=seed, keep_draws=keep_draws)
    click.echo(f"poststratify: estimates under {out}/poststratify")


@main.command()
@out_option
def report(out):
    """Bundle all results into report/report.json plus plot data files."""
    out = out or _default_out()
    _run(stages.stage_report, out)
    click.echo(f"report: bundle under {out}/report")


@main.command()
@click.option("--out", default="fixtures/synthetic", show_default=True)
@click.option("--seed", default=20220321, show_default=True, type=int)
@click.option("--records", default=6000, show_default=True, type=int)
def fixture(out, seed, records):
    """Generate the synthetic raw-input bundle used for demos and tests."""
    from mrpkit.synthetic import make_input_bundle

    paths = make_input_bundle(out, seed=seed, n_records=records)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


if __name__ == "__main__":
    main()
