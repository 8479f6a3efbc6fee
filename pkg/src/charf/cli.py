"""Command line entry point: ``charf <command>``."""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import evaluation as ev
from .baselines import KnnParams, knn_impute, mode_impute
from .genotype import GenotypeMatrix, format_matrix, load_matrix, write_matrix
from .imputer import charf_impute, suggest_window_size
from .missing import make_trials, write_mask


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def io_options(f):
    f = click.option("--header", is_flag=True, help="Skip the first line of the input file.")(f)
    f = click.option("--delim", default=",", show_default=True, help="Field delimiter.")(f)
    f = click.option("--missing-token", default="NA", show_default=True, help="Token marking a missing cell.")(f)
    return f


def _read(path, delim, missing_token, header) -> GenotypeMatrix:
    return load_matrix(path, missing_token=missing_token, delimiter=delim, header=header)


def _input_or_synth(path, delim, missing_token, header, rows, cols, stay_prob, seed) -> tuple[GenotypeMatrix, str]:
    if path:
        return _read(path, delim, missing_token, header), Path(path).stem
    return ev.markov_genotypes(rows, cols, stay_prob, seed), f"markov_{rows}x{cols}_s{seed}"


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
def main(verbose):
    """Impute missing genotypes with chains of autoreplicative random forests."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--fraction", type=float, required=True)
@click.option("--trials", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@io_options
def simulate(input_path, fraction, trials, seed, out_dir, header, delim, missing_token):
    """Write MCAR-corrupted copies of a complete matrix plus their masks."""
    m = _read(input_path, delim, missing_token, header)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, (corrupted, mask) in enumerate(make_trials(m, fraction, trials, seed)):
        write_matrix(corrupted, out / f"trial_{i}.csv", missing_token, delim)
        write_mask(mask, out / f"trial_{i}.mask.csv")
    click.echo(f"wrote {trials} trials to {out}")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--method", type=click.Choice(["charf", "mode", "knn"]), default="charf", show_default=True)
@click.option("--delta", type=int, default=5, show_default=True)
@click.option("--nu", type=int, default=1, show_default=True)
@click.option("--chains", type=int, default=5, show_default=True)
@click.option("--trees", type=int, default=10, show_default=True)
@click.option("--allow-any-k", is_flag=True, help="Permit more than 5 chains.")
@click.option("--k", "k", type=int, default=10, show_default=True, help="kNN neighbour count.")
@click.option("--weighting", type=click.Choice(["uniform", "inverse-distance"]), default="inverse-distance", show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--tally", "tally_path", type=click.Path(dir_okay=False), help="Write per-cell chain votes (ChARF only).")
@io_options
def impute(input_path, out_path, method, delta, nu, chains, trees, allow_any_k, k, weighting, seed, jobs, tally_path, header, delim, missing_token):
    """Impute every missing cell of a matrix."""
    m = _read(input_path, delim, missing_token, header)
    if method == "charf":
        params = ev.charf_params(delta=delta, nu=nu, chains=chains, trees=trees, seed=seed)
        if allow_any_k:
            params = replace(params, allow_any_k=True)
        imputed, tally = charf_impute(m, params, n_jobs=jobs)
        if tally_path:
            Path(tally_path).write_text(tally.to_csv(), encoding="utf-8")
    elif method == "mode":
        imputed = mode_impute(m)
    else:
        imputed = knn_impute(m, KnnParams(k=k, weighting=weighting))
    write_matrix(imputed, out_path, missing_token, delim)
    click.echo(f"imputed {m.n_missing} cells with {method} -> {out_path}")


@main.command("suggest-delta")
@click.option("--fraction", type=float, required=True)
@click.option("--tau", type=float, required=True)
@click.option("--rule", type=click.Choice(["nearest", "floor"]), default="nearest", show_default=True)
def suggest_delta(fraction, tau, rule):
    """Print the window size for a missing fraction and complete-row target."""
    click.echo(suggest_window_size(fraction, tau, rule))


def _method_specs(names, delta, nu, chains, trees, k, weighting):
    specs = []
    for name in names:
        if name == "charf":
            specs.append(ev.make_method("charf", delta=delta, nu=nu, chains=chains, trees=trees))
        elif name == "knn":
            specs.append(ev.make_method("knn", k=k, weighting=weighting))
        else:
            specs.append(ev.make_method(name))
    return specs


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), help="Defaults to synthetic data.")
@click.option("--methods", default="charf,mode,knn", show_default=True)
@click.option("--fractions", default="0.01,0.05,0.1,0.2,0.3", show_default=True)
@click.option("--trials", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="JSON lines output.")
@click.option("--summary", "summary_path", type=click.Path(dir_okay=False), help="CSV summary output.")
@click.option("--delta", type=int, default=5, show_default=True)
@click.option("--nu", type=int, default=1, show_default=True)
@click.option("--chains", type=int, default=5, show_default=True)
@click.option("--trees", type=int, default=10, show_default=True)
@click.option("--k", "k", type=int, default=10, show_default=True)
@click.option("--weighting", type=click.Choice(["uniform", "inverse-distance"]), default="inverse-distance", show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--rows", type=int, default=200, show_default=True, help="Synthetic rows when no input.")
@click.option("--cols", type=int, default=500, show_default=True, help="Synthetic columns when no input.")
@io_options
def evaluate(input_path, methods, fractions, trials, seed, report_path, summary_path, delta, nu, chains, trees, k, weighting, jobs, rows, cols, header, delim, missing_token):
    """Score imputers on repeated MCAR masks of a complete matrix.

    Native missing cells in the input are left out of every mask and never scored.
    """
    m, dataset_id = _input_or_synth(input_path, delim, missing_token, header, rows, cols, 0.9, seed)
    specs = _method_specs(methods.split(","), delta, nu, chains, trees, k, weighting)
    reports = ev.run_benchmark(
        m, specs, _floats(fractions), trials, seed, dataset_id=dataset_id, jobs=jobs, exclude_missing=m.n_missing > 0
    )
    if report_path:
        ev.write_reports(reports, report_path)
    summary = ev.summary_csv(reports)
    if summary_path:
        Path(summary_path).write_text(summary, encoding="utf-8")
    click.echo(summary, nl=False)


@main.command("grid-search")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), help="Defaults to synthetic data.")
@click.option("--deltas", default="3,5,8,10,15", show_default=True)
@click.option("--nus", default="0,1,3,5,10", show_default=True)
@click.option("--fraction", type=float, default=0.1, show_default=True)
@click.option("--first-cols", type=int, default=1000, show_default=True)
@click.option("--trials", type=int, default=5, show_default=True)
@click.option("--chains", type=int, default=5, show_default=True)
@click.option("--trees", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="JSON lines output, one cell per line.")
@click.option("--rows", type=int, default=200, show_default=True)
@click.option("--cols", type=int, default=500, show_default=True)
@io_options
def grid_search(input_path, deltas, nus, fraction, first_cols, trials, chains, trees, seed, jobs, report_path, rows, cols, header, delim, missing_token):
    """Search window size and stacking depth on the leading columns."""
    m, _ = _input_or_synth(input_path, delim, missing_token, header, rows, cols, 0.9, seed)
    cells, best = ev.grid_search(
        m, _ints(deltas), _ints(nus), fraction, trials, seed, first_cols, chains=chains, trees=trees, jobs=jobs
    )
    lines = [json.dumps({"delta": c.delta, "nu": c.nu, "mean_accuracy": c.mean_accuracy}) for c in cells]
    if report_path:
        Path(report_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    for line in lines:
        click.echo(line)
    click.echo(f"best delta={best.delta} nu={best.nu} accuracy={best.mean_accuracy:.4f}")


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), help="Defaults to synthetic data.")
@click.option("--cols", "col_counts", default="125,250,500", show_default=True)
@click.option("--method", type=click.Choice(["charf", "mode", "knn"]), default="charf", show_default=True)
@click.option("--fraction", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--repeats", type=int, default=1, show_default=True)
@click.option("--rows", type=int, default=200, show_default=True)
@io_options
def bench(input_path, col_counts, method, fraction, seed, repeats, rows, header, delim, missing_token):
    """Time imputation on growing leading-column subsets."""
    counts = _ints(col_counts)
    m, _ = _input_or_synth(input_path, delim, missing_token, header, rows, max(counts), 0.9, seed)
    points = ev.bench_scaling(m, counts, method, fraction, seed, repeats)
    click.echo("n_cols,seconds,ratio")
    for p in points:
        click.echo(f"{p.n_cols},{p.seconds:.4f},{p.ratio:.3f}")
    if len(points) >= 2:
        click.echo(f"power-law exponent: {ev.power_law_exponent(points):.3f}")


@main.command()
@click.option("--rows", type=int, default=200, show_default=True)
@click.option("--cols", type=int, default=500, show_default=True)
@click.option("--stay-prob", type=float, default=0.9, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Defaults to stdout.")
@click.option("--delim", default=",", show_default=True)
def synth(rows, cols, stay_prob, seed, out_path, delim):
    """Generate a complete Markov-correlated genotype matrix."""
    m = ev.markov_genotypes(rows, cols, stay_prob, seed)
    if out_path:
        write_matrix(m, out_path, delimiter=delim)
    else:
        sys.stdout.write(format_matrix(m, delimiter=delim))


if __name__ == "__main__":
    main()
