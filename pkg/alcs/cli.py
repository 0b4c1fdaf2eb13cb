import sys
from collections.abc import Callable
from pathlib import Path
from typing import Literal
import cyclopts
from loguru import logger as log
from rich import print as rprint
from rich.table import Table
from alcs.clustering import FpsClusterer, cluster_report, fps_cluster
from alcs.data import load_dataset, normalize, parse_synthetic, save_dataset
from alcs.errors import ConfigError, DataError
from alcs.evaluation import METRICS, ExperimentError, average_ranks, run_experiment, summarize
from alcs.reports import (
    CLUSTERS_FILE,
    CONFIG_FILE,
    QUERIES_FILE,
    QUERY_ROWS_FILE,
    RANKS_FILE,
    REPORTS_FILE,
    SUMMARY_FILE,
    TIMINGS_FILE,
    query_rows,
    write_json,
    write_model,
    write_reports,
    write_table,
    write_timings,
)
from alcs.schema import Dataset
from alcs.selection import QueryStrategy, query_report, select_queries
from alcs.settings import RunConfig, resolve_run_config
from alcs.utils import round_half_even


app = cyclopts.App(help="Clustering-based active learning with diversity exploration.")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4

Normalize = Literal["none", "min-max", "z-score"]


@app.command()
def cluster(
    data: Path | None = None,
    *,
    synthetic: str | None = None,
    label_col: str | None = None,
    normalize: Normalize | None = None,
    tau: float | None = None,
    seed: int | None = None,
    config: Path | None = None,
    out: Path | None = None,
    verbose: bool = False,
) -> int:
    """
    Cluster a dataset and write the cluster summary to `clusters.json`.

    :param data: Dataset CSV file
    :param synthetic: Synthetic dataset spec blobs:<c>:<n>:<overlap>
    :param label_col: Label column name or zero-based index
    :param normalize: Feature normalization
    :param tau: Peak search stop threshold
    :param seed: Seed of the synthetic generator
    :param config: TOML or JSON config file
    :param out: Output directory
    :param verbose: Log progress to stderr
    """
    flags = dict(
        data=[data] if data else None,
        synthetic=[synthetic] if synthetic else None,
        label_col=label_col,
        normalize=normalize,
        tau=tau,
        seeds=[seed] if seed is not None else None,
        out_dir=out,
    )
    return guarded(cmd_cluster, config, flags, verbose)


@app.command()
def select(
    data: Path | None = None,
    *,
    synthetic: str | None = None,
    label_col: str | None = None,
    normalize: Normalize | None = None,
    budget: float | None = None,
    rho: float | None = None,
    tau: float | None = None,
    seed: int | None = None,
    config: Path | None = None,
    out: Path | None = None,
    verbose: bool = False,
) -> int:
    """
    Select samples to label from a whole dataset and write `queries.json` and `queries.csv`.

    :param data: Dataset CSV file
    :param synthetic: Synthetic dataset spec blobs:<c>:<n>:<overlap>
    :param label_col: Label column name or zero-based index
    :param normalize: Feature normalization
    :param budget: Fraction of the pool to query
    :param rho: Boundary share of every cluster budget
    :param tau: Peak search stop threshold
    :param seed: Seed of the synthetic generator
    :param config: TOML or JSON config file
    :param out: Output directory
    :param verbose: Log progress to stderr
    """
    flags = dict(
        data=[data] if data else None,
        synthetic=[synthetic] if synthetic else None,
        label_col=label_col,
        normalize=normalize,
        budget_fraction=budget,
        rho=rho,
        tau=tau,
        seeds=[seed] if seed is not None else None,
        out_dir=out,
    )
    return guarded(cmd_select, config, flags, verbose)


@app.command()
def bench(
    data: list[Path] | None = None,
    *,
    synthetic: list[str] | None = None,
    label_col: str | None = None,
    normalize: Normalize | None = None,
    budget: float | None = None,
    rho: float | None = None,
    strategies: list[str] | None = None,
    seeds: list[int] | None = None,
    knn_k: int | None = None,
    tau: float | None = None,
    workers: int | None = None,
    config: Path | None = None,
    out: Path | None = None,
    verbose: bool = False,
) -> int:
    """
    Benchmark sampling strategies and write reports, a summary table and average ranks.

    :param data: Dataset CSV files
    :param synthetic: Synthetic dataset specs blobs:<c>:<n>:<overlap>
    :param label_col: Label column name or zero-based index
    :param normalize: Feature normalization
    :param budget: Fraction of the pool to query
    :param rho: Boundary share of every cluster budget
    :param strategies: Strategies to compare (alcs, center, random)
    :param seeds: One benchmark cell per seed and strategy
    :param knn_k: Neighbors of the evaluation classifier
    :param tau: Peak search stop threshold
    :param workers: Cells evaluated concurrently
    :param config: TOML or JSON config file
    :param out: Output directory
    :param verbose: Log progress to stderr
    """
    flags = dict(
        data=data,
        synthetic=synthetic,
        label_col=label_col,
        normalize=normalize,
        budget_fraction=budget,
        rho=rho,
        strategies=strategies,
        seeds=seeds,
        knn_k=knn_k,
        tau=tau,
        workers=workers,
        out_dir=out,
    )
    return guarded(cmd_bench, config, flags, verbose)


@app.command()
def synth(spec: str, out: Path, *, seed: int = 0) -> int:
    """
    Write a synthetic dataset as CSV.

    :param spec: Generator spec blobs:<c>:<n>:<overlap>
    :param out: Destination CSV file
    :param seed: Seed of the generator
    """
    try:
        path = save_dataset(parse_synthetic(spec, seed=seed), out)
    except DataError as e:
        rprint(f"[bold red]Error:[/bold red] {str(e)}")
        return EXIT_DATA
    rprint(f"Wrote {path}")
    return EXIT_OK


def guarded(command, config, flags, verbose=False):
    # type: (Callable, Path|None, dict, bool) -> int
    """
    Resolve the run configuration, run a command and map failures to exit codes.

    :return: 0 on success, 2 on configuration errors, 3 on data errors, 4 on runtime failures
    """
    configure_logging(verbose)
    try:
        command(resolve_run_config(config, flags))
    except ConfigError as e:
        rprint(f"[bold red]Configuration error:[/bold red] {str(e)}")
        return EXIT_CONFIG
    except DataError as e:
        rprint(f"[bold red]Data error:[/bold red] {str(e)}")
        return EXIT_DATA
    except Exception as e:
        log.exception("Run failed")
        rprint(f"[bold red]Error:[/bold red] {str(e)}")
        return EXIT_RUNTIME
    return EXIT_OK


def configure_logging(verbose):
    # type: (bool) -> None
    log.remove()
    log.add(sys.stderr, level="DEBUG" if verbose else "WARNING")


def load_datasets(opts):
    # type: (RunConfig) -> list[Dataset]
    """Load, generate and normalize every dataset source of a run."""
    datasets = [load_dataset(path, opts.label_col) for path in opts.data]
    datasets += [parse_synthetic(spec, seed=opts.seeds[0]) for spec in opts.synthetic]
    return [normalize(ds, opts.normalize) for ds in datasets]


def single_dataset(opts):
    # type: (RunConfig) -> Dataset
    datasets = load_datasets(opts)
    if len(datasets) > 1:
        raise ConfigError("This command takes a single dataset")
    return datasets[0]


def cmd_cluster(opts):
    # type: (RunConfig) -> Path
    """Cluster the dataset of a run and write its cluster report."""
    ds = single_dataset(opts)
    model = fps_cluster(ds.features_view(), params=FpsClusterer.from_settings(opts))
    report = cluster_report(model, ds.name, config=opts.model_dump(mode="json"))
    path = write_model(report, opts.out_dir / CLUSTERS_FILE)
    table = Table(title=f"{ds.name}: {report.n_clusters} clusters")
    table.add_column("Cluster", style="cyan")
    table.add_column("Size", style="magenta")
    table.add_column("Center id", style="green")
    for c in report.clusters:
        table.add_row(str(c.index), str(c.size), str(c.center_id))
    rprint(table)
    return path


def cmd_select(opts):
    # type: (RunConfig) -> Path
    """Select queries from the whole dataset of a run and write the query report."""
    ds = single_dataset(opts)
    n_q = max(1, round_half_even(opts.budget_fraction * ds.n_samples))
    selection = select_queries(ds.features_view(), n_q, strategy=QueryStrategy.from_settings(opts))
    report = query_report(selection, ds.name, opts)
    path = write_model(report, opts.out_dir / QUERIES_FILE)
    write_table(query_rows(report), opts.out_dir / QUERY_ROWS_FILE)
    rprint(f"{ds.name}: selected {report.n_q} of {report.n_pool} samples -> {path}")
    return path


def cmd_bench(opts):
    # type: (RunConfig) -> Path
    """Run every benchmark cell and write reports, summary and rank tables."""
    reports, failures = [], []
    for ds in load_datasets(opts):
        try:
            reports += run_experiment(ds, opts)
        except ExperimentError as e:
            reports += e.reports
            failures += e.failures
    out = opts.out_dir
    write_json(opts.model_dump(mode="json"), out / CONFIG_FILE)
    path = write_reports(reports, out / REPORTS_FILE)
    write_timings(reports, out / TIMINGS_FILE)
    if failures:
        raise ExperimentError(reports, failures)
    summary = summarize(reports)
    ranks = {m: average_ranks(reports, m).model_dump() for m in METRICS}
    write_json(ranks, out / RANKS_FILE)
    write_table(summary, out / SUMMARY_FILE)
    table = Table(title="Benchmark summary")
    for column in ["dataset", "strategy", "accuracy_mean", "macro_f1_mean", "accuracy_rank"]:
        table.add_column(column)
    for row in summary.itertuples():
        table.add_row(
            row.dataset,
            row.strategy,
            f"{row.accuracy_mean:.4f}",
            f"{row.macro_f1_mean:.4f}",
            f"{row.accuracy_rank:.2f}",
        )
    rprint(table)
    return path


def main(tokens=None):
    # type: (list[str]|None) -> None
    """Console entry point."""
    try:
        code = app(tokens, exit_on_error=False)
    except cyclopts.CycloptsError:
        code = EXIT_CONFIG
    sys.exit(code or EXIT_OK)


if __name__ == "__main__":
    main()
