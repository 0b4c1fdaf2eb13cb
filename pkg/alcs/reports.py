"""Report serialization. Every file is written to a temporary sibling and renamed into place."""

import json
from pathlib import Path
import pandas as pd
from pydantic import BaseModel
from alcs.schema import ExperimentReport, QueryReport
from alcs.utils import atomic_write_text


REPORTS_FILE = "reports.jsonl"
TIMINGS_FILE = "timings.jsonl"
SUMMARY_FILE = "summary.csv"
RANKS_FILE = "ranks.json"
CONFIG_FILE = "config.json"
CLUSTERS_FILE = "clusters.json"
QUERIES_FILE = "queries.json"
QUERY_ROWS_FILE = "queries.csv"


def write_model(model, path):
    # type: (BaseModel, str|Path) -> Path
    """Write a pydantic model as indented JSON."""
    return atomic_write_text(path, model.model_dump_json(indent=2) + "\n")


def write_json(data, path):
    # type: (dict|list, str|Path) -> Path
    return atomic_write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_reports(reports, path):
    # type: (list[ExperimentReport], str|Path) -> Path
    """
    Write experiment reports as JSON lines ordered by (dataset, strategy, seed).

    Wall times are left out so that identical runs produce identical files.
    """
    ordered = sorted(reports, key=lambda r: (r.dataset, r.strategy, r.seed))
    lines = [r.model_dump_json(exclude={"wall_time"}) for r in ordered]
    return atomic_write_text(path, "".join(f"{line}\n" for line in lines))


def write_timings(reports, path):
    # type: (list[ExperimentReport], str|Path) -> Path
    ordered = sorted(reports, key=lambda r: (r.dataset, r.strategy, r.seed))
    rows = [r.model_dump_json(include={"dataset", "strategy", "seed", "wall_time"}) for r in ordered]
    return atomic_write_text(path, "".join(f"{row}\n" for row in rows))


def read_reports(path):
    # type: (str|Path) -> list[ExperimentReport]
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ExperimentReport.model_validate_json(line) for line in lines if line.strip()]


def write_table(df, path):
    # type: (pd.DataFrame, str|Path) -> Path
    return atomic_write_text(path, df.to_csv(index=False, lineterminator="\n", float_format="%.6f"))


def query_rows(report):
    # type: (QueryReport) -> pd.DataFrame
    """Provenance rows (id, cluster, pass, priority) of a selection."""
    return pd.DataFrame(
        [
            {"id": q.id, "cluster": q.cluster, "pass": q.kind, "priority": q.priority}
            for q in report.queries
        ],
        columns=["id", "cluster", "pass", "priority"],
    )
