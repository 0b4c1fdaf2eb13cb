"""Simulated oracle, k-NN evaluation classifier, metrics, baselines and benchmark protocol."""

from concurrent.futures import ThreadPoolExecutor
from itertools import repeat
import numpy as np
import pandas as pd
from loguru import logger as log
from pydantic import BaseModel, Field
from scipy.stats import rankdata
from alcs.data import pairwise_distances, split_pool
from alcs.errors import AlcsError, DataError, OracleError, SelectionError
from alcs.schema import Dataset, ExperimentReport, LabeledSet, QueryRecord, QuerySet, RankTable
from alcs.selection import QueryStrategy, select_queries
from alcs.settings import AlcsSettings, al_opts
from alcs.utils import round_half_even, timer


METRICS = ("accuracy", "macro_f1")


class Oracle:
    """Label source for the unlabeled pool. Every answered id leaves the pool."""

    def __init__(self, dataset, pool_ids):
        # type: (Dataset, np.ndarray|list[int]) -> None
        if dataset.labels is None:
            raise DataError(f"Dataset {dataset.name} has no labels to answer queries")
        self._dataset = dataset
        self._pool = {int(i) for i in pool_ids}
        self.queries = 0

    def query(self, ids):
        # type: (list[int]) -> list[tuple[int, str]]
        outside = [i for i in ids if i not in self._pool]
        if outside:
            raise OracleError(f"Ids {outside} are not in the unlabeled pool")
        if len(set(ids)) != len(ids):
            raise OracleError("Duplicate ids in label query")
        self._pool.difference_update(ids)
        self.queries += len(ids)
        return [(int(i), self._dataset.sample(i).label) for i in ids]


def query_labels(oracle, ids):
    # type: (Oracle, list[int]) -> list[tuple[int, str]]
    """
    Ask the oracle for the true labels of pool samples.

    :param oracle: Label source
    :param ids: Sample ids from the unlabeled pool
    :return: (id, label) pairs in query order
    """
    return oracle.query([int(i) for i in ids])


class KnnClassifier(BaseModel):
    """
    k-nearest-neighbor majority vote.

    Distance ties go to the lower training id, vote ties to the smallest class label.
    """

    k: int = Field(..., ge=1, description="Number of neighbors")
    train: LabeledSet = Field(..., description="Training samples")

    def predict(self, features):
        # type: (np.ndarray) -> np.ndarray
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        d = pairwise_distances(x, self.train.features)
        predicted = []
        for row in d:
            nearest = np.lexsort((self.train.ids, row))[: self.k]
            classes, votes = np.unique(self.train.labels[nearest], return_counts=True)
            predicted.append(classes[np.argmax(votes)])
        return np.array(predicted, dtype=str)


def train_knn(labeled, k=None):
    # type: (LabeledSet, int|None) -> KnnClassifier
    """
    Fit a k-NN classifier on labeled samples.

    :param labeled: Training samples
    :param k: Number of neighbors (defaults to settings), at most the number of samples
    """
    k = k or al_opts.knn_k
    if len(labeled) == 0:
        raise DataError("Cannot train a classifier on an empty training set")
    if k > len(labeled):
        raise ValueError(f"k={k} exceeds the {len(labeled)} training samples")
    return KnnClassifier(k=k, train=labeled)


def scores(truth, predicted):
    # type: (np.ndarray, np.ndarray) -> tuple[float, float]
    """Accuracy and macro-F1 over the union of true and predicted classes."""
    truth, predicted = np.asarray(truth, dtype=str), np.asarray(predicted, dtype=str)
    accuracy = float(np.mean(truth == predicted))
    f1 = []
    for cls in np.union1d(truth, predicted):
        tp = np.sum((predicted == cls) & (truth == cls))
        fp = np.sum((predicted == cls) & (truth != cls))
        fn = np.sum((predicted != cls) & (truth == cls))
        f1.append(0.0 if tp == 0 else 2.0 * tp / (2.0 * tp + fp + fn))
    return accuracy, float(np.mean(f1))


def evaluate(clf, test):
    # type: (KnnClassifier, LabeledSet) -> tuple[float, float]
    """
    Score a classifier on a labeled test set.

    :return: (accuracy, macro_f1)
    """
    if len(test) == 0:
        raise DataError("Cannot evaluate on an empty test set")
    return scores(test.labels, clf.predict(test.features))


def baseline_random(pool_ids, n_q, seed):
    # type: (np.ndarray|list[int], int, int) -> QuerySet
    """Uniform sample of `n_q` pool ids without replacement."""
    pool = np.asarray(pool_ids, dtype=int)
    if n_q > len(pool):
        raise SelectionError(f"Query budget {n_q} exceeds the pool size {len(pool)}")
    drawn = np.random.default_rng(seed).choice(pool, size=n_q, replace=False)
    return QuerySet(records=[QueryRecord(id=int(i), kind="random") for i in drawn])


def rank_table(values, metric="accuracy", higher_is_better=True):
    # type: (dict[str, dict[str, float]], str, bool) -> RankTable
    """
    Rank strategies per dataset (1 = best, mid-ranks for ties) and average over datasets.

    :param values: Metric value per dataset and strategy
    :param metric: Metric name recorded in the table
    :param higher_is_better: Rank 1 goes to the largest value if True
    """
    if not values:
        raise ValueError("No results to rank")
    strategies = sorted({s for row in values.values() for s in row})
    per_dataset = {}
    for dataset, row in sorted(values.items()):
        missing = [s for s in strategies if s not in row]
        if missing:
            raise ValueError(f"Dataset {dataset!r} has no result for {missing}")
        v = np.array([row[s] for s in strategies], dtype=np.float64)
        ranks = rankdata(-v if higher_is_better else v, method="average")
        per_dataset[dataset] = dict(zip(strategies, ranks.tolist()))
    average = {s: float(np.mean([r[s] for r in per_dataset.values()])) for s in strategies}
    return RankTable(
        metric=metric, higher_is_better=higher_is_better, per_dataset=per_dataset, average=average
    )


def average_ranks(reports, metric="accuracy"):
    # type: (list[ExperimentReport], str) -> RankTable
    """Average rank per strategy from seed-averaged report metrics."""
    if metric not in METRICS:
        raise ValueError(f"Unknown metric {metric!r}")
    df = pd.DataFrame([r.model_dump() for r in reports])
    means = df.groupby(["dataset", "strategy"])[metric].mean()
    values = {}
    for (dataset, strategy), value in means.items():
        values.setdefault(dataset, {})[strategy] = float(value)
    return rank_table(values, metric=metric)


def summarize(reports):
    # type: (list[ExperimentReport]) -> pd.DataFrame
    """Mean and standard deviation per dataset and strategy plus average ranks."""
    df = pd.DataFrame([r.model_dump() for r in reports])
    summary = (
        df.groupby(["dataset", "strategy"])
        .agg(
            runs=("seed", "count"),
            accuracy_mean=("accuracy", "mean"),
            accuracy_sd=("accuracy", "std"),
            macro_f1_mean=("macro_f1", "mean"),
            macro_f1_sd=("macro_f1", "std"),
        )
        .reset_index()
    )
    for metric in METRICS:
        table = average_ranks(reports, metric)
        summary[f"{metric}_rank"] = summary["strategy"].map(table.average)
    return summary.fillna(0.0)


class CellFailure(BaseModel):
    dataset: str = Field(..., description="Dataset name")
    strategy: str = Field(..., description="Sampling strategy")
    seed: int = Field(..., description="Seed of the cell")
    error: str = Field(..., description="Error message")


class ExperimentError(AlcsError):
    """One or more benchmark cells failed."""

    def __init__(self, reports, failures):
        # type: (list[ExperimentReport], list[CellFailure]) -> None
        self.reports = reports
        self.failures = failures
        cells = ", ".join(f"{f.strategy}/{f.seed}" for f in failures)
        super().__init__(f"{len(failures)} benchmark cells failed: {cells}")


def run_cell(ds, strategy, seed, opts=None):
    # type: (Dataset, str, int, AlcsSettings|None) -> ExperimentReport
    """
    Run one (strategy, seed) cell: split, select, query, train and evaluate.

    :param ds: Normalized dataset with labels
    :param strategy: "alcs", "center" (rho = 0) or "random"
    :param seed: Seed of the split and of random sampling
    :param opts: Settings (defaults to `al_opts`)
    """
    opts = opts or al_opts
    if ds.labels is None:
        raise DataError(f"Dataset {ds.name} has no labels to evaluate against")
    with timer(f"{ds.name}/{strategy}/{seed} finished in") as t:
        split = split_pool(ds, seed, opts.test_fraction)
        pool = split.unlabeled_ids
        n_q = max(1, round_half_even(opts.budget_fraction * len(pool)))
        clusters = None
        if strategy == "random":
            queries = baseline_random(pool, n_q, seed)
        else:
            rho = opts.rho if strategy == "alcs" else 0.0
            selector = QueryStrategy.from_settings(opts, rho)
            model, _, queries = select_queries(
                ds.features_view(pool), n_q, ids=pool, strategy=selector
            )
            clusters = model.n_clusters
        oracle = Oracle(ds, pool)
        answers = dict(query_labels(oracle, queries.ids))
        split = split.with_labeled(list(answers))
        ids = split.labeled_ids
        labeled = LabeledSet(
            ids=ids, features=ds.features[ids], labels=np.array([answers[int(i)] for i in ids])
        )
        clf = train_knn(labeled, min(opts.knn_k, len(labeled)))
        test_ids = split.test_ids
        test = LabeledSet(
            ids=test_ids, features=ds.features[test_ids], labels=ds.labels[test_ids]
        )
        accuracy, macro_f1 = evaluate(clf, test)
    if oracle.queries != n_q:
        raise OracleError(f"Oracle answered {oracle.queries} queries for a budget of {n_q}")
    log.info(f"{ds.name}/{strategy}/{seed}: acc={accuracy:.4f} f1={macro_f1:.4f}")
    return ExperimentReport(
        dataset=ds.name,
        strategy=strategy,
        seed=seed,
        n_q=n_q,
        budget_fraction=opts.budget_fraction,
        n_pool=len(pool),
        n_test=len(split.test_ids),
        stratified=split.stratified,
        accuracy=accuracy,
        macro_f1=macro_f1,
        clusters_found=clusters,
        oracle_queries=oracle.queries,
        wall_time=t.elapsed,
        config=opts.model_dump(mode="json"),
    )


def run_experiment(ds, opts=None):
    # type: (Dataset, AlcsSettings|None) -> list[ExperimentReport]
    """
    Run every (strategy, seed) cell on a dataset.

    :param ds: Normalized dataset with labels
    :param opts: Settings with strategies, seeds, budget and classifier k
    :return: Reports ordered by strategy then seed
    :raises ExperimentError: If any cell failed (carries the successful reports)
    """
    opts = opts or al_opts
    cells = [(s, seed) for s in opts.strategies for seed in opts.seeds]
    strategies, seeds = [s for s, _ in cells], [seed for _, seed in cells]
    log.info(f"{ds.name}: running {len(cells)} cells with {opts.workers} workers")
    with ThreadPoolExecutor(max_workers=opts.workers) as pool:
        outcomes = list(pool.map(guarded_cell, repeat(ds), strategies, seeds, repeat(opts)))
    reports = [o for o in outcomes if isinstance(o, ExperimentReport)]
    failures = [o for o in outcomes if isinstance(o, CellFailure)]
    if failures:
        raise ExperimentError(reports, failures)
    return reports


def guarded_cell(ds, strategy, seed, opts):
    # type: (Dataset, str, int, AlcsSettings) -> ExperimentReport|CellFailure
    """Run a cell and turn its error into a failure record."""
    try:
        return run_cell(ds, strategy, seed, opts)
    except (AlcsError, ValueError) as e:
        log.error(f"{ds.name}/{strategy}/{seed} failed: {e}")
        return CellFailure(dataset=ds.name, strategy=strategy, seed=seed, error=str(e))
