"""Dataset ingestion, normalization, distances and pool bookkeeping."""

import re
from pathlib import Path
import numpy as np
import pandas as pd
from loguru import logger as log
from scipy.spatial.distance import cdist
from alcs.errors import DataError
from alcs.schema import Dataset, PoolSplit
from alcs.utils import apportion, atomic_write_text, round_half_even, timer


BLOCK_ROWS = 1024


def load_dataset(path, label_col="-1", name=None):
    # type: (str|Path, str|int, str|None) -> Dataset
    """
    Load a numeric CSV file with one label column.

    The first row is treated as a header when it names the label column or one of its feature
    cells is not a number.

    :param path: CSV file path
    :param label_col: Label column as header name or zero-based index (negative counts from end)
    :param name: Dataset name (defaults to the file stem)
    :return: Dataset with float features and string labels
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Dataset file not found: {path}")
    try:
        raw = pd.read_csv(
            path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=False
        )
    except pd.errors.EmptyDataError as e:
        raise DataError(f"Dataset file is empty: {path}") from e
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        where = f"row {match.group(1)}" if match else "unknown row"
        raise DataError(f"Malformed {where} in {path.name}: {e}") from e

    short = raw.isna().any(axis=1).to_numpy()
    blank = raw.isna().all(axis=1).to_numpy() | (raw == "").all(axis=1).to_numpy()
    bad = short & ~blank
    if bad.any():
        line = int(np.flatnonzero(bad)[0]) + 1
        raise DataError(
            f"Malformed row {line} in {path.name}: expected {raw.shape[1]} columns"
        )
    lines = np.flatnonzero(~blank) + 1
    raw = raw[~blank].reset_index(drop=True)
    if raw.empty:
        raise DataError(f"Dataset file is empty: {path}")

    first = raw.iloc[0].str.strip()
    has_header = is_header(first.tolist(), label_col)
    header = first.tolist() if has_header else [f"x{i}" for i in range(raw.shape[1])]
    if has_header:
        raw, lines = raw.iloc[1:].reset_index(drop=True), lines[1:]
    if raw.empty:
        raise DataError(f"Dataset file {path.name} has a header but no rows")

    col = resolve_column(header, label_col)
    feature_cols = [i for i in range(raw.shape[1]) if i != col]
    if not feature_cols:
        raise DataError(f"Dataset file {path.name} has no feature columns")
    cells = raw[feature_cols].apply(lambda s: s.str.strip())
    values = cells.apply(pd.to_numeric, errors="coerce")
    invalid = values.isna().to_numpy()
    if invalid.any():
        r, c = np.argwhere(invalid)[0]
        cell = cells.iat[r, c]
        what = "Missing value" if cell == "" else f"Non-numeric feature {cell!r}"
        raise DataError(f"{what} at row {lines[r]}, column {header[feature_cols[c]]!r}")

    ds = Dataset(
        name=name or path.stem,
        features=values.to_numpy(dtype=np.float64),
        labels=raw[col].str.strip().to_numpy(dtype=str),
        feature_names=[header[i] for i in feature_cols],
    )
    log.info(
        f"Loaded {ds.name}: {ds.n_samples} samples, {ds.n_features} features, "
        f"{len(ds.class_set)} classes"
    )
    return ds


def is_header(first, label_col):
    # type: (list[str], str|int) -> bool
    """Check whether a first CSV row names the label column or holds a non-numeric feature."""
    if not re.fullmatch(r"-?\d+", str(label_col).strip()):
        return label_col in first
    col = resolve_column(first, int(label_col))
    cells = pd.Series([c for i, c in enumerate(first) if i != col and c], dtype=str)
    return bool(pd.to_numeric(cells, errors="coerce").isna().any())


def resolve_column(header, label_col):
    # type: (list[str], str|int) -> int
    """Resolve a label column name or (possibly negative) index to a positive index."""
    if isinstance(label_col, str) and label_col in header:
        return header.index(label_col)
    try:
        idx = int(label_col)
    except (TypeError, ValueError):
        raise DataError(f"Label column {label_col!r} not found in header {header}")
    if not -len(header) <= idx < len(header):
        raise DataError(f"Label column index {idx} out of range for {len(header)} columns")
    return idx % len(header)


def save_dataset(ds, path):
    # type: (Dataset, str|Path) -> Path
    """Write a dataset as CSV with header `x0..x{d-1},label`."""
    names = ds.feature_names or [f"x{i}" for i in range(ds.n_features)]
    df = pd.DataFrame(ds.features, columns=names)
    if ds.labels is not None:
        df["label"] = ds.labels
    return atomic_write_text(path, df.to_csv(index=False, lineterminator="\n"))


def normalize(ds, method="min-max"):
    # type: (Dataset, str) -> Dataset
    """
    Rescale every feature column. Constant columns map to 0.

    :param ds: Dataset to normalize
    :param method: "min-max" maps to [0, 1], "z-score" to mean 0 and population sd 1
    :return: New dataset with `normalization` set to the method
    """
    if method == "none":
        return ds
    if ds.n_samples < 2:
        raise DataError("Normalization needs at least 2 samples")
    x = ds.features
    if method == "min-max":
        lo, span = x.min(axis=0), np.ptp(x, axis=0)
        scaled = np.divide(x - lo, span, out=np.zeros_like(x), where=span > 0)
    elif method == "z-score":
        mu, sd = x.mean(axis=0), x.std(axis=0)
        scaled = np.divide(x - mu, sd, out=np.zeros_like(x), where=sd > 0)
    else:
        raise ValueError(f"Unknown normalization {method!r}")
    return Dataset(
        name=ds.name,
        features=scaled,
        labels=ds.labels,
        feature_names=ds.feature_names,
        normalization=method,
    )


def distance(a, b):
    # type: (np.ndarray|list[float], np.ndarray|list[float]) -> float
    """Euclidean distance between two vectors of equal dimension."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"Dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def pairwise_distances(x, y=None):
    # type: (np.ndarray, np.ndarray|None) -> np.ndarray
    """Euclidean distance matrix between the rows of x and y (x itself if omitted)."""
    return cdist(x, x if y is None else y, metric="euclidean")


def row_blocks(n, size=BLOCK_ROWS):
    # type: (int, int) -> list[slice]
    """Consecutive row slices used to bound the memory of n x n computations."""
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]


def mean_pairwise_distance(x):
    # type: (np.ndarray) -> float
    """Mean Euclidean distance over all ordered pairs of distinct rows."""
    n = len(x)
    if n < 2:
        return 0.0
    total = sum(pairwise_distances(x[rows], x).sum() for rows in row_blocks(n))
    return float(total / (n * (n - 1)))


def mean_knn_distance(x, k):
    # type: (np.ndarray, int) -> float
    """
    Mean over all rows of the mean distance to their k nearest other rows.

    :param x: Feature rows (at least 2)
    :param k: Number of neighbors, 1 <= k <= len(x) - 1
    :return: Average k-nearest-neighbor distance
    """
    n = len(x)
    if n < 2:
        return 0.0
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} must lie in [1, {n - 1}]")
    means = []
    for rows in row_blocks(n):
        d = pairwise_distances(x[rows], x)
        d[np.arange(d.shape[0]), np.arange(rows.start, rows.stop)] = np.inf
        nearest = np.partition(d, k - 1, axis=1)[:, :k]
        means.append(nearest.mean(axis=1))
    return float(np.concatenate(means).mean())


def split_pool(ds, seed, test_fraction=0.3):
    # type: (Dataset, int, float) -> PoolSplit
    """
    Draw a held-out test split; every other sample forms the unlabeled pool.

    Stratified by class when every class has at least 2 members.

    :param ds: Dataset to split
    :param seed: Seed of the permutation
    :param test_fraction: Fraction of samples held out for testing
    :return: PoolSplit with an empty labeled set
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = ds.n_samples
    n_test = round_half_even(n * test_fraction)
    if n_test < 2 or n - n_test < 2:
        raise DataError(
            f"Dataset of {n} samples too small for test_fraction {test_fraction}: "
            "each split needs at least 2 samples"
        )
    rng = np.random.default_rng(seed)
    classes = ds.class_set
    counts = [int(np.sum(ds.labels == c)) for c in classes] if classes else []
    stratified = bool(counts) and min(counts) >= 2
    if stratified:
        shares = apportion(counts, n_test)
        test = []
        for cls, share in zip(classes, shares):
            members = np.flatnonzero(ds.labels == cls)
            test.append(rng.permutation(members)[:share])
        test_ids = np.sort(np.concatenate(test))
    else:
        log.warning(f"{ds.name}: a class has fewer than 2 members, split is not stratified")
        test_ids = np.sort(rng.permutation(n)[:n_test])
    return PoolSplit(
        labeled_ids=np.array([], dtype=int),
        unlabeled_ids=np.setdiff1d(np.arange(n), test_ids),
        test_ids=test_ids,
        seed=seed,
        stratified=stratified,
    )


def make_blobs(n_clusters, n_per_cluster, overlap=0.0, seed=0):
    # type: (int, int, float, int) -> Dataset
    """
    Generate isotropic 2-D Gaussian blobs with known membership.

    Centers sit on a circle, 20 units from their neighbors. The blob standard deviation is
    `1 + 9 * overlap`, so overlap 0 gives well-separated blobs.

    :param n_clusters: Number of blobs
    :param n_per_cluster: Samples per blob
    :param overlap: Spread factor in [0, 1]
    :param seed: Seed of the generator
    :return: Dataset labelled by generating blob
    """
    if n_clusters < 1 or n_per_cluster < 1:
        raise ValueError("make_blobs needs at least one blob with one sample")
    if not 0.0 <= overlap <= 1.0:
        raise ValueError(f"overlap must lie in [0, 1], got {overlap}")
    with timer(f"Generated {n_clusters} blobs in"):
        rng = np.random.default_rng(seed)
        centers = np.zeros((n_clusters, 2))
        if n_clusters > 1:
            radius = 10.0 / np.sin(np.pi / n_clusters)
            angles = 2 * np.pi * np.arange(n_clusters) / n_clusters
            centers[:, 0], centers[:, 1] = radius * np.cos(angles), radius * np.sin(angles)
        sd = 1.0 + 9.0 * overlap
        points = [c + sd * rng.standard_normal((n_per_cluster, 2)) for c in centers]
        labels = np.repeat(np.arange(n_clusters), n_per_cluster).astype(str)
    return Dataset(
        name=f"blobs-{n_clusters}-{n_per_cluster}-{overlap:g}",
        features=np.vstack(points),
        labels=labels,
        feature_names=["x0", "x1"],
    )


def parse_synthetic(spec, seed=0):
    # type: (str, int) -> Dataset
    """
    Build a synthetic dataset from `blobs:<c>:<n>:<overlap>`.

    :param spec: Generator specification, n is the number of samples per blob
    :param seed: Seed of the generator
    :return: Generated dataset
    """
    parts = spec.split(":")
    if len(parts) != 4 or parts[0] != "blobs":
        raise DataError(f"Synthetic spec must look like blobs:<c>:<n>:<overlap>, got {spec!r}")
    try:
        c, n, overlap = int(parts[1]), int(parts[2]), float(parts[3])
        return make_blobs(c, n, overlap, seed=seed)
    except ValueError as e:
        raise DataError(f"Invalid synthetic spec {spec!r}: {e}") from e
