"""
Parameter-light density-peak clustering with fitness proportionate suppression.

Peaks are picked one at a time from a Gaussian kernel density landscape. After each pick the
working density of every sample within the sharing radius of the new peak is scaled by
`(dist / radius) ** 2`. The search stops once the best remaining density falls below
`tau * max(initial density)`. Peaks left with fewer than `min_cluster_size` members (default
round(sqrt(n))) are dropped, and every sample joins its nearest surviving peak.
"""

import numpy as np
from loguru import logger as log
from pydantic import BaseModel, Field
from alcs.data import mean_pairwise_distance, pairwise_distances, row_blocks
from alcs.errors import DataError, SelectionError
from alcs.schema import ClusterModel, ClusterReport, ClusterSummary, NeighborInfo
from alcs.settings import AlcsSettings, al_opts
from alcs.utils import round_half_even, timer


def scale_sample(features, limit=None):
    # type: (np.ndarray, int|None) -> np.ndarray
    """Uniform subsample of at most `limit` rows used to estimate distance scales."""
    limit = limit or al_opts.subsample_limit
    n = len(features)
    if n <= limit:
        return features
    log.warning(f"Estimating distance scales from {limit} of {n} samples")
    rows = np.sort(np.random.default_rng(0).choice(n, size=limit, replace=False))
    return features[rows]


def kernel_bandwidth(scale, n):
    # type: (float, int) -> float
    """Gaussian bandwidth: mean pairwise distance divided by sqrt(2 ln n)."""
    return scale / np.sqrt(2.0 * np.log(n))


def estimate_density(features, scale=None):
    # type: (np.ndarray, float|None) -> np.ndarray
    """
    Gaussian kernel density of every sample over all other samples.

    :param features: Feature rows (at least 2)
    :param scale: Mean pairwise distance (estimated from the features if omitted)
    :return: Strictly positive density per sample
    """
    x = np.asarray(features, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise DataError(f"Density estimation needs at least 2 samples, got {n}")
    scale = mean_pairwise_distance(scale_sample(x)) if scale is None else scale
    sigma = kernel_bandwidth(scale, n)
    if sigma == 0.0:
        return np.full(n, float(n - 1))
    density = np.empty(n)
    for rows in row_blocks(n):
        k = np.exp(-(pairwise_distances(x[rows], x) ** 2) / (2.0 * sigma**2))
        k[np.arange(k.shape[0]), np.arange(rows.start, rows.stop)] = 0.0
        density[rows] = k.sum(axis=1)
    return np.maximum(density, np.finfo(np.float64).tiny)


def find_peaks(features, density, radius, tau):
    # type: (np.ndarray, np.ndarray, float, float) -> list[int]
    """
    Pick density peaks with fitness proportionate suppression.

    :param features: Feature rows
    :param density: Initial density per row
    :param radius: Sharing radius of the suppression ramp
    :param tau: Stop once the best working density is below tau * initial maximum
    :return: Peak row indices in pick order
    """
    working = np.array(density, dtype=np.float64)
    floor = tau * working.max()
    peaks = []
    while True:
        j = int(np.argmax(working))
        if working[j] <= 0.0 or working[j] < floor:
            break
        peaks.append(j)
        d = pairwise_distances(features[j : j + 1], features)[0]
        working = suppress(working, d, radius)
    return peaks


def suppress(working, d, radius):
    # type: (np.ndarray, np.ndarray, float) -> np.ndarray
    """Scale working densities by (d / radius) ** 2 clipped to [0, 1], d being the peak distance."""
    if radius <= 0.0:
        return np.zeros_like(working)
    return working * np.clip((d / radius) ** 2, 0.0, 1.0)


def prune_peaks(features, peaks, min_size):
    # type: (np.ndarray, list[int], int) -> list[int]
    """
    Drop peaks whose nearest-peak cluster holds fewer than `min_size` samples.

    The smallest cluster goes first (the later pick on ties) and its members join their next
    nearest peak before the sizes are checked again. At least one peak always survives.

    :param features: Feature rows
    :param peaks: Peak row indices in pick order
    :param min_size: Smallest cluster a peak may keep (1 keeps every peak)
    :return: Surviving peaks in pick order
    """
    kept = list(peaks)
    while len(kept) > 1:
        assign = np.argmin(pairwise_distances(features, features[kept]), axis=1)
        sizes = np.bincount(assign, minlength=len(kept))
        i = int(np.lexsort((-np.arange(len(kept)), sizes))[0])
        if sizes[i] >= min_size:
            break
        log.debug(f"Dropped peak {kept[i]} with {sizes[i]} members")
        kept.pop(i)
    return kept


def model_from_centers(features, centers, ids=None, center_ids=None):
    # type: (np.ndarray, np.ndarray, np.ndarray|None, np.ndarray|None) -> ClusterModel
    """
    Assign every row to its nearest center (ties to the lower center index).

    Centers that end up without members are dropped.

    :param features: Feature rows
    :param centers: Center vectors of shape (c, d)
    :param ids: Sample id per row (defaults to row index)
    :param center_ids: Sample id of each center, -1 for synthetic centers
    :return: Cluster model
    """
    x = np.asarray(features, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    ids = np.arange(len(x)) if ids is None else np.asarray(ids)
    center_ids = np.full(len(centers), -1) if center_ids is None else np.asarray(center_ids)
    d = pairwise_distances(x, centers)
    assign = np.argmin(d, axis=1)
    distances = d[np.arange(len(x)), assign]
    used = np.flatnonzero(np.bincount(assign, minlength=len(centers)))
    if len(used) < len(centers):
        log.debug(f"Dropping {len(centers) - len(used)} empty clusters")
        remap = np.full(len(centers), -1)
        remap[used] = np.arange(len(used))
        assign, centers, center_ids = remap[assign], centers[used], center_ids[used]
    return ClusterModel(
        ids=ids,
        centers=centers,
        center_ids=center_ids,
        assignments=assign,
        center_distances=distances,
    )


def fps_cluster(features, ids=None, params=None):
    # type: (np.ndarray, np.ndarray|None, FpsClusterer|None) -> ClusterModel
    """
    Cluster feature rows without a user supplied cluster count.

    :param features: Feature rows (at least 2)
    :param ids: Sample id per row (defaults to row index)
    :param params: Peak search knobs, unset ones fall back to `al_opts`
    :return: Cluster model with peaks as centers
    """
    x = np.asarray(features, dtype=np.float64)
    params = params or FpsClusterer()
    n = len(x)
    if n < 2:
        raise DataError(f"Clustering needs at least 2 samples, got {n}")
    tau = al_opts.tau if params.tau is None else params.tau
    min_size = params.min_cluster_size or al_opts.min_cluster_size
    min_size = min_size or max(1, round_half_even(np.sqrt(n)))
    with timer(f"Clustered {n} samples in"):
        radius = mean_pairwise_distance(scale_sample(x, params.subsample_limit))
        density = estimate_density(x, scale=radius)
        peaks = find_peaks(x, density, radius, tau)
        centers = prune_peaks(x, peaks, min_size)
        log.info(
            f"Found {len(peaks)} density peaks, {len(centers)} with at least {min_size} members"
        )
        ids = np.arange(n) if ids is None else np.asarray(ids)
        return model_from_centers(x, x[centers], ids=ids, center_ids=ids[centers])


def neighboring_centers(model):
    # type: (ClusterModel) -> NeighborInfo
    """
    Find the two nearest other centers of every cluster.

    With two clusters both neighbor slots reference the sole other center.

    :param model: Cluster model with at least 2 clusters
    :return: Neighbor indices and center-to-center reference distances
    """
    c = model.n_clusters
    if c < 2:
        raise SelectionError("Neighboring centers need at least 2 clusters")
    d = pairwise_distances(model.centers)
    np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")
    nc1 = order[:, 0]
    nc2 = order[:, 1] if c >= 3 else nc1
    rows = np.arange(c)
    d_ref1, d_ref2 = d[rows, nc1], d[rows, nc2]
    if np.any(d_ref1 <= 0.0):
        raise SelectionError("Two cluster centers coincide")
    return NeighborInfo(nc1=nc1, nc2=nc2, d_ref1=d_ref1, d_ref2=d_ref2)


class FpsClusterer(BaseModel):
    """Density-peak clusterer. Knobs left at None fall back to `al_opts`."""

    name: str = Field("fps", description="Clusterer name used in logs")
    tau: float | None = Field(None, gt=0.0, lt=1.0, description="Peak search stop threshold")
    min_cluster_size: int | None = Field(
        None, ge=1, description="Peaks with fewer cluster members are dropped"
    )
    subsample_limit: int | None = Field(
        None, ge=2, description="Max samples used to estimate the sharing radius"
    )

    @classmethod
    def from_settings(cls, opts=None):
        # type: (AlcsSettings|None) -> FpsClusterer
        opts = opts or al_opts
        return cls(
            tau=opts.tau,
            min_cluster_size=opts.min_cluster_size,
            subsample_limit=opts.subsample_limit,
        )

    def fit(self, features, ids=None):
        # type: (np.ndarray, np.ndarray|None) -> ClusterModel
        return fps_cluster(features, ids=ids, params=self)


class KMeansClusterer(BaseModel):
    """Lloyd k-means with deterministic farthest-point initialization."""

    name: str = Field("kmeans", description="Clusterer name used in logs")
    n_clusters: int = Field(..., ge=1, description="Number of clusters")
    iterations: int = Field(100, ge=1, description="Maximum Lloyd iterations")

    def fit(self, features, ids=None):
        # type: (np.ndarray, np.ndarray|None) -> ClusterModel
        x = np.asarray(features, dtype=np.float64)
        c = min(self.n_clusters, len(x))
        picks = [0]
        nearest = pairwise_distances(x, x[:1])[:, 0]
        for _ in range(1, c):
            picks.append(int(np.argmax(nearest)))
            latest = pairwise_distances(x, x[picks[-1] : picks[-1] + 1])[:, 0]
            nearest = np.minimum(nearest, latest)
        centers = x[picks]
        assign = None
        for _ in range(self.iterations):
            new = np.argmin(pairwise_distances(x, centers), axis=1)
            if assign is not None and np.array_equal(new, assign):
                break
            assign = new
            for i in range(c):
                members = x[assign == i]
                if len(members):
                    centers[i] = members.mean(axis=0)
        return model_from_centers(x, centers, ids=ids)


def cluster_report(model, dataset="dataset", config=None):
    # type: (ClusterModel, str, dict|None) -> ClusterReport
    """Summarize a cluster model: center vector, size and member ids per cluster."""
    clusters = [
        ClusterSummary(
            index=i,
            center=model.centers[i].tolist(),
            center_id=int(model.center_ids[i]),
            size=int(size),
            members=model.ids[model.members(i)].tolist(),
        )
        for i, size in enumerate(model.cluster_sizes)
    ]
    return ClusterReport(
        dataset=dataset,
        n_samples=model.n_samples,
        n_clusters=model.n_clusters,
        clusters=clusters,
        config=config or {},
    )
