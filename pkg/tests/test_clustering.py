import math
import numpy as np
import pytest
from hypothesis import given, strategies as st
from loguru import logger as log
from scipy.optimize import linear_sum_assignment
from alcs.clustering import (
    FpsClusterer,
    KMeansClusterer,
    cluster_report,
    estimate_density,
    find_peaks,
    fps_cluster,
    model_from_centers,
    neighboring_centers,
    prune_peaks,
    suppress,
)
from alcs.data import make_blobs, normalize, pairwise_distances
from alcs.errors import DataError, SelectionError


def agreement(truth, assignments):
    # type: (np.ndarray, np.ndarray) -> float
    """Share of samples on the diagonal of the best cluster-to-class matching."""
    classes, t = np.unique(truth, return_inverse=True)
    table = np.zeros((len(classes), assignments.max() + 1))
    np.add.at(table, (t, assignments), 1)
    rows, cols = linear_sum_assignment(-table)
    return table[rows, cols].sum() / len(truth)


def test_density_matches_brute_force():
    x = np.random.default_rng(4).uniform(0, 10, size=(20, 1))
    n = len(x)
    pairs = [abs(x[i, 0] - x[j, 0]) for i in range(n) for j in range(n) if i != j]
    sigma = (math.fsum(pairs) / len(pairs)) / math.sqrt(2 * math.log(n))
    expected = [
        math.fsum(
            math.exp(-((x[i, 0] - x[j, 0]) ** 2) / (2 * sigma**2)) for j in range(n) if j != i
        )
        for i in range(n)
    ]
    assert np.allclose(estimate_density(x), expected, rtol=1e-10, atol=0.0)


def test_density_coincident_points():
    x = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.2]])
    rho = estimate_density(x)
    assert rho[0] == rho[1]
    assert np.all(rho > 0.0)


def test_density_outlier_is_lowest():
    rng = np.random.default_rng(1)
    x = np.vstack([rng.normal(scale=0.1, size=(30, 2)), [[5.0, 5.0]]])
    rho = estimate_density(x)
    assert rho[-1] < rho[:-1].min()


def test_density_needs_two_samples():
    with pytest.raises(DataError):
        estimate_density(np.zeros((1, 2)))


@given(st.integers(0, 10_000))
def test_suppression_never_raises_density(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(25, 2))
    working = rng.uniform(0.1, 1.0, size=25)
    d = pairwise_distances(x[int(rng.integers(25))][None], x)[0]
    after = suppress(working, d, float(rng.uniform(0.1, 3.0)))
    assert np.all(after <= working)
    assert np.all(after >= 0.0)


def test_find_peaks_stops_below_threshold():
    x = np.array([[0.0], [0.1], [10.0]])
    peaks = find_peaks(x, np.array([1.0, 0.9, 0.01]), radius=5.0, tau=0.05)
    assert peaks == [0]


def test_two_blobs_give_two_clusters():
    ds = make_blobs(2, 30, seed=0)
    model = fps_cluster(ds.features)
    assert model.n_clusters == 2
    assert agreement(ds.labels, model.assignments) >= 0.95


def test_identical_points_give_one_cluster():
    model = fps_cluster(np.ones((12, 3)))
    assert model.n_clusters == 1
    assert np.all(model.center_distances == 0.0)


def test_clustering_needs_two_samples():
    with pytest.raises(DataError):
        fps_cluster(np.zeros((1, 2)))


def test_model_consistency_and_optimal_assignment(blobs3):
    x = blobs3.features
    model = fps_cluster(x)
    assert model.cluster_sizes.sum() == len(x)
    assert np.all(model.cluster_sizes > 0)
    d = pairwise_distances(x, model.centers)
    assert np.allclose(model.center_distances, d.min(axis=1))
    assert np.allclose(d[np.arange(len(x)), model.assignments], d.min(axis=1))
    assert np.allclose(model.centers, x[model.center_ids])


def test_clustering_is_deterministic(blobs3):
    first, second = fps_cluster(blobs3.features), fps_cluster(blobs3.features)
    assert np.array_equal(first.assignments, second.assignments)
    assert np.array_equal(first.center_ids, second.center_ids)


def test_clustering_keeps_pool_ids(blobs3):
    ids = np.arange(len(blobs3.features)) * 3 + 7
    model = fps_cluster(blobs3.features, ids=ids)
    assert np.array_equal(model.ids, ids)
    assert set(model.center_ids.tolist()) <= set(ids.tolist())


def test_prune_peaks_drops_rim_of_same_blob():
    x = np.vstack([[0.0, 0.0], np.random.default_rng(2).normal(size=(59, 2)), [[4.0, 0.0]]])
    assert prune_peaks(x, [0, 60], min_size=8) == [0]
    assert prune_peaks(x, [0, 60], min_size=1) == [0, 60]


def test_prune_peaks_keeps_separated_blobs():
    ds = make_blobs(2, 40, seed=1)
    assert prune_peaks(ds.features, [0, 40], min_size=20) == [0, 40]


def test_prune_peaks_drops_smallest_first():
    x = np.array([[0.0], [0.1], [0.2], [0.3], [5.0], [5.1], [9.0]])
    assert prune_peaks(x, [0, 4, 6], min_size=2) == [0, 4]
    assert prune_peaks(x, [0, 4, 6], min_size=5) == [0]
    assert prune_peaks(x, [6], min_size=100) == [6]


def test_overlapping_blobs_stay_apart():
    ds = normalize(make_blobs(3, 200, overlap=0.5, seed=0))
    model = fps_cluster(ds.features)
    assert model.n_clusters >= 3
    assert np.all(model.cluster_sizes >= round(math.sqrt(ds.n_samples)))
    assert agreement(ds.labels, model.assignments) >= 0.5


def test_clusterer_knobs_reach_the_peak_search(blobs3):
    messages = []
    sink = log.add(messages.append, level="WARNING")
    try:
        model = FpsClusterer(subsample_limit=50, min_cluster_size=1).fit(blobs3.features)
    finally:
        log.remove(sink)
    assert any("from 50 of 120 samples" in m for m in messages)
    assert model.cluster_sizes.sum() == 120
    assert FpsClusterer(min_cluster_size=120).fit(blobs3.features).n_clusters == 1


def test_model_from_centers_drops_empty_clusters():
    x = np.array([[0.0], [0.2], [9.0]])
    model = model_from_centers(x, np.array([[0.0], [50.0], [9.0]]))
    assert model.n_clusters == 2
    assert model.assignments.tolist() == [0, 0, 1]
    assert model.center_distances.tolist() == pytest.approx([0.0, 0.2, 0.0])


def test_neighbors_on_a_line():
    x = np.array([[0.0], [1.0], [5.0]])
    info = neighboring_centers(model_from_centers(x, x))
    assert info.nc1[0] == 1 and info.d_ref1[0] == 1.0
    assert info.nc2[0] == 2 and info.d_ref2[0] == 5.0
    assert info.nc1[2] == 1 and info.nc2[2] == 0


def test_neighbors_with_two_clusters():
    x = np.array([[0.0], [3.0]])
    info = neighboring_centers(model_from_centers(x, x))
    assert info.nc1.tolist() == info.nc2.tolist() == [1, 0]
    assert info.d_ref1.tolist() == info.d_ref2.tolist() == [3.0, 3.0]


def test_neighbors_need_two_clusters():
    x = np.zeros((3, 2))
    with pytest.raises(SelectionError):
        neighboring_centers(model_from_centers(x, x[:1]))


@given(st.integers(0, 10_000))
def test_neighbors_match_brute_force(seed):
    centers = np.random.default_rng(seed).normal(size=(6, 3))
    info = neighboring_centers(model_from_centers(centers, centers))
    for i in range(6):
        others = sorted((np.linalg.norm(centers[i] - centers[j]), j) for j in range(6) if j != i)
        assert info.nc1[i] == others[0][1]
        assert info.nc2[i] == others[1][1]
        assert info.d_ref1[i] == pytest.approx(others[0][0])
        assert info.d_ref2[i] == pytest.approx(others[1][0])


def test_clusterers_share_the_model_contract(blobs3):
    for clusterer in [FpsClusterer(), KMeansClusterer(n_clusters=3)]:
        model = clusterer.fit(blobs3.features)
        assert model.n_clusters == 3
        assert agreement(blobs3.labels, model.assignments) >= 0.95


def test_cluster_report_lists_members(blobs3):
    model = fps_cluster(blobs3.features)
    report = cluster_report(model, dataset="blobs")
    assert report.n_clusters == model.n_clusters
    assert sum(c.size for c in report.clusters) == report.n_samples
    members = sorted(i for c in report.clusters for i in c.members)
    assert members == list(range(report.n_samples))


@pytest.mark.slow
def test_recovers_cluster_count_of_separated_blobs():
    hits = 0
    for seed in range(20):
        c = 2 + seed % 6
        ds = make_blobs(c, 100, overlap=0.0, seed=seed)
        model = fps_cluster(ds.features)
        if model.n_clusters == c and agreement(ds.labels, model.assignments) >= 0.95:
            hits += 1
    assert hits >= 18
