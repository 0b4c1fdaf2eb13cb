import math
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from alcs.data import (
    distance,
    load_dataset,
    make_blobs,
    mean_knn_distance,
    mean_pairwise_distance,
    normalize,
    parse_synthetic,
    save_dataset,
    split_pool,
)
from alcs.errors import DataError
from alcs.schema import Dataset


def csv_file(tmp_path, text):
    path = tmp_path / "data.csv"
    path.write_text(text, encoding="utf-8")
    return path


def dataset(features, labels=None):
    labels = None if labels is None else np.array(labels, dtype=str)
    return Dataset(features=np.array(features, dtype=float), labels=labels)


def test_load_dataset_three_rows(tmp_path):
    ds = load_dataset(csv_file(tmp_path, "1,2,A\n3,4,B\n5,6,A\n"), label_col="2")
    assert ds.n_samples == 3
    assert ds.class_set == ("A", "B")
    assert ds.features.tolist() == [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]
    assert ds.sample(1).label == "B"


def test_load_dataset_header_and_label_name(tmp_path):
    ds = load_dataset(csv_file(tmp_path, "x,label,y\n1,A,2\n3,B,4\n"), label_col="label")
    assert ds.feature_names == ["x", "y"]
    assert ds.labels.tolist() == ["A", "B"]
    assert ds.name == "data"


def test_header_with_partly_numeric_names(tmp_path):
    ds = load_dataset(csv_file(tmp_path, "0,width,class\n1,2,A\n3,4,B\n"))
    assert ds.n_samples == 2
    assert ds.feature_names == ["0", "width"]
    assert ds.class_set == ("A", "B")


def test_word_label_in_first_row_is_data(tmp_path):
    ds = load_dataset(csv_file(tmp_path, "0,1,class\n1,2,A\n"))
    assert ds.n_samples == 2
    assert ds.class_set == ("A", "class")


def test_load_dataset_negative_index(tmp_path):
    ds = load_dataset(csv_file(tmp_path, "1,2,A\n3,4,B\n"), label_col="-1")
    assert ds.class_set == ("A", "B")


def test_load_dataset_extra_column_names_row(tmp_path):
    rows = ["1,2,A"] * 6 + ["1,2,3,A"]
    with pytest.raises(DataError, match="row 7"):
        load_dataset(csv_file(tmp_path, "\n".join(rows) + "\n"))


def test_load_dataset_missing_column_names_row(tmp_path):
    rows = ["1,2,A"] * 6 + ["1,A"]
    with pytest.raises(DataError, match="row 7"):
        load_dataset(csv_file(tmp_path, "\n".join(rows) + "\n"))


def test_load_dataset_non_numeric_feature(tmp_path):
    with pytest.raises(DataError, match="row 2"):
        load_dataset(csv_file(tmp_path, "1,2,A\n3,oops,B\n"))


def test_load_dataset_missing_value(tmp_path):
    with pytest.raises(DataError, match="Missing value"):
        load_dataset(csv_file(tmp_path, "1,2,A\n3,,B\n"))


def test_load_dataset_empty_file(tmp_path):
    with pytest.raises(DataError, match="empty"):
        load_dataset(csv_file(tmp_path, ""))


def test_load_dataset_missing_file(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_dataset(tmp_path / "nope.csv")


def test_load_dataset_unknown_label_column(tmp_path):
    with pytest.raises(DataError, match="Label column"):
        load_dataset(csv_file(tmp_path, "a,b\n1,A\n"), label_col="target")


def test_save_and_load_synthetic(tmp_path):
    ds = make_blobs(2, 5, seed=1)
    loaded = load_dataset(save_dataset(ds, tmp_path / "blobs.csv"), label_col="label")
    assert loaded.n_samples == 10
    assert loaded.class_set == ("0", "1")
    assert np.allclose(loaded.features, ds.features)


def test_normalize_min_max():
    ds = normalize(dataset([[0.0, 2.0], [5.0, 2.0], [10.0, 2.0]]), "min-max")
    assert ds.features[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert ds.features[:, 1].tolist() == [0.0, 0.0, 0.0]
    assert ds.normalization == "min-max"


def test_normalize_z_score():
    ds = normalize(dataset([[1.0], [3.0]]), "z-score")
    assert ds.features[:, 0].tolist() == pytest.approx([-1.0, 1.0])


def test_normalize_needs_two_samples():
    with pytest.raises(DataError):
        normalize(dataset([[1.0, 2.0]]), "min-max")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["min-max", "z-score"]))
def test_normalize_idempotent(seed, method):
    rng = np.random.default_rng(seed)
    x = rng.normal(scale=rng.uniform(0.1, 100.0), size=(rng.integers(2, 30), 3))
    once = normalize(dataset(x), method)
    twice = normalize(once, method)
    assert np.allclose(once.features, twice.features, rtol=0.0, atol=1e-9)


def test_distance_examples():
    assert distance([0, 0], [3, 4]) == 5.0
    assert distance([1.5, -2.0], [1.5, -2.0]) == 0.0


def test_distance_matches_recomputation():
    rng = np.random.default_rng(11)
    a, b = rng.normal(size=10), rng.normal(size=10)
    expected = math.sqrt(math.fsum((x - y) ** 2 for x, y in zip(a.tolist(), b.tolist())))
    assert abs(distance(a, b) - expected) < 1e-12


def test_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        distance([0.0, 1.0], [0.0, 1.0, 2.0])


@given(st.integers(0, 10_000))
def test_distance_metric_axioms(seed):
    a, b, c = np.random.default_rng(seed).normal(size=(3, 4))
    assert distance(a, b) == pytest.approx(distance(b, a))
    assert distance(a, b) >= 0.0
    assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9


def test_mean_distances_unit_square():
    square = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    assert mean_knn_distance(square, 2) == pytest.approx(1.0)
    assert mean_pairwise_distance(square) == pytest.approx((4 + 2 * math.sqrt(2)) / 6)


def test_split_pool_sizes():
    ds = make_blobs(2, 50, seed=0)
    split = split_pool(ds, seed=7, test_fraction=0.3)
    assert len(split.test_ids) == 30
    assert len(split.labeled_ids) == 0
    assert len(np.intersect1d(split.test_ids, split.unlabeled_ids)) == 0


def test_split_pool_deterministic():
    ds = make_blobs(2, 50, seed=0)
    first, second = split_pool(ds, 7, 0.3), split_pool(ds, 7, 0.3)
    assert np.array_equal(first.test_ids, second.test_ids)
    assert np.array_equal(first.unlabeled_ids, second.unlabeled_ids)


def test_split_pool_stratified():
    ds = make_blobs(2, 50, seed=0)
    split = split_pool(ds, seed=3, test_fraction=0.3)
    assert split.stratified
    labels = ds.labels[split.test_ids]
    assert np.sum(labels == "0") == 15
    assert np.sum(labels == "1") == 15


def test_split_pool_unstratified_for_singleton_class():
    ds = dataset(np.arange(20.0)[:, None], ["a"] * 19 + ["b"])
    split = split_pool(ds, seed=1, test_fraction=0.25)
    assert not split.stratified
    assert len(split.test_ids) == 5


def test_split_pool_too_small():
    with pytest.raises(DataError):
        split_pool(dataset([[0.0], [1.0], [2.0]], ["a", "b", "a"]), seed=0, test_fraction=0.5)


@settings(max_examples=100, deadline=None)
@given(st.integers(4, 120), st.floats(0.05, 0.95), st.integers(0, 2**31), st.integers(1, 4))
def test_split_pool_partition(n, fraction, seed, n_classes):
    n_test = int(np.rint(n * fraction))
    assume(n_test >= 2 and n - n_test >= 2)
    labels = [str(i % n_classes) for i in range(n)]
    ds = dataset(np.arange(float(n))[:, None], labels)
    split = split_pool(ds, seed, fraction)
    merged = np.concatenate([split.labeled_ids, split.unlabeled_ids, split.test_ids])
    assert sorted(merged.tolist()) == list(range(n))
    assert len(split.test_ids) == n_test


def test_with_labeled_moves_ids():
    split = split_pool(make_blobs(2, 10, seed=0), seed=0, test_fraction=0.3)
    moved = split.unlabeled_ids[:3]
    updated = split.with_labeled(moved)
    assert updated.labeled_ids.tolist() == sorted(moved.tolist())
    assert updated.n_unlabeled == split.n_unlabeled - 3
    with pytest.raises(ValueError):
        updated.with_labeled(moved)


def test_make_blobs_membership():
    ds = make_blobs(3, 25, overlap=0.0, seed=5)
    assert ds.features.shape == (75, 2)
    assert ds.class_set == ("0", "1", "2")
    assert ds.labels[:25].tolist() == ["0"] * 25


def test_parse_synthetic():
    ds = parse_synthetic("blobs:4:10:0.25", seed=2)
    assert ds.n_samples == 40
    assert ds.name == "blobs-4-10-0.25"
    with pytest.raises(DataError):
        parse_synthetic("moons:2:10")
    with pytest.raises(DataError):
        parse_synthetic("blobs:two:10:0")


def test_features_view_is_read_only(blobs3):
    view = blobs3.features_view([0, 1, 2])
    assert view.shape == (3, 2)
    with pytest.raises(ValueError):
        view[0, 0] = 1.0
