import numpy as np
import pytest
from hypothesis import given, strategies as st
from alcs.data import make_blobs, normalize, pairwise_distances
from alcs.diversity import niche_picks, niche_radius, select_with_niching
from alcs.errors import SelectionError
from alcs.schema import NicheConfig, PriorityField
from alcs.selection import cluster_representativeness


def field(values, rows=None):
    values = np.asarray(values, dtype=float)
    rows = np.arange(len(values)) if rows is None else np.asarray(rows)
    return PriorityField(rows=rows, values=values, kind="center")


def test_niche_radius_unit_square():
    square = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    cfg = niche_radius(square)
    assert cfg.k == 2
    assert cfg.radius == pytest.approx(1.0)


def test_niche_radius_singleton():
    assert niche_radius(np.zeros((1, 3))).radius == 0.0


@given(st.integers(0, 10_000))
def test_niche_radius_matches_brute_force(seed):
    x = np.random.default_rng(seed).normal(size=(30, 2))
    k = int(np.rint(np.sqrt(30)))
    nearest = [
        sorted(np.linalg.norm(x[i] - x[j]) for j in range(30) if j != i)[:k] for i in range(30)
    ]
    assert niche_radius(x).radius == pytest.approx(np.mean(nearest))


def test_single_pick_is_argmax():
    x = np.random.default_rng(0).normal(size=(10, 2))
    values = np.linspace(0.1, 0.4, 10)[::-1].copy()
    values[6] = 0.45
    assert select_with_niching(field(values), x, 1, NicheConfig(radius=5.0, k=3)) == [6]


def test_zero_radius_is_plain_ranking():
    x = np.random.default_rng(1).normal(size=(8, 2))
    values = np.array([0.1, 0.4, 0.3, 0.2, 0.35, 0.15, 0.25, 0.05])
    picks = select_with_niching(field(values), x, 8, NicheConfig(radius=0.0, k=1))
    assert picks == np.argsort(-values, kind="stable").tolist()


def test_ties_go_to_the_lower_row():
    x = np.array([[0.0], [5.0], [10.0]])
    cfg = NicheConfig(radius=0.0, k=1)
    picks = select_with_niching(field([0.3, 0.3, 0.3], rows=[2, 0, 1]), x, 3, cfg)
    assert picks == [0, 1, 2]


def test_niching_moves_to_a_second_group():
    group = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [0.1, 0.1], [0.05, 0.05]])
    x = np.vstack([group, group + [10.0, 0.0]])
    values = [0.5, 0.45, 0.44, 0.43, 0.42, 0.3, 0.29, 0.28, 0.27, 0.26]
    picks = select_with_niching(field(values), x, 2, NicheConfig(radius=1.0, k=2))
    assert picks == [0, 5]
    plain = select_with_niching(field(values), x, 2, NicheConfig(radius=0.0, k=1))
    assert plain == [0, 1]


def test_small_niches_are_not_shared():
    x = np.array([[0.0], [0.1], [10.0]])
    picks = select_with_niching(field([0.3, 0.29, 0.2]), x, 2, NicheConfig(radius=1.0, k=1))
    assert picks == [0, 1]


@given(st.integers(0, 10_000))
def test_priorities_never_increase(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(20, 2))
    values = rng.uniform(0.05, 0.5, size=20)
    for row, priority in niche_picks(field(values), x, 10, NicheConfig(radius=1.0, k=4)):
        assert priority <= values[row]


def test_count_larger_than_candidates():
    with pytest.raises(SelectionError):
        select_with_niching(field([0.2, 0.3]), np.zeros((2, 1)), 3, NicheConfig(radius=1.0, k=1))


def spread(x, rows):
    d = pairwise_distances(x[rows])
    return d[np.triu_indices(len(rows), 1)].mean()


def test_niching_spreads_selections():
    wins = 0
    for seed in range(20):
        x = normalize(make_blobs(3, 30, overlap=0.5, seed=seed)).features
        anchor = x[np.random.default_rng(seed).integers(len(x))]
        values = cluster_representativeness(np.linalg.norm(x - anchor, axis=1))
        cfg = niche_radius(x)
        niched = select_with_niching(field(values), x, 5, cfg)
        plain = select_with_niching(field(values), x, 5, NicheConfig(radius=0.0, k=1))
        wins += spread(x, niched) >= spread(x, plain)
    assert wins >= 18
