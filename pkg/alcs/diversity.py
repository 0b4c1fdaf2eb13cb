"""Diversity exploration by fitness proportionate niching over query priorities."""

from collections.abc import Iterator
import numpy as np
from loguru import logger as log
from alcs.data import mean_knn_distance, pairwise_distances
from alcs.errors import SelectionError
from alcs.schema import NicheConfig, PriorityField
from alcs.utils import round_half_even


def niche_radius(member_features):
    # type: (np.ndarray) -> NicheConfig
    """
    Neighborhood radius of a cluster: the mean k-nearest-neighbor distance of its members.

    k is the rounded square root of the cluster size, clamped to [1, m - 1].

    :param member_features: Feature rows of the cluster members
    :return: Niche configuration (radius 0 for singleton clusters)
    """
    m = len(member_features)
    if m < 2:
        return NicheConfig(radius=0.0, k=1)
    k = min(max(1, round_half_even(np.sqrt(m))), m - 1)
    return NicheConfig(radius=mean_knn_distance(member_features, k), k=k)


def niche_picks(field, features, count, cfg):
    # type: (PriorityField, np.ndarray, int, NicheConfig) -> Iterator[tuple[int, float]]
    """
    Yield (row, priority) picks in selection order.

    Each pick is the remaining row of highest current priority (ties to the lower row). Remaining
    rows within `cfg.radius` of the pick form its niche; their priorities are divided by
    `max(1, S)` where S sums the priorities of the niche and the pick.

    :param field: Initial priorities
    :param features: Feature matrix indexed by the field rows
    :param count: Number of picks
    :param cfg: Niche configuration
    """
    if count > len(field.rows):
        raise SelectionError(f"Cannot select {count} of {len(field.rows)} candidates")
    order = np.argsort(field.rows, kind="stable")
    rows = field.rows[order]
    priority = np.array(field.values[order], dtype=np.float64)
    points = features[rows]
    active = np.ones(len(rows), dtype=bool)
    for _ in range(count):
        candidates = np.flatnonzero(active)
        j = candidates[np.argmax(priority[candidates])]
        yield int(rows[j]), float(priority[j])
        active[j] = False
        if not active.any():
            continue
        d = pairwise_distances(points[j : j + 1], points)[0]
        niche = active & (d <= cfg.radius)
        share = max(1.0, priority[j] + priority[niche].sum())
        priority[niche] /= share
        log.debug(f"Row {rows[j]}: niche of {int(niche.sum())} shared by {share:.4f}")


def select_with_niching(field, features, count, cfg):
    # type: (PriorityField, np.ndarray, int, NicheConfig) -> list[int]
    """
    Select `count` rows with priority sharing inside transient niches.

    :param field: Initial priorities
    :param features: Feature matrix indexed by the field rows
    :param count: Number of rows to select
    :param cfg: Niche configuration
    :return: Selected rows in selection order
    """
    return [row for row, _ in niche_picks(field, features, count, cfg)]
