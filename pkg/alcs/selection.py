"""Hybrid center and bi-cluster boundary query selection."""

from typing import NamedTuple
import numpy as np
from loguru import logger as log
from pydantic import BaseModel, Field
from scipy.special import expit
from alcs.clustering import FpsClusterer, KMeansClusterer, neighboring_centers
from alcs.data import pairwise_distances
from alcs.diversity import niche_picks, niche_radius
from alcs.errors import SelectionError
from alcs.schema import (
    ClusterBudget,
    ClusterModel,
    NeighborInfo,
    PriorityField,
    QueryPlan,
    QueryRecord,
    QueryReport,
    QuerySet,
)
from alcs.settings import AlcsSettings, al_opts
from alcs.utils import apportion, round_half_even


TINY = np.finfo(np.float64).tiny


class Selection(NamedTuple):
    model: ClusterModel
    plan: QueryPlan
    queries: QuerySet


def allocate_budget(model, n_q, rho=None):
    # type: (ClusterModel, int, float|list[float]|None) -> QueryPlan
    """
    Split the query budget over clusters proportionally to their size.

    :param model: Cluster model of the unlabeled pool
    :param n_q: Total number of queries
    :param rho: Boundary share, global or per cluster (defaults to settings)
    :return: Plan whose per-cluster budgets sum to n_q
    """
    n_u = model.n_samples
    if n_q <= 0:
        raise SelectionError(f"Query budget must be positive, got {n_q}")
    if n_q > n_u:
        raise SelectionError(f"Query budget {n_q} exceeds the pool size {n_u}")
    c = model.n_clusters
    rho = al_opts.rho if rho is None else rho
    rhos = [float(rho)] * c if np.isscalar(rho) else [float(r) for r in rho]
    if len(rhos) != c:
        raise SelectionError(f"Got {len(rhos)} rho values for {c} clusters")
    if c == 1:
        # no neighboring centers, boundary selection is disabled
        rhos = [0.0]
    sizes = model.cluster_sizes.tolist()
    budgets = []
    for i, (size, share) in enumerate(zip(sizes, apportion(sizes, n_q))):
        center = round_half_even(share * (1.0 - rhos[i]))
        budgets.append(
            ClusterBudget(
                cluster=i,
                size=size,
                n_q=share,
                rho=rhos[i],
                boundary_count=share - center,
                center_count=center,
            )
        )
    return QueryPlan(total_budget=n_q, per_cluster=budgets)


def cluster_representativeness(d):
    # type: (float|np.ndarray) -> float|np.ndarray
    """
    Center priority 1 / (1 + e^d) of samples at distance d from their cluster center.

    Values are floored at the smallest positive float for very large distances.
    """
    d = np.asarray(d, dtype=np.float64)
    if np.any(d < 0.0):
        raise ValueError("Distances must be non-negative")
    value = np.maximum(expit(-d), TINY)
    return float(value) if value.ndim == 0 else value


def cluster_uncertainty(d1, d2, d_ref1, d_ref2):
    # type: (float|np.ndarray, float|np.ndarray, float, float) -> float|np.ndarray
    """
    Boundary priority 1 / (1 + e^((d1 + d2) / (d_ref1 + d_ref2))).

    :param d1: Distance to the nearest neighboring center
    :param d2: Distance to the second nearest neighboring center
    :param d_ref1: Distance from the own center to the nearest neighboring center
    :param d_ref2: Distance from the own center to the second nearest neighboring center
    """
    d1, d2 = np.asarray(d1, dtype=np.float64), np.asarray(d2, dtype=np.float64)
    ref = d_ref1 + d_ref2
    if not ref > 0.0:
        raise ValueError(f"Reference distance sum must be positive, got {ref}")
    if np.any(d1 < 0.0) or np.any(d2 < 0.0):
        raise ValueError("Distances must be non-negative")
    value = np.maximum(expit(-(d1 + d2) / ref), TINY)
    return float(value) if value.ndim == 0 else value


def boundary_candidates(model, i):
    # type: (ClusterModel, int) -> np.ndarray
    """
    The ceil(|C_i| / 2) members of cluster i farthest from its center (ties to the lower row).

    :return: Candidate rows, ascending
    """
    members = model.members(i)
    count = -(-len(members) // 2)
    order = np.lexsort((members, -model.center_distances[members]))
    return np.sort(members[order[:count]])


def hybrid_select(model, neighbors, plan, features):
    # type: (ClusterModel, NeighborInfo|None, QueryPlan, np.ndarray) -> QuerySet
    """
    Run the center pass and the boundary pass of every cluster with diversity exploration.

    The center pass runs first; its picks are excluded from the boundary pass. Boundary budget
    that the candidate set cannot supply is spent on the center pass of the same cluster.

    :param model: Cluster model of the pool
    :param neighbors: Neighboring centers (None when boundary selection is disabled)
    :param plan: Per-cluster budgets
    :param features: Feature rows the model was built on
    :return: Selected samples with provenance, merged in ascending cluster order
    """
    if len(plan.per_cluster) != model.n_clusters:
        raise SelectionError("Plan does not match the cluster model")
    records = []
    for budget in plan.per_cluster:
        if budget.n_q == 0:
            continue
        if budget.boundary_count and neighbors is None:
            raise SelectionError("Boundary selection needs neighboring centers")
        records.extend(select_cluster(model, neighbors, budget, features))
    queries = QuerySet(records=records)
    if len(queries) != plan.total_budget:
        raise SelectionError(f"Selected {len(queries)} samples for a budget of {plan.total_budget}")
    return queries


def select_cluster(model, neighbors, budget, features):
    # type: (ClusterModel, NeighborInfo|None, ClusterBudget, np.ndarray) -> list[QueryRecord]
    """Center and boundary picks of a single cluster."""
    i = budget.cluster
    members = model.members(i)
    cfg = niche_radius(features[members])
    candidates = boundary_candidates(model, i) if budget.boundary_count else members[:0]
    overflow = max(0, budget.boundary_count - len(candidates))
    if overflow:
        log.warning(f"Cluster {i}: {overflow} boundary queries moved to the center pass")
    field = center_field(model, members)
    n_center = budget.center_count + overflow
    picks = [(r, p, "center") for r, p in niche_picks(field, features, n_center, cfg)]
    taken = {row for row, _, _ in picks}

    remaining = np.array([r for r in candidates if r not in taken], dtype=int)
    n_boundary = min(budget.boundary_count - overflow, len(remaining))
    if n_boundary:
        centers = model.centers
        d1 = pairwise_distances(features[remaining], centers[[neighbors.nc1[i]]])[:, 0]
        d2 = pairwise_distances(features[remaining], centers[[neighbors.nc2[i]]])[:, 0]
        values = cluster_uncertainty(d1, d2, neighbors.d_ref1[i], neighbors.d_ref2[i])
        field = PriorityField(rows=remaining, values=values, kind="boundary")
        picks += [(r, p, "boundary") for r, p in niche_picks(field, features, n_boundary, cfg)]
        taken |= {row for row, _, _ in picks}

    shortfall = budget.n_q - len(picks)
    if shortfall:
        rest = np.array([r for r in members if r not in taken], dtype=int)
        field = center_field(model, rest)
        picks += [(r, p, "center") for r, p in niche_picks(field, features, shortfall, cfg)]
    return [
        QueryRecord(id=int(model.ids[row]), cluster=i, kind=kind, priority=priority)
        for row, priority, kind in picks
    ]


def center_field(model, rows):
    # type: (ClusterModel, np.ndarray) -> PriorityField
    """Cluster representativeness of `rows` as center pass priorities."""
    values = cluster_representativeness(model.center_distances[rows])
    return PriorityField(rows=rows, values=np.atleast_1d(values), kind="center")


class QueryStrategy(BaseModel):
    """Boundary share and clustering stage of a selection run."""

    rho: float | None = Field(
        None, ge=0.0, le=1.0, description="Boundary share per cluster, None uses settings"
    )
    clusterer: FpsClusterer | KMeansClusterer = Field(
        default_factory=FpsClusterer, description="Clustering stage"
    )

    @classmethod
    def from_settings(cls, opts=None, rho=None):
        # type: (AlcsSettings|None, float|None) -> QueryStrategy
        """Strategy with the clustering knobs of `opts` and `rho` (defaults to `opts.rho`)."""
        opts = opts or al_opts
        return cls(
            rho=opts.rho if rho is None else rho, clusterer=FpsClusterer.from_settings(opts)
        )


def select_queries(features, n_q, ids=None, strategy=None):
    # type: (np.ndarray, int, np.ndarray|None, QueryStrategy|None) -> Selection
    """
    Cluster an unlabeled pool and select `n_q` samples to label.

    :param features: Feature rows of the pool (ascending sample ids)
    :param n_q: Number of queries
    :param ids: Sample id per row (defaults to row index)
    :param strategy: Boundary share and clusterer (defaults to settings)
    :return: Cluster model, query plan and selected samples
    """
    strategy = strategy or QueryStrategy()
    model = strategy.clusterer.fit(features, ids=ids)
    plan = allocate_budget(model, n_q, rho=strategy.rho)
    neighbors = neighboring_centers(model) if model.n_clusters >= 2 else None
    queries = hybrid_select(model, neighbors, plan, features)
    name = strategy.clusterer.name
    log.info(f"Selected {len(queries)} queries from {model.n_clusters} {name} clusters")
    return Selection(model, plan, queries)


def query_report(selection, dataset="dataset", opts=None):
    # type: (Selection, str, AlcsSettings|None) -> QueryReport
    """Bundle a selection with its plan, budget fraction and run settings."""
    opts = opts or al_opts
    model, plan, queries = selection
    return QueryReport(
        dataset=dataset,
        n_pool=model.n_samples,
        n_q=len(queries),
        budget_fraction=opts.budget_fraction,
        n_clusters=model.n_clusters,
        plan=plan.per_cluster,
        queries=queries.records,
        config=opts.model_dump(mode="json"),
    )
