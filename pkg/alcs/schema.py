# -*- coding: utf-8 -*-
from typing import Annotated, Literal, Optional
import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator


def frozen_array(value):
    # type: (object) -> np.ndarray
    """Copy value into a read-only numpy array."""
    if value is None:
        return None
    arr = np.array(value, copy=True)
    arr.setflags(write=False)
    return arr


# Numeric containers hold read-only copies so that validated invariants stay valid
Array = Annotated[np.ndarray, BeforeValidator(frozen_array)]

Normalization = Literal["none", "min-max", "z-score"]
QueryKind = Literal["center", "boundary", "random"]


class Frozen(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class Sample(BaseModel):
    id: int = Field(..., ge=0, description="Row index within the dataset")
    features: list[float] = Field(..., description="Feature vector")
    label: Optional[str] = Field(None, description="Held-back ground truth label")


class Dataset(Frozen):
    """Feature matrix with optional labels. Row index is the sample id."""

    name: str = Field("dataset", description="Dataset name used in reports")
    features: Array = Field(..., description="Feature matrix of shape (n, d)")
    labels: Optional[Array] = Field(None, description="Class label per row as strings")
    feature_names: list[str] = Field(default_factory=list, description="Feature column names")
    normalization: Normalization = Field("none", description="Transform applied to features")

    @model_validator(mode="after")
    def check_shapes(self):
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-dimensional, got shape {self.features.shape}")
        if not np.issubdtype(self.features.dtype, np.floating):
            raise ValueError(f"features must be real valued, got {self.features.dtype}")
        if self.labels is not None and self.labels.shape != (self.features.shape[0],):
            raise ValueError(
                f"labels shape {self.labels.shape} does not match {self.features.shape[0]} rows"
            )
        if self.feature_names and len(self.feature_names) != self.features.shape[1]:
            raise ValueError("feature_names length does not match feature dimension")
        return self

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.n_samples)

    @property
    def class_set(self) -> tuple[str, ...]:
        if self.labels is None:
            return ()
        return tuple(sorted(set(self.labels.tolist())))

    def sample(self, i):
        # type: (int) -> Sample
        label = None if self.labels is None else str(self.labels[i])
        return Sample(id=i, features=self.features[i].tolist(), label=label)

    def features_view(self, ids=None):
        # type: (np.ndarray|list[int]|None) -> np.ndarray
        """Read-only feature rows without labels."""
        if ids is None:
            return self.features
        view = self.features[np.asarray(ids, dtype=int)]
        view.setflags(write=False)
        return view


class PoolSplit(Frozen):
    """Disjoint labeled, unlabeled and test id sets covering a dataset."""

    labeled_ids: Array = Field(..., description="Ids with known labels")
    unlabeled_ids: Array = Field(..., description="Ids available for querying")
    test_ids: Array = Field(..., description="Held-out evaluation ids")
    seed: int = Field(..., description="Seed used to draw the split")
    stratified: bool = Field(True, description="False when a class was too small to stratify")

    @model_validator(mode="after")
    def check_partition(self):
        parts = [self.labeled_ids, self.unlabeled_ids, self.test_ids]
        merged = np.concatenate(parts).astype(int)
        if len(np.unique(merged)) != len(merged):
            raise ValueError("labeled, unlabeled and test ids must be pairwise disjoint")
        if len(merged) and not np.array_equal(np.sort(merged), np.arange(len(merged))):
            raise ValueError("split must cover ids 0..n-1 exactly once")
        return self

    @property
    def n_unlabeled(self) -> int:
        return len(self.unlabeled_ids)

    def with_labeled(self, ids):
        # type: (list[int]|np.ndarray) -> PoolSplit
        """Return a new split with `ids` moved from the unlabeled to the labeled set."""
        ids = np.asarray(ids, dtype=int)
        missing = np.setdiff1d(ids, self.unlabeled_ids)
        if len(missing):
            raise ValueError(f"ids {missing.tolist()} are not in the unlabeled pool")
        return PoolSplit(
            labeled_ids=np.union1d(self.labeled_ids, ids).astype(int),
            unlabeled_ids=np.setdiff1d(self.unlabeled_ids, ids).astype(int),
            test_ids=self.test_ids,
            seed=self.seed,
            stratified=self.stratified,
        )


class LabeledSet(Frozen):
    """Samples with known labels, as returned by the oracle."""

    ids: Array = Field(..., description="Sample ids")
    features: Array = Field(..., description="Feature rows of the samples")
    labels: Array = Field(..., description="Class label per sample")

    @model_validator(mode="after")
    def check_lengths(self):
        if not len(self.ids) == len(self.features) == len(self.labels):
            raise ValueError("ids, features and labels must have the same length")
        return self

    def __len__(self):
        return len(self.ids)


class ClusterModel(Frozen):
    """Cluster information: centers plus each member's distance to its center."""

    ids: Array = Field(..., description="Sample id of each clustered row")
    centers: Array = Field(..., description="Center vectors of shape (c, d)")
    center_ids: Array = Field(..., description="Sample id used as center, -1 if synthetic")
    assignments: Array = Field(..., description="Cluster index per row")
    center_distances: Array = Field(..., description="Distance of each row to its center")

    @model_validator(mode="after")
    def check_consistency(self):
        n, c = len(self.ids), len(self.centers)
        if c < 1:
            raise ValueError("a cluster model needs at least one center")
        if self.assignments.shape != (n,) or self.center_distances.shape != (n,):
            raise ValueError("assignments and center_distances need one entry per row")
        if n and (self.assignments.min() < 0 or self.assignments.max() >= c):
            raise ValueError("assignment refers to an unknown cluster")
        return self

    @property
    def n_clusters(self) -> int:
        return len(self.centers)

    @property
    def n_samples(self) -> int:
        return len(self.ids)

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.n_clusters)

    def members(self, i):
        # type: (int) -> np.ndarray
        """Row indices belonging to cluster i, ascending."""
        return np.flatnonzero(self.assignments == i)


class NeighborInfo(Frozen):
    """The two nearest other centers of every cluster."""

    nc1: Array = Field(..., description="Index of the nearest other center")
    nc2: Array = Field(..., description="Index of the second nearest other center")
    d_ref1: Array = Field(..., description="Distance to the nearest other center")
    d_ref2: Array = Field(..., description="Distance to the second nearest other center")


class NicheConfig(BaseModel):
    radius: float = Field(..., ge=0.0, description="Neighborhood radius of a niche")
    k: int = Field(..., ge=1, description="Neighbors averaged in the radius estimate")


class PriorityField(Frozen):
    """Initial query priorities of a set of rows."""

    rows: Array = Field(..., description="Row indices the priorities belong to")
    values: Array = Field(..., description="Priority per row")
    kind: Literal["center", "boundary"] = Field(..., description="CR or CU priorities")

    @model_validator(mode="after")
    def check_values(self):
        if self.rows.shape != self.values.shape:
            raise ValueError("rows and values must have the same length")
        if len(self.values) and (self.values.min() <= 0.0 or self.values.max() > 0.5):
            raise ValueError("priorities must lie in (0, 0.5]")
        return self


class ClusterBudget(BaseModel):
    cluster: int = Field(..., ge=0, description="Cluster index")
    size: int = Field(..., ge=0, description="Number of members")
    n_q: int = Field(..., ge=0, description="Queries spent on this cluster")
    rho: float = Field(..., ge=0.0, le=1.0, description="Boundary share of the cluster budget")
    boundary_count: int = Field(..., ge=0, description="Queries from the boundary pass")
    center_count: int = Field(..., ge=0, description="Queries from the center pass")

    @model_validator(mode="after")
    def check_counts(self):
        if self.boundary_count + self.center_count != self.n_q:
            raise ValueError("boundary_count + center_count must equal n_q")
        if self.n_q > self.size:
            raise ValueError(f"cluster {self.cluster} budget {self.n_q} exceeds its size")
        return self


class QueryPlan(BaseModel):
    total_budget: int = Field(..., ge=1, description="Total number of queries n_q")
    per_cluster: list[ClusterBudget] = Field(..., description="Budget per cluster")

    @model_validator(mode="after")
    def check_total(self):
        if sum(b.n_q for b in self.per_cluster) != self.total_budget:
            raise ValueError("per-cluster budgets must sum to the total budget")
        return self

    @property
    def rho(self) -> list[float]:
        return [b.rho for b in self.per_cluster]


class QueryRecord(BaseModel):
    id: int = Field(..., ge=0, description="Selected sample id")
    cluster: Optional[int] = Field(None, description="Cluster the sample was selected from")
    kind: QueryKind = Field(..., description="Selection pass that picked the sample")
    priority: Optional[float] = Field(None, description="Priority at selection time")


class QuerySet(BaseModel):
    records: list[QueryRecord] = Field(default_factory=list, description="Selected samples")

    @model_validator(mode="after")
    def check_unique(self):
        if len(set(self.ids)) != len(self.records):
            raise ValueError("query set contains duplicate ids")
        return self

    @property
    def ids(self) -> list[int]:
        return [r.id for r in self.records]

    def __len__(self):
        return len(self.records)


class ClusterSummary(BaseModel):
    index: int = Field(..., description="Cluster index")
    center: list[float] = Field(..., description="Center vector")
    center_id: int = Field(..., description="Sample id of the center, -1 if synthetic")
    size: int = Field(..., description="Number of members")
    members: list[int] = Field(..., description="Member sample ids")


class ClusterReport(BaseModel):
    dataset: str = Field(..., description="Dataset name")
    n_samples: int = Field(..., description="Number of clustered samples")
    n_clusters: int = Field(..., ge=1, description="Number of clusters found")
    clusters: list[ClusterSummary] = Field(..., description="Per-cluster summary")
    config: dict = Field(default_factory=dict, description="Effective configuration")


class QueryReport(BaseModel):
    dataset: str = Field(..., description="Dataset name")
    n_pool: int = Field(..., description="Size of the unlabeled pool")
    n_q: int = Field(..., description="Number of selected samples")
    budget_fraction: float = Field(..., description="Requested fraction of the pool")
    rounding: str = Field(
        "n_q = round_half_even(budget_fraction * n_pool)", description="Budget rounding rule"
    )
    n_clusters: int = Field(..., description="Clusters found in the pool")
    plan: list[ClusterBudget] = Field(..., description="Per-cluster budgets")
    queries: list[QueryRecord] = Field(..., description="Selected samples with provenance")
    config: dict = Field(default_factory=dict, description="Effective configuration")


class ExperimentReport(BaseModel):
    dataset: str = Field(..., description="Dataset name")
    strategy: str = Field(..., description="Sampling strategy")
    seed: int = Field(..., description="Seed of the cell")
    n_q: int = Field(..., ge=1, description="Number of queried labels")
    budget_fraction: float = Field(..., description="Requested fraction of the pool")
    n_pool: int = Field(..., description="Size of the unlabeled pool")
    n_test: int = Field(..., description="Size of the held-out test split")
    stratified: bool = Field(..., description="Whether the split was stratified by class")
    accuracy: float = Field(..., ge=0.0, le=1.0, description="Test accuracy")
    macro_f1: float = Field(..., ge=0.0, le=1.0, description="Test macro-averaged F1")
    clusters_found: Optional[int] = Field(None, ge=1, description="Clusters found (ALCS only)")
    oracle_queries: int = Field(..., description="Labels requested from the oracle")
    protocol: str = Field(
        "stratified held-out test split, queries drawn from the remaining pool, k-NN",
        description="Evaluation protocol",
    )
    wall_time: float = Field(0.0, description="Seconds spent on the cell")
    config: dict = Field(default_factory=dict, description="Effective configuration")


class RankTable(BaseModel):
    metric: str = Field(..., description="Metric the ranks are computed on")
    higher_is_better: bool = Field(True, description="Rank 1 goes to the largest value")
    per_dataset: dict[str, dict[str, float]] = Field(..., description="Rank per dataset")
    average: dict[str, float] = Field(..., description="Mean rank per strategy")
