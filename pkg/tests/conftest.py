import numpy as np
import pytest
from alcs.clustering import model_from_centers
from alcs.data import make_blobs, normalize
from alcs.schema import ClusterModel


def model_with_sizes(sizes):
    # type: (list[int]) -> ClusterModel
    """Cluster model on a line with clusters 100 units apart and the given sizes."""
    centers = np.array([[100.0 * i] for i in range(len(sizes))])
    points = [100.0 * i + np.linspace(-1.0, 1.0, size) for i, size in enumerate(sizes)]
    features = np.concatenate(points)[:, None]
    return model_from_centers(features, centers)


@pytest.fixture
def blobs3():
    return normalize(make_blobs(3, 40, overlap=0.1, seed=3))

