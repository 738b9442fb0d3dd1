import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from geofusion.data.cloud import PointCloud


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_cloud(rng, n=20, f=3, scale=1.0) -> PointCloud:
    return PointCloud(
        positions=rng.normal(scale=scale, size=(n, 3)),
        features=rng.normal(size=(n, f)),
    )
