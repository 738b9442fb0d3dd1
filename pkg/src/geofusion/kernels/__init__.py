"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time: numba if it is importable and
the environment variable ``GEOFUSION_NO_NUMBA`` is unset/empty, otherwise
plain numpy. `benchmarks/bench_kernels.py` compares the two.
"""

import os

from . import numpy_impl

if os.environ.get("GEOFUSION_NO_NUMBA"):
    _impl = numpy_impl
    _BACKEND = "numpy"
else:
    try:
        from . import numba_impl as _impl

        _BACKEND = "numba"
    except ImportError:
        _impl = numpy_impl
        _BACKEND = "numpy"

knn_edges = _impl.knn_edges
radius_edges = _impl.radius_edges
nearest_centroid = _impl.nearest_centroid
segment_sum = _impl.segment_sum
edge_conv_forward = _impl.edge_conv_forward
edge_conv_backward = _impl.edge_conv_backward
group_sum = _impl.group_sum
group_max = _impl.group_max


def backend() -> str:
    """Name of the active kernel backend ("numba" or "numpy")."""
    return _BACKEND
