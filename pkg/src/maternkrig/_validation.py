"""Input coercion shared by the estimator and the functional API."""
import numpy as np
from sklearn.utils.validation import check_array

from .designs import Design


def as_points(points, dim=None, name="points"):
    """Return a float (n, d) array; 1-D input is read as n points in d=1."""
    if isinstance(points, Design):
        points = points.points
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim in (None, 1) else arr.reshape(1, -1)
    arr = check_array(arr, ensure_2d=True, dtype=np.float64, input_name=name)
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"{name} has {arr.shape[1]} columns, expected {dim}")
    return arr


def as_query_point(x, dim):
    """A single point as a (1, d) array; scalars are accepted in d=1."""
    return as_points(np.atleast_1d(np.asarray(x, dtype=float)), dim=dim, name="x")
