"""Float64 array helpers.

Every tensor in this package is a C-contiguous ``numpy.ndarray`` of float64;
row-major flattening of such an array is the canonical serialised form.  The
helpers here coerce and validate, so the rest of the code can assume finite
float64 data throughout.
"""

import numpy as np

from .errors import DimensionError, ValidationError


def as_tensor(data, shape=None):
    """Coerce ``data`` to a finite, C-contiguous float64 array.

    If ``shape`` is given the flat data is reshaped row-major; the element
    count must match exactly.
    """
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if any(s <= 0 for s in shape):
            raise ValidationError(f"shape entries must be positive, got {shape}")
        if arr.size != int(np.prod(shape)):
            raise DimensionError(
                f"cannot view {arr.size} values as shape {shape}"
            )
        arr = arr.reshape(shape)
    require_finite(arr)
    return arr


def require_finite(arr, name="tensor"):
    """Raise ValidationError if ``arr`` contains NaN or Inf."""
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def require_shape(arr, shape, name="tensor"):
    """Raise DimensionError unless ``arr.shape`` equals ``shape``."""
    if tuple(arr.shape) != tuple(shape):
        raise DimensionError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr
