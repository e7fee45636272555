"""Connected-component kernels with a compiled fast path.

The compiled Cython extension is preferred when present; a pure numpy
implementation is the fallback. Both produce bit-identical outputs
(canonical component numbering is raster order of first pixel). Set
``UVSEG_MASKOPS=python`` or ``UVSEG_MASKOPS=cython`` to force a backend,
e.g. for the benchmark in ``benchmarks/bench_maskops.py``.
"""

import os
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, InvalidInputError
from . import _fallback

try:
    from . import _kernels
except ImportError:  # extension not built; numpy fallback still works
    _kernels = None


def _select_backend():
    choice = os.environ.get("UVSEG_MASKOPS", "auto").lower()
    if choice == "python":
        return "python", _fallback.label_and_stats
    if choice == "cython":
        if _kernels is None:
            raise ConfigError(
                "UVSEG_MASKOPS=cython but the compiled extension is not built"
            )
        return "cython", _kernels.label_and_stats
    if choice != "auto":
        raise ConfigError(f"unknown UVSEG_MASKOPS backend {choice!r}")
    if _kernels is not None:
        return "cython", _kernels.label_and_stats
    return "python", _fallback.label_and_stats


BACKEND, _label_and_stats = _select_backend()


def available_backends():
    names = ["python"]
    if _kernels is not None:
        names.insert(0, "cython")
    return tuple(names)


def get_backend_fn(name):
    """Implementation lookup by name, used by tests and the benchmark."""
    if name == "python":
        return _fallback.label_and_stats
    if name == "cython":
        if _kernels is None:
            raise ConfigError("compiled maskops extension is not built")
        return _kernels.label_and_stats
    raise ConfigError(f"unknown maskops backend {name!r}")


@dataclass
class ComponentStats:
    """Per-component reductions over a label map.

    ``bboxes`` rows are (y0, x0, y1, x1) with half-open intervals;
    ``centroids`` rows are (y, x) pixel-center means.
    """

    count: int
    areas: np.ndarray
    bboxes: np.ndarray
    centroids: np.ndarray


def _as_binary(mask):
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise InvalidInputError(f"mask must be 2-D, got shape {mask.shape}")
    if mask.dtype != np.uint8:
        if mask.dtype == bool:
            mask = mask.astype(np.uint8)
        else:
            vals = np.unique(mask)
            if not np.isin(vals, (0, 1)).all():
                raise InvalidInputError("mask must be binary (values in {0, 1})")
            mask = mask.astype(np.uint8)
    return np.ascontiguousarray(mask)


def label_components(mask, connectivity=8):
    """Label foreground components; returns (labels int32 HxW, count).

    Components are numbered 1..count in raster order of first pixel,
    identically across backends.
    """
    if connectivity not in (4, 8):
        raise InvalidInputError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, count, _, _, _ = _label_and_stats(_as_binary(mask), connectivity)
    return labels, count


def component_stats(mask, connectivity=8):
    """Label components and reduce their stats in one pass."""
    if connectivity not in (4, 8):
        raise InvalidInputError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, count, areas, bboxes, centroids = _label_and_stats(
        _as_binary(mask), connectivity
    )
    return labels, ComponentStats(count, areas, bboxes, centroids)
