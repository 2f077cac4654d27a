"""Value functions v(x, S) and dense per-point value tables.

A value function says what the model is expected to output when only
the coalition S of features is pinned to the explained point x. Every
instance here is subset-compliant: the result depends on no coordinate
of x outside S, which is exactly what makes the downstream alternating
subset sums produce a well-defined functional decomposition.

Three concrete semantics are provided:

* interventional: average f over the background rows with the S
  columns overwritten by x,
* observational exact-match: empirical conditional mean of f over the
  data rows that agree with x on S bitwise (discrete data only; when no
  row matches, that conditional is undefined and ``NoMatchingRows`` is
  raised rather than silently switching semantics mid-table),
* decomposition-induced: cumulative sums of declared components, the
  canonical value function whose decomposition is the components
  themselves.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .lattice import MAX_DIM, SubsetTable, indices_from_mask, subset_key
from .models import ComponentMap, PredictFn

__all__ = [
    "NoMatchingRows",
    "ValueTable",
    "ValueFunction",
    "InterventionalValueFunction",
    "ObservationalExactMatchValueFunction",
    "GamInducedValueFunction",
    "interventional_value",
    "observational_exactmatch_value",
    "gam_induced_value",
    "build_value_table",
    "as_background",
]


class NoMatchingRows(LookupError):
    """No data row agrees with the explained point on the requested subset."""

    def __init__(self, subset: int, detail: str = ""):
        self.subset = int(subset)
        msg = f"no rows match the explained point on subset {{{subset_key(subset)}}}"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


def as_background(rows, dim: int | None = None) -> np.ndarray:
    """Coerce a background/reference sample to a nonempty (n, dim) float64 matrix."""
    arr = np.ascontiguousarray(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError(f"background must be a nonempty 2-d matrix, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"background has {arr.shape[1]} columns, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("background entries must be finite")
    return arr


def _as_point(point, dim: int) -> np.ndarray:
    arr = np.ascontiguousarray(point, dtype=np.float64)
    if arr.shape != (dim,):
        raise ValueError(f"point must have shape ({dim},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


@dataclass(frozen=True)
class ValueTable:
    """All 2**dim coalition values for one explained point.

    The entry at the full mask equals the model prediction at the point
    (to float64 roundoff) for every value function in this module.
    """

    table: SubsetTable
    point: np.ndarray

    def __post_init__(self):
        point = _as_point(self.point, self.table.dim).copy()
        point.flags.writeable = False
        object.__setattr__(self, "point", point)

    @property
    def dim(self) -> int:
        return self.table.dim

    @property
    def values(self) -> np.ndarray:
        return self.table.values

    def __getitem__(self, mask: int) -> float:
        return float(self.table.values[mask])


class ValueFunction(abc.ABC):
    """Subset-compliant coalition valuation for a fixed model/background."""

    dim: int

    @abc.abstractmethod
    def evaluate(self, point, subset: int) -> float:
        """v(x, S) for one coalition mask."""

    def batch_evaluate(self, point) -> np.ndarray:
        """Dense v(x, .) over all 2**dim masks; overridden with faster paths."""
        x = _as_point(point, self.dim)
        return np.array([self.evaluate(x, mask) for mask in range(1 << self.dim)])


def build_value_table(value_fn: ValueFunction, point) -> ValueTable:
    """Evaluate every coalition for one point and freeze the dense table.

    Entries are always produced with the same per-entry summation order,
    so the result does not depend on batching or parallel scheduling.
    ``NoMatchingRows`` from the observational semantics propagates with
    the offending subset attached.
    """
    if value_fn.dim > MAX_DIM:
        raise ValueError(f"dim {value_fn.dim} exceeds the hard cap of {MAX_DIM}")
    x = _as_point(point, value_fn.dim)
    values = value_fn.batch_evaluate(x)
    return ValueTable(SubsetTable(value_fn.dim, values), x)


# ---------------------------------------------------------------------------
# Interventional semantics
# ---------------------------------------------------------------------------


def _mask_bits(masks: np.ndarray, dim: int) -> np.ndarray:
    return (masks[:, None] >> np.arange(dim)) & 1


def interventional_value(model: PredictFn, background, point, subset: int) -> float:
    """Average of f over the background with the S columns forced to x.

    Rows are used in full and averaged in row order, so repeated calls
    are reproducible byte for byte.
    """
    bg = as_background(background, model.dim)
    x = _as_point(point, model.dim)
    keep = np.array([(subset >> j) & 1 for j in range(model.dim)], dtype=bool)
    hybrid = np.where(keep, x, bg)
    return float(np.mean(model.predict_batch(hybrid)))


class InterventionalValueFunction(ValueFunction):
    """Batched interventional valuation against a fixed background sample."""

    # target rows per model call; keeps child-process batches amortised
    # and bounds the hybrid-matrix working set.
    _TARGET_ROWS = 65536

    def __init__(self, model: PredictFn, background):
        self.model = model
        self.background = as_background(background, model.dim).copy()
        self.background.flags.writeable = False
        self.dim = model.dim

    def evaluate(self, point, subset: int) -> float:
        return interventional_value(self.model, self.background, point, subset)

    def batch_evaluate(self, point) -> np.ndarray:
        x = _as_point(point, self.dim)
        size = 1 << self.dim
        n_bg = self.background.shape[0]
        chunk = max(1, self._TARGET_ROWS // n_bg)
        out = np.empty(size)
        for start in range(0, size, chunk):
            masks = np.arange(start, min(start + chunk, size), dtype=np.int64)
            bits = _mask_bits(masks, self.dim).astype(bool)
            hybrid = np.where(
                bits[:, None, :], x[None, None, :], self.background[None, :, :]
            ).reshape(-1, self.dim)
            preds = self.model.predict_batch(hybrid).reshape(masks.size, n_bg)
            out[start : start + masks.size] = preds.mean(axis=1)
        return out


# ---------------------------------------------------------------------------
# Observational exact-match semantics
# ---------------------------------------------------------------------------


def observational_exactmatch_value(model: PredictFn, data, point, subset: int) -> float:
    """Empirical conditional mean of f given exact agreement with x on S.

    Only meaningful for discrete-valued features. The empty coalition
    yields the global mean of f over the data.
    """
    rows = as_background(data, model.dim)
    x = _as_point(point, model.dim)
    preds = model.predict_batch(rows)
    return _conditional_mean(preds, rows, x, subset)


def _conditional_mean(preds: np.ndarray, rows: np.ndarray, x: np.ndarray, subset: int) -> float:
    cols = list(indices_from_mask(subset))
    if cols:
        match = np.all(rows[:, cols] == x[cols], axis=1)
        if not match.any():
            raise NoMatchingRows(subset)
        return float(np.mean(preds[match]))
    return float(np.mean(preds))


class ObservationalExactMatchValueFunction(ValueFunction):
    """Exact-match conditional expectations over a fixed discrete dataset."""

    def __init__(self, model: PredictFn, data):
        self.model = model
        self.data = as_background(data, model.dim).copy()
        self.data.flags.writeable = False
        self.dim = model.dim
        # f evaluated once per data row; every conditional reuses these.
        self._predictions = np.asarray(model.predict_batch(self.data), dtype=np.float64)

    def evaluate(self, point, subset: int) -> float:
        x = _as_point(point, self.dim)
        return _conditional_mean(self._predictions, self.data, x, subset)

    def batch_evaluate(self, point) -> np.ndarray:
        x = _as_point(point, self.dim)
        out = np.empty(1 << self.dim)
        for mask in range(1 << self.dim):
            out[mask] = _conditional_mean(self._predictions, self.data, x, mask)
        return out


# ---------------------------------------------------------------------------
# Decomposition-induced semantics
# ---------------------------------------------------------------------------


def gam_induced_value(components: ComponentMap, point, subset: int) -> float:
    """v(x, S) = sum of g_L(x_L) over L subset of S."""
    x = _as_point(point, components.dim)
    row = x[None, :]
    total = 0.0
    for mask in components.masks():
        if mask & ~subset:
            continue
        total += float(components.evaluate_mask(row, mask)[0])
    return total


class GamInducedValueFunction(ValueFunction):
    """The canonical value function of a declared component decomposition.

    Its dense table is the cumulative-subset-sum transform of the
    pointwise component table, so inverting the table recovers the
    declared components exactly.
    """

    def __init__(self, components: ComponentMap):
        self.components = components
        self.dim = components.dim

    def evaluate(self, point, subset: int) -> float:
        return gam_induced_value(self.components, point, subset)

    def batch_evaluate(self, point) -> np.ndarray:
        x = _as_point(point, self.dim)
        table = self.components.component_table(x)
        return _kernels.zeta_subsets(table, self.dim)
