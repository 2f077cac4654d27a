"""Prediction functions that can be explained.

Everything here satisfies one contract: a model has a ``dim`` and a
deterministic ``predict_batch`` mapping an (n, dim) array of points to n
float64 outputs, with ``predict`` the single-point convenience. Two
calls with identical input bytes produce identical output bytes.

Built-ins:

* additive models assembled from a tiny closed-form component grammar
  (constants, per-feature polynomials up to degree 4, sines, step
  functions, products across features) or gridded lookup tables with
  multilinear interpolation,
* the checkerboard family, a pure order-n interaction benchmark,
* a k-nearest-neighbour regressor/probability scorer,
* a line-oriented subprocess bridge for attaching external models.
"""

from __future__ import annotations

import abc
import queue
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass
from itertools import chain

import numpy as np

from . import _kernels
from .lattice import MAX_DIM, mask_from_indices, popcount

__all__ = [
    "PredictFn",
    "Component",
    "ConstantComponent",
    "ProductComponent",
    "LookupComponent",
    "PolyFactor",
    "SineFactor",
    "StepFactor",
    "ComponentMap",
    "AdditiveModel",
    "additive_model",
    "CheckerboardSpec",
    "checkerboard",
    "cell_center_grid",
    "knn_model",
    "KnnModel",
    "external_model",
    "ExternalModel",
    "ProcessFailed",
    "ProtocolTimeout",
    "fit_additive_marginal_means",
]


def as_points(points, dim: int) -> np.ndarray:
    """Coerce to a contiguous (n, dim) float64 matrix."""
    arr = np.ascontiguousarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {arr.shape}")
    return arr


class PredictFn(abc.ABC):
    """Deterministic real-valued function of dim features."""

    dim: int

    @abc.abstractmethod
    def predict_batch(self, points) -> np.ndarray:
        """Predictions for an (n, dim) array, elementwise equal to predict."""

    def predict(self, point) -> float:
        return float(self.predict_batch(as_points(point, self.dim))[0])


# ---------------------------------------------------------------------------
# Component grammar
# ---------------------------------------------------------------------------


class Component(abc.ABC):
    """One additive term g_S: reads only the feature columns in ``features``."""

    features: tuple[int, ...]

    @property
    def mask(self) -> int:
        return mask_from_indices(self.features)

    @abc.abstractmethod
    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Values on an (n, d) matrix of full points; uses only own columns."""


def _check_features(features) -> tuple[int, ...]:
    feats = tuple(int(i) for i in features)
    if any(b <= a for a, b in zip(feats, feats[1:])):
        raise ValueError(f"feature indices must be strictly ascending, got {feats}")
    if feats and feats[0] < 0:
        raise ValueError(f"feature indices must be >= 0, got {feats}")
    return feats


@dataclass(frozen=True)
class ConstantComponent(Component):
    value: float
    features: tuple[int, ...] = ()

    def __post_init__(self):
        if self.features != ():
            raise ValueError("a constant component takes no features")

    def evaluate(self, points):
        return np.full(points.shape[0], float(self.value))


@dataclass(frozen=True)
class PolyFactor:
    """Polynomial in one feature, degree at most 4: coeffs[k] * x**k."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not 1 <= len(coeffs) <= 5:
            raise ValueError("polynomial factors support degree 0..4")
        object.__setattr__(self, "coeffs", coeffs)

    def __call__(self, col: np.ndarray) -> np.ndarray:
        out = np.full(col.shape, self.coeffs[-1])
        for c in self.coeffs[-2::-1]:
            out = out * col + c
        return out


@dataclass(frozen=True)
class SineFactor:
    frequency: float = 1.0
    phase: float = 0.0

    def __call__(self, col: np.ndarray) -> np.ndarray:
        return np.sin(self.frequency * col + self.phase)


@dataclass(frozen=True)
class StepFactor:
    """1 where x >= threshold, else 0."""

    threshold: float = 0.0

    def __call__(self, col: np.ndarray) -> np.ndarray:
        return np.where(col >= self.threshold, 1.0, 0.0)


@dataclass(frozen=True)
class ProductComponent(Component):
    """coefficient * product over features of a per-feature factor."""

    features: tuple[int, ...]
    factors: tuple
    coefficient: float = 1.0

    def __post_init__(self):
        feats = _check_features(self.features)
        if not feats:
            raise ValueError("product components need at least one feature")
        factors = tuple(self.factors)
        if len(factors) != len(feats):
            raise ValueError("need exactly one factor per feature")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    def evaluate(self, points):
        out = np.full(points.shape[0], self.coefficient)
        for idx, factor in zip(self.features, self.factors):
            out = out * factor(points[:, idx])
        return out


class LookupComponent(Component):
    """Gridded term: multilinear interpolation on a uniform per-axis grid.

    Queries outside the grid are clamped to the boundary; every batch
    that clamps at least one row bumps ``clamped_evaluations`` by the
    number of affected rows (advisory diagnostics, not thread-exact).
    """

    def __init__(self, features, lo, hi, values):
        self.features = _check_features(features)
        if not self.features:
            raise ValueError("lookup components need at least one feature")
        m = len(self.features)
        grid = np.ascontiguousarray(values, dtype=np.float64)
        if grid.ndim != m:
            raise ValueError(f"grid must have {m} axes, got {grid.ndim}")
        if any(n < 2 for n in grid.shape):
            raise ValueError("grid needs at least 2 points per axis")
        if not np.all(np.isfinite(grid)):
            raise ValueError("grid values must be finite")
        self._lo = np.ascontiguousarray(lo, dtype=np.float64)
        hi_arr = np.ascontiguousarray(hi, dtype=np.float64)
        if self._lo.shape != (m,) or hi_arr.shape != (m,):
            raise ValueError(f"lo/hi must have {m} entries")
        if np.any(hi_arr <= self._lo):
            raise ValueError("hi must exceed lo on every axis")
        self._npts = np.array(grid.shape, dtype=np.int64)
        self._step = (hi_arr - self._lo) / (self._npts - 1)
        self._hi = hi_arr
        self._flat = grid.ravel()
        self._grid = grid
        self.clamped_evaluations = 0

    @property
    def lo(self) -> np.ndarray:
        return self._lo.copy()

    @property
    def hi(self) -> np.ndarray:
        return self._hi.copy()

    @property
    def grid(self) -> np.ndarray:
        return self._grid.copy()

    def evaluate(self, points):
        cols = np.ascontiguousarray(points[:, list(self.features)], dtype=np.float64)
        out, clamped = _kernels.interp_multilinear(
            cols, self._lo, self._step, self._npts, self._flat
        )
        if clamped:
            self.clamped_evaluations += clamped
        return out


class ComponentMap:
    """A declarative sum f(x) = sum over subsets S of g_S(x_S).

    Multiple components on the same subset simply add. The map is
    immutable once built and safe to evaluate concurrently.
    """

    def __init__(self, dim: int, components):
        if not 0 <= dim <= MAX_DIM:
            raise ValueError(f"dim must be in [0, {MAX_DIM}], got {dim}")
        self.dim = dim
        grouped: dict[int, list[Component]] = {}
        for comp in components:
            mask = comp.mask
            if mask >> dim:
                raise ValueError(
                    f"component over features {comp.features} does not fit dim={dim}"
                )
            grouped.setdefault(mask, []).append(comp)
        self._by_mask = {mask: tuple(grouped[mask]) for mask in sorted(grouped)}
        self.order = max((popcount(m) for m in self._by_mask), default=0)

    def masks(self) -> tuple[int, ...]:
        return tuple(self._by_mask)

    def components(self, mask: int) -> tuple[Component, ...]:
        return self._by_mask.get(mask, ())

    def all_components(self) -> tuple[Component, ...]:
        return tuple(chain.from_iterable(self._by_mask.values()))

    def evaluate_mask(self, points: np.ndarray, mask: int) -> np.ndarray:
        out = np.zeros(points.shape[0])
        for comp in self._by_mask.get(mask, ()):
            out += comp.evaluate(points)
        return out

    def component_table(self, point) -> np.ndarray:
        """Dense per-subset values g_S(x) at a single point (zeros off support)."""
        row = as_points(point, self.dim)
        table = np.zeros(1 << self.dim)
        for mask, comps in self._by_mask.items():
            table[mask] = sum(float(c.evaluate(row)[0]) for c in comps)
        return table

    def predict_batch(self, points: np.ndarray) -> np.ndarray:
        out = np.zeros(points.shape[0])
        for comps in self._by_mask.values():
            for comp in comps:
                out += comp.evaluate(points)
        return out


class AdditiveModel(PredictFn):
    """PredictFn wrapper around a ComponentMap."""

    def __init__(self, components: ComponentMap):
        self.components = components
        self.dim = components.dim

    @property
    def order(self) -> int:
        return self.components.order

    @property
    def clamped_evaluations(self) -> int:
        """Total boundary clamps across all lookup components."""
        return sum(
            comp.clamped_evaluations
            for comp in self.components.all_components()
            if isinstance(comp, LookupComponent)
        )

    def predict_batch(self, points):
        return self.components.predict_batch(as_points(points, self.dim))


def additive_model(components: ComponentMap) -> AdditiveModel:
    """Model f(x) = sum of the component values; the empty map is identically 0."""
    return AdditiveModel(components)


# ---------------------------------------------------------------------------
# Checkerboard
# ---------------------------------------------------------------------------

_EDGE = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class CheckerboardSpec:
    """Parity-product benchmark on [0,1]**dim.

    granularity is the number of cells per axis and must be even: with
    even granularity each parity factor averages to exactly zero over
    the per-axis cell centers, which concentrates the whole interaction
    on the full active set.
    """

    dim: int
    granularity: int = 2
    active: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 1 <= self.dim <= MAX_DIM:
            raise ValueError(f"dim must be in [1, {MAX_DIM}], got {self.dim}")
        if self.granularity < 2 or self.granularity % 2:
            raise ValueError(
                f"granularity must be even and >= 2, got {self.granularity}"
            )
        active = self.active
        if active is None:
            active = tuple(range(self.dim))
        else:
            active = _check_features(active)
            if not active:
                raise ValueError("active feature list must be nonempty")
            if active[-1] >= self.dim:
                raise ValueError(f"active features {active} out of range for dim={self.dim}")
        object.__setattr__(self, "active", active)


class CheckerboardModel(PredictFn):
    def __init__(self, spec: CheckerboardSpec):
        self.spec = spec
        self.dim = spec.dim

    def predict_batch(self, points):
        pts = as_points(points, self.dim)
        cols = np.clip(pts[:, list(self.spec.active)], 0.0, _EDGE)
        parity = np.floor(cols * self.spec.granularity).astype(np.int64) & 1
        signs = 1.0 - 2.0 * parity
        return 0.5 * (1.0 + signs.prod(axis=1))


def checkerboard(spec: CheckerboardSpec) -> CheckerboardModel:
    """f(x) = (1 + product of per-axis cell parities) / 2, inputs clamped to [0,1]."""
    return CheckerboardModel(spec)


def cell_center_grid(dim: int, granularity: int) -> np.ndarray:
    """The full product grid of per-axis cell centers, (granularity**dim, dim)."""
    if granularity < 1:
        raise ValueError("granularity must be >= 1")
    if granularity**dim > 1 << 22:
        raise ValueError(f"grid of {granularity}**{dim} rows is too large")
    centers = (np.arange(granularity) + 0.5) / granularity
    grids = np.meshgrid(*([centers] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


# ---------------------------------------------------------------------------
# k-nearest neighbours
# ---------------------------------------------------------------------------


class KnnModel(PredictFn):
    """Mean label of the k nearest training rows under Euclidean distance.

    Distance ties break toward the lower row index, so predictions are
    deterministic. Returns the label mean (a probability-like score for
    0/1 labels), never a hard class.
    """

    _CHUNK = 2048

    def __init__(self, train, labels, k: int):
        self.train = np.array(train, dtype=np.float64)
        if self.train.ndim != 2 or self.train.shape[0] == 0:
            raise ValueError("training set must be a nonempty (n, dim) matrix")
        self.labels = np.array(labels, dtype=np.float64)
        if self.labels.shape != (self.train.shape[0],):
            raise ValueError("labels must align with training rows")
        if not 1 <= k <= self.train.shape[0]:
            raise ValueError(f"k must be in [1, {self.train.shape[0]}], got {k}")
        self.k = int(k)
        self.dim = self.train.shape[1]

    def predict_batch(self, points):
        pts = as_points(points, self.dim)
        out = np.empty(pts.shape[0])
        for start in range(0, pts.shape[0], self._CHUNK):
            block = pts[start : start + self._CHUNK]
            d2 = ((block[:, None, :] - self.train[None, :, :]) ** 2).sum(axis=2)
            nearest = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
            out[start : start + block.shape[0]] = self.labels[nearest].mean(axis=1)
        return out


def knn_model(train, labels, k: int) -> KnnModel:
    return KnnModel(train, labels, k)


def fit_additive_marginal_means(points, labels) -> AdditiveModel:
    """One-pass additive fit on evenly spaced discrete features.

    Builds, per feature, a lookup component holding the centered
    conditional label mean at each observed feature value, plus a
    constant at the global mean. This is the simplest honest additive
    baseline for discrete data; it needs every feature's observed
    values to form an evenly spaced grid.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    y = np.ascontiguousarray(labels, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0 or y.shape != (pts.shape[0],):
        raise ValueError("need a nonempty (n, d) matrix with aligned labels")
    grand_mean = float(y.mean())
    comps: list[Component] = [ConstantComponent(grand_mean)]
    for j in range(pts.shape[1]):
        values = np.unique(pts[:, j])
        if values.size < 2:
            continue
        steps = np.diff(values)
        if not np.allclose(steps, steps[0], rtol=0, atol=1e-9):
            raise ValueError(f"feature {j} is not evenly spaced discrete")
        means = np.array(
            [y[pts[:, j] == v].mean() - grand_mean for v in values]
        )
        comps.append(
            LookupComponent((j,), [values[0]], [values[-1]], means)
        )
    return additive_model(ComponentMap(pts.shape[1], comps))


# ---------------------------------------------------------------------------
# External models over a child-process pipe
# ---------------------------------------------------------------------------


class ProcessFailed(RuntimeError):
    """The child process exited abnormally or sent a malformed reply."""


class ProtocolTimeout(RuntimeError):
    """The child process did not answer a batch within the deadline."""


_PROTOCOL_HEADER = "NSHAP-MODEL-V1"


class ExternalModel(PredictFn):
    """Batch bridge to a model running in a child process.

    Wire protocol, line oriented over the child's stdin/stdout:

        engine -> model   "NSHAP-MODEL-V1 <dim> <row_count>"
                          row_count lines of dim comma-separated floats
                          "END"
        model -> engine   row_count lines, one float each
                          "END"

    Floats travel in round-trip decimal form (up to 17 significant
    digits). A process serves any number of batches and is shut down by
    closing its stdin. Access is serialised internally; value-table
    construction batches coalitions so per-call overhead stays amortised.
    """

    def __init__(self, command: str, dim: int, timeout: float = 60.0):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.command = command
        self.dim = dim
        self.timeout = float(timeout)
        self._argv = shlex.split(command)
        if not self._argv:
            raise ValueError("empty command")
        self._lock = threading.Lock()
        self._proc: subprocess.Popen | None = None
        self._replies: queue.Queue = queue.Queue()

    def _start(self):
        try:
            self._proc = subprocess.Popen(
                self._argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ProcessFailed(f"could not spawn {self.command!r}: {exc}") from exc
        # fresh queue per process: a killed predecessor must not leak
        # stale lines or its EOF sentinel into the new conversation
        self._replies = queue.Queue()
        stdout = self._proc.stdout
        replies = self._replies

        def pump():
            for line in stdout:
                replies.put(line)
            replies.put(None)  # EOF sentinel

        threading.Thread(target=pump, daemon=True).start()

    def _fail(self, message: str) -> ProcessFailed:
        code = None
        if self._proc is not None:
            try:
                code = self._proc.wait(timeout=1.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                code = self._proc.wait()
        self._proc = None
        suffix = f" (exit status {code})" if code is not None else ""
        return ProcessFailed(message + suffix)

    def _read_line(self, deadline: float) -> str:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            self._kill()
            raise ProtocolTimeout(
                f"model {self.command!r} exceeded {self.timeout}s for one batch"
            )
        try:
            line = self._replies.get(timeout=remaining)
        except queue.Empty:
            self._kill()
            raise ProtocolTimeout(
                f"model {self.command!r} exceeded {self.timeout}s for one batch"
            ) from None
        if line is None:
            raise self._fail(f"model {self.command!r} closed its output mid-batch")
        return line.rstrip("\n")

    def _kill(self):
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def predict_batch(self, points):
        pts = as_points(points, self.dim)
        n = pts.shape[0]
        with self._lock:
            if self._proc is None:
                self._start()
            proc = self._proc
            request = [f"{_PROTOCOL_HEADER} {self.dim} {n}"]
            request.extend(",".join(repr(v) for v in row) for row in pts.tolist())
            request.append("END")
            try:
                proc.stdin.write("\n".join(request) + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError):
                raise self._fail(f"model {self.command!r} closed its input") from None
            deadline = time.monotonic() + self.timeout
            out = np.empty(n)
            for i in range(n):
                line = self._read_line(deadline)
                try:
                    out[i] = float(line)
                except ValueError:
                    raise self._fail(
                        f"model {self.command!r} sent malformed reply line "
                        f"{i + 1}: {line!r}"
                    ) from None
            tail = self._read_line(deadline)
            if tail != "END":
                raise self._fail(
                    f"model {self.command!r} sent {tail!r} where END was expected "
                    f"(reply line {n + 1})"
                )
            return out

    def close(self):
        """Close the child's stdin and wait for it to exit."""
        with self._lock:
            if self._proc is None:
                return
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def external_model(command: str, dim: int, timeout: float = 60.0) -> ExternalModel:
    return ExternalModel(command, dim, timeout=timeout)
