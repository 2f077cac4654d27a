"""The attribution engine: contribution measures, order-n interaction
indices, the full functional decomposition of a value table, and the
linear maps that connect them.

Terminology used throughout:

* value table: the dense map S -> v(x, S) for one explained point.
* decomposition (order d index): the alternating-sign inversion of the
  value table; its entries are the per-subset component values f_S(x_S)
  and they sum (with the baseline) back to the prediction.
* order-n index: attributions Phi_S for every coalition with
  1 <= |S| <= n. Order 1 is the classic per-feature attribution, order
  d is the decomposition itself.

The production route is value table -> inversion -> linear combination
with exact mixing coefficients (O(d * 2**d) plus one sweep per
cardinality). The direct route through the contribution measure and the
Bernoulli-weighted recursion costs O(4**d) and is kept as an
independent cross-check of the fast path.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from types import MappingProxyType
from typing import Mapping

import numpy as np

from . import _kernels
from .exactnum import CoefficientTable, bernoulli
from .lattice import iter_submasks, popcount, subset_key
from .valuefn import ValueTable

__all__ = [
    "InteractionIndex",
    "ShapleyGam",
    "RecoveryReport",
    "delta",
    "delta_all",
    "n_shapley_recursive",
    "n_shapley_explicit",
    "shapley_gam",
    "n_shapley_from_gam",
    "n_shapley_all_orders",
    "reduce_order",
    "classic_shapley_oracle",
    "recovery_check",
]

PROVENANCE_DIRECT = "direct"
PROVENANCE_FROM_GAM = "from-gam"


@dataclass(frozen=True)
class InteractionIndex:
    """Attributions Phi_S for every coalition with 1 <= |S| <= order.

    ``baseline`` is v(empty); together with efficiency this means
    baseline + sum of all values reproduces v(full set). ``provenance``
    records which computation route produced the numbers ("direct" for
    the contribution-measure route and the plain inversion, "from-gam"
    for the coefficient route).
    """

    dim: int
    order: int
    baseline: float
    values: Mapping[int, float]
    point: np.ndarray | None = None
    provenance: str = PROVENANCE_DIRECT

    def __post_init__(self):
        if not 1 <= self.order <= self.dim:
            raise ValueError(f"order must be in [1, dim={self.dim}], got {self.order}")
        expected = sum(comb(self.dim, k) for k in range(1, self.order + 1))
        if len(self.values) != expected:
            raise ValueError(
                f"index of dim={self.dim}, order={self.order} needs exactly "
                f"{expected} entries, got {len(self.values)}"
            )
        for mask in self.values:
            if not 1 <= popcount(mask) <= self.order or mask >> self.dim:
                raise ValueError(f"subset {subset_key(mask)!r} is out of range")
        snapshot = {int(mask): float(v) for mask, v in self.values.items()}
        object.__setattr__(self, "values", MappingProxyType(snapshot))
        object.__setattr__(self, "baseline", float(self.baseline))
        if self.point is not None:
            point = np.array(self.point, dtype=np.float64)
            if point.shape != (self.dim,):
                raise ValueError(f"point must have shape ({self.dim},)")
            point.flags.writeable = False
            object.__setattr__(self, "point", point)

    def value(self, mask: int) -> float:
        try:
            return self.values[mask]
        except KeyError:
            raise KeyError(
                f"subset {{{subset_key(mask)}}} not in an order-{self.order} index"
            ) from None

    def dense(self) -> np.ndarray:
        """Values scattered into a dense 2**dim array (zeros elsewhere)."""
        out = np.zeros(1 << self.dim)
        for mask, val in self.values.items():
            out[mask] = val
        return out

    def total(self) -> float:
        """Sum of all attributions; equals v(full) - v(empty) by efficiency."""
        return float(sum(self.values[mask] for mask in sorted(self.values)))


@dataclass(frozen=True)
class ShapleyGam(InteractionIndex):
    """The order-d index read as a functional decomposition at the point.

    Each entry is the component value f_S(x_S); the baseline is the
    empty component, and baseline + total() reproduces the prediction.
    """

    def __post_init__(self):
        super().__post_init__()
        if self.order != self.dim:
            raise ValueError("a decomposition has order == dim")

    def component(self, mask: int) -> float:
        if mask == 0:
            return self.baseline
        return self.value(mask)

    def prediction(self) -> float:
        return self.baseline + self.total()


def _values_from_dense(dense: np.ndarray, dim: int, order: int) -> dict[int, float]:
    pc = _kernels.popcount_table(dim)
    masks = np.flatnonzero((pc >= 1) & (pc <= order))
    return {int(m): float(dense[m]) for m in masks}


@lru_cache(maxsize=None)
def _delta_weights(dim: int) -> np.ndarray:
    """weights[s, t] = (d-t-s)! t! / (d-s+1)! as float64, exact before rounding.

    Factorial ratios are formed as rationals and rounded once; float
    factorial quotients lose integer exactness near d = 19.
    """
    w = np.zeros((dim + 1, dim + 1))
    for s in range(dim + 1):
        for t in range(dim - s + 1):
            w[s, t] = float(
                Fraction(factorial(dim - t - s) * factorial(t), factorial(dim - s + 1))
            )
    w.flags.writeable = False
    return w


@lru_cache(maxsize=None)
def _bernoulli_floats(n: int) -> np.ndarray:
    out = np.array([float(bernoulli(k)) for k in range(n + 1)])
    out.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def _mixing_matrix(dim: int) -> np.ndarray:
    """C(a, m) as float64 for 0 <= a < m <= dim, from the exact table."""
    table = CoefficientTable.build(dim)
    out = np.zeros((dim + 1, dim + 1))
    for (a, m), value in table.c_coeffs.items():
        out[a, m] = float(value)
    out.flags.writeable = False
    return out


def delta(table: ValueTable, subset: int) -> float:
    """Contribution measure of one nonempty coalition.

    The factorially weighted double subset sum over the raw value
    table: for each outside coalition T, the alternating sum over
    L within S of v(L | T), weighted by (d-|T|-|S|)! |T|! / (d-|S|+1)!.
    Equals the harmonically discounted sum of all decomposition
    components containing S.
    """
    if subset == 0:
        raise ValueError("the contribution measure is defined for nonempty subsets")
    d = table.dim
    if subset >> d:
        raise ValueError(f"subset {subset_key(subset)!r} out of range for dim={d}")
    weights = _delta_weights(d)
    v = table.values
    s = popcount(subset)
    comp = ((1 << d) - 1) ^ subset
    acc = 0.0
    for t_mask in iter_submasks(comp):
        inner = 0.0
        for l_mask in iter_submasks(subset):
            if (s - popcount(l_mask)) & 1:
                inner -= v[l_mask | t_mask]
            else:
                inner += v[l_mask | t_mask]
        acc += weights[s, popcount(t_mask)] * inner
    return acc


def delta_all(table: ValueTable) -> np.ndarray:
    """Contribution measure for every nonempty mask (index 0 stays 0).

    O(4**dim); this feeds the slow cross-validation routes only.
    """
    return _kernels.delta_weighted(table.values, table.dim, _delta_weights(table.dim))


def _supersets_by_cardinality(dense: np.ndarray, dim: int) -> np.ndarray:
    """Row c holds, per mask S, the sum of dense[T] over supersets T with |T| = c."""
    pc = _kernels.popcount_table(dim)
    out = np.empty((dim + 1, dense.size))
    for c in range(dim + 1):
        layer = np.where(pc == c, dense, 0.0)
        out[c] = _kernels.zeta_supersets(layer, dim)
    return out


def n_shapley_recursive(table: ValueTable, order: int) -> InteractionIndex:
    """Order-n index by the literal Bernoulli-weighted recursion.

    Level n assigns the contribution measure to coalitions of size n
    and corrects every smaller coalition of the level-(n-1) index by
    B_(n-|S|) times the sum of the measures of its size-n supersets.
    Kept as the slow independent route; agreement with the coefficient
    route is the core correctness check of this package.
    """
    d = table.dim
    if not 1 <= order <= d:
        raise ValueError(f"order must be in [1, dim={d}], got {order}")
    deltas = delta_all(table)
    pc = _kernels.popcount_table(d)
    bern = _bernoulli_floats(d)
    full = (1 << d) - 1
    cur = np.zeros(deltas.size)
    singles = np.flatnonzero(pc == 1)
    cur[singles] = deltas[singles]
    for level in range(2, order + 1):
        new = np.zeros(deltas.size)
        for mask in range(1, deltas.size):
            s = int(pc[mask])
            if s > level:
                continue
            if s == level:
                new[mask] = deltas[mask]
                continue
            acc = 0.0
            want = level - s
            for k_mask in iter_submasks(full ^ mask):
                if popcount(k_mask) == want:
                    acc += deltas[mask | k_mask]
            new[mask] = cur[mask] + bern[want] * acc
        cur = new
    return InteractionIndex(
        dim=d,
        order=order,
        baseline=float(table.values[0]),
        values=_values_from_dense(cur, d, order),
        point=table.point,
        provenance=PROVENANCE_DIRECT,
    )


def n_shapley_explicit(table: ValueTable, order: int) -> InteractionIndex:
    """Order-n index by the closed Bernoulli-weighted sum over the
    contribution measure: Phi_S = sum_k B_k * (sum of measures of the
    supersets of S at distance k), k up to order - |S|.

    Unrolls the recursion; must agree with it entrywise.
    """
    d = table.dim
    if not 1 <= order <= d:
        raise ValueError(f"order must be in [1, dim={d}], got {order}")
    deltas = delta_all(table)
    bycard = _supersets_by_cardinality(deltas, d)
    pc = _kernels.popcount_table(d)
    bern = _bernoulli_floats(d)
    phi = np.zeros(deltas.size)
    for s in range(1, order + 1):
        masks = np.flatnonzero(pc == s)
        acc = bycard[s][masks].copy()  # k = 0 term, B_0 = 1
        for k in range(1, order - s + 1):
            acc += bern[k] * bycard[s + k][masks]
        phi[masks] = acc
    return InteractionIndex(
        dim=d,
        order=order,
        baseline=float(table.values[0]),
        values=_values_from_dense(phi, d, order),
        point=table.point,
        provenance=PROVENANCE_DIRECT,
    )


def shapley_gam(table: ValueTable) -> ShapleyGam:
    """The functional decomposition of a value table at its point.

    One alternating-sign inversion of the table, O(d * 2**d). This is
    the preferred entry into everything else: any order-n index is a
    linear combination of these components.
    """
    components = _kernels.moebius_subsets(table.values, table.dim)
    return ShapleyGam(
        dim=table.dim,
        order=table.dim,
        baseline=float(components[0]),
        values=_values_from_dense(components, table.dim, table.dim),
        point=table.point,
        provenance=PROVENANCE_DIRECT,
    )


def _from_gam_dense(gam_dense: np.ndarray, dim: int, order: int, bycard: np.ndarray) -> np.ndarray:
    pc = _kernels.popcount_table(dim)
    mix = _mixing_matrix(dim)
    phi = gam_dense.copy()
    for s in range(1, order + 1):
        masks = np.flatnonzero(pc == s)
        for k in range(max(1, order + 1 - s), dim - s + 1):
            phi[masks] += mix[order - s, k] * bycard[s + k][masks]
    return phi


def n_shapley_from_gam(gam: ShapleyGam, order: int) -> InteractionIndex:
    """Order-n index as a linear combination of decomposition components.

    Phi_S = f_S plus, for every strict superset T with |T| > order, the
    component f_T weighted by the exact mixing coefficient for headroom
    order - |S| and distance |T| - |S|. At order 1 this is the familiar
    even split: each interaction is shared equally by its members.
    """
    d = gam.dim
    if not 1 <= order <= d:
        raise ValueError(f"order must be in [1, dim={d}], got {order}")
    dense = gam.dense()
    bycard = _supersets_by_cardinality(dense, d)
    phi = _from_gam_dense(dense, d, order, bycard)
    return InteractionIndex(
        dim=d,
        order=order,
        baseline=gam.baseline,
        values=_values_from_dense(phi, d, order),
        point=gam.point,
        provenance=PROVENANCE_FROM_GAM,
    )


def n_shapley_all_orders(gam: ShapleyGam) -> list[InteractionIndex]:
    """Indices of every order 1..dim, sharing one set of superset sweeps."""
    d = gam.dim
    dense = gam.dense()
    bycard = _supersets_by_cardinality(dense, d)
    out = []
    for order in range(1, d + 1):
        phi = _from_gam_dense(dense, d, order, bycard)
        out.append(
            InteractionIndex(
                dim=d,
                order=order,
                baseline=gam.baseline,
                values=_values_from_dense(phi, d, order),
                point=gam.point,
                provenance=PROVENANCE_FROM_GAM,
            )
        )
    return out


def reduce_order(phi: InteractionIndex, order: int) -> InteractionIndex:
    """Project an index down to a smaller order.

    Inverts the defining recursion one level at a time: dropping from
    level q to q-1 subtracts, from every coalition S with |S| < q,
    B_(q-|S|) times the sum of the level-q entries over supersets of S
    of size q, then discards the size-q layer. No coefficients beyond
    the Bernoulli numbers are involved, and the result agrees with
    computing the smaller order directly.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if order > phi.order:
        raise ValueError(
            f"cannot reduce an order-{phi.order} index to larger order {order}"
        )
    if order == phi.order:
        return phi
    d = phi.dim
    pc = _kernels.popcount_table(d)
    bern = _bernoulli_floats(d)
    cur = phi.dense()
    for q in range(phi.order, order, -1):
        top = np.where(pc == q, cur, 0.0)
        super_sums = _kernels.zeta_supersets(top, d)
        for s in range(1, q):
            masks = np.flatnonzero(pc == s)
            cur[masks] -= bern[q - s] * super_sums[masks]
        cur[pc == q] = 0.0
    return InteractionIndex(
        dim=d,
        order=order,
        baseline=phi.baseline,
        values=_values_from_dense(cur, d, order),
        point=phi.point,
        provenance=phi.provenance,
    )


def classic_shapley_oracle(table: ValueTable) -> np.ndarray:
    """Per-feature attributions by the textbook permutation-weighted sum.

    Phi_i = sum over T not containing i of |T|! (d-|T|-1)! / d! times
    the marginal v(T + i) - v(T), brute force over all coalitions.
    Deliberately naive and capped at dim 12; this is the ground truth
    the order-1 index is checked against.
    """
    d = table.dim
    if d > 12:
        raise ValueError(f"the brute-force oracle is capped at dim 12, got {d}")
    v = table.values
    pc = _kernels.popcount_table(d)
    weights = np.array(
        [float(Fraction(factorial(t) * factorial(d - t - 1), factorial(d))) for t in range(d)]
    )
    out = np.empty(d)
    all_masks = np.arange(1 << d)
    for i in range(d):
        bit = 1 << i
        rest = all_masks[(all_masks & bit) == 0]
        marginals = v[rest | bit] - v[rest]
        out[i] = float(np.dot(weights[pc[rest]], marginals))
    return out


@dataclass(frozen=True)
class RecoveryReport:
    """How close a decomposition is to having no components above a given order.

    ``max_component_above_order`` is the largest |f_S| with |S| greater
    than the order (0 when the order equals the dimension), and
    ``worst_subset_above_order`` the mask attaining it (0 if none).
    ``max_attribution_gap`` is the largest |Phi_S - f_S| over the kept
    coalitions: when the tail truly vanishes, the order-n index
    reproduces the components themselves.
    """

    dim: int
    order: int
    max_component_above_order: float
    worst_subset_above_order: int
    max_attribution_gap: float

    def is_order(self, tol: float = 1e-9) -> bool:
        return self.max_component_above_order <= tol


def recovery_check(gam: ShapleyGam, order: int) -> RecoveryReport:
    """Measure the above-order component mass and the attribution gap."""
    if not 1 <= order <= gam.dim:
        raise ValueError(f"order must be in [1, dim={gam.dim}], got {order}")
    worst = 0.0
    worst_mask = 0
    for mask, value in gam.values.items():
        if popcount(mask) > order and abs(value) > worst:
            worst = abs(value)
            worst_mask = mask
    phi = n_shapley_from_gam(gam, order)
    gap = 0.0
    for mask, value in phi.values.items():
        gap = max(gap, abs(value - gam.values[mask]))
    return RecoveryReport(
        dim=gam.dim,
        order=order,
        max_component_above_order=worst,
        worst_subset_above_order=worst_mask,
        max_attribution_gap=gap,
    )
