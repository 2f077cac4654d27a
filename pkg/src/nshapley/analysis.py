"""Dataset-level summaries of per-point explanations.

Two views are provided: the mass-weighted mean coalition size of the
decomposition components (how interacting a function is, point by
point) and partial-dependence series of one coalition's attribution
against a feature's value (how close attributions are to being a
function of that feature alone).
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .core import InteractionIndex, ShapleyGam
from .lattice import popcount

__all__ = ["DegreeReport", "interaction_degree", "DependenceSeries", "partial_dependence"]


@dataclass(frozen=True)
class DegreeReport:
    """Interaction-degree summary over a set of explained points.

    The per-point degree is sum |S| * |f_S| / sum |f_S| over nonempty
    subsets, which lies in [0, d], equals 1 for purely additive
    functions, equals n for pure order-n interactions, and is 0 by
    convention when every component vanishes (a constant function).
    ``mean_degree`` averages the per-point degrees; ``pooled_degree``
    instead weights by pooling all component mass across points. Both
    are reported because either aggregation is defensible.
    ``order_mass_share[k]`` is the fraction of pooled |f_S| mass at
    cardinality k (all zeros for a constant model); shares sum to 1
    otherwise and are invariant under positive rescaling of the model.
    """

    per_point: np.ndarray
    mean_degree: float
    pooled_degree: float
    quantiles: Mapping[str, float]
    order_mass_share: np.ndarray

    def __post_init__(self):
        per_point = np.array(self.per_point, dtype=np.float64)
        per_point.flags.writeable = False
        object.__setattr__(self, "per_point", per_point)
        shares = np.array(self.order_mass_share, dtype=np.float64)
        shares.flags.writeable = False
        object.__setattr__(self, "order_mass_share", shares)
        object.__setattr__(self, "quantiles", MappingProxyType(dict(self.quantiles)))


def interaction_degree(gams: Sequence[ShapleyGam]) -> DegreeReport:
    """Aggregate the degree of variable interaction over explained points."""
    if len(gams) == 0:
        raise ValueError("need at least one decomposition")
    dim = gams[0].dim
    if any(g.dim != dim for g in gams):
        raise ValueError("all decompositions must share one dimension")
    per_point = np.empty(len(gams))
    pooled_by_order = np.zeros(dim + 1)
    for idx, gam in enumerate(gams):
        mass_by_order = np.zeros(dim + 1)
        for mask, value in gam.values.items():
            mass_by_order[popcount(mask)] += abs(value)
        pooled_by_order += mass_by_order
        total = mass_by_order.sum()
        if total == 0.0:
            per_point[idx] = 0.0
        else:
            orders = np.arange(dim + 1)
            per_point[idx] = float((orders * mass_by_order).sum() / total)
    pooled_total = pooled_by_order.sum()
    if pooled_total == 0.0:
        pooled_degree = 0.0
        shares = np.zeros(dim + 1)
    else:
        pooled_degree = float((np.arange(dim + 1) * pooled_by_order).sum() / pooled_total)
        shares = pooled_by_order / pooled_total
    qs = np.quantile(per_point, [0.0, 0.25, 0.5, 0.75, 1.0])
    quantiles = {
        "min": float(qs[0]),
        "q25": float(qs[1]),
        "median": float(qs[2]),
        "q75": float(qs[3]),
        "max": float(qs[4]),
    }
    return DegreeReport(
        per_point=per_point,
        mean_degree=float(per_point.mean()),
        pooled_degree=pooled_degree,
        quantiles=quantiles,
        order_mass_share=shares,
    )


@dataclass(frozen=True)
class DependenceSeries:
    """Scatter of one feature's attribution against the feature's value."""

    feature: int
    order: int
    x: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64)
        phi = np.array(self.phi, dtype=np.float64)
        if x.shape != phi.shape or x.ndim != 1:
            raise ValueError("x and phi must be aligned 1-d arrays")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(phi))):
            raise ValueError("series entries must be finite")
        x.flags.writeable = False
        phi.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "phi", phi)

    def __len__(self) -> int:
        return self.x.size


def partial_dependence(indices: Sequence[InteractionIndex], feature: int) -> DependenceSeries:
    """One (x_i, Phi_i) pair per explained point, in input order.

    For an order-1-representable function the points of this series
    fall on a single curve; residual vertical spread at repeated x_i
    values measures how much interaction the order subsumed.
    """
    if len(indices) == 0:
        return DependenceSeries(feature=feature, order=1, x=np.empty(0), phi=np.empty(0))
    dim = indices[0].dim
    order = indices[0].order
    if any(ix.dim != dim or ix.order != order for ix in indices):
        raise ValueError("all indices must share one dimension and order")
    if not 0 <= feature < dim:
        raise ValueError(f"feature {feature} out of range for dim={dim}")
    bit = 1 << feature
    xs = np.empty(len(indices))
    phis = np.empty(len(indices))
    for i, index in enumerate(indices):
        if index.point is None:
            raise ValueError("every index needs its explained point attached")
        xs[i] = index.point[feature]
        phis[i] = index.value(bit)
    return DependenceSeries(feature=feature, order=order, x=xs, phi=phis)
