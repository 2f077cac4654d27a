"""Feature subsets as bitmasks and transforms over the coalition lattice.

A subset S of the features 0..d-1 is an integer mask with bit i set iff
feature i is in S. Dense tables over all 2**d subsets are the working
representation everywhere: at d <= 16 a table is at most 512 KiB of
float64 and wins on locality over any sparse map. The dimension is hard
capped at 24.

The two workhorse transforms are inverses of each other:

* ``zeta_transform``     out[S] = sum of in[L] over L subset of S
* ``moebius_transform``  out[S] = alternating sum (-1)^(|S|-|L|) in[L]

Both run in O(d * 2**d) using an in-place sweep over bit positions
0..d-1. The sweep order is fixed, so results are bit-identical across
runs regardless of how many tables are processed in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

__all__ = [
    "FeatureSet",
    "MAX_DIM",
    "SubsetTable",
    "popcount",
    "mask_from_indices",
    "indices_from_mask",
    "subset_key",
    "parse_subset_key",
    "iter_submasks",
    "enumerate_subsets",
    "moebius_transform",
    "zeta_transform",
]

FeatureSet = int

MAX_DIM = 24


def popcount(mask: int) -> int:
    """Cardinality of the subset encoded by ``mask``."""
    return int(mask).bit_count()


def mask_from_indices(indices, dim: int | None = None) -> int:
    """Bitmask of a collection of 0-based feature indices."""
    mask = 0
    for i in indices:
        i = int(i)
        if i < 0 or (dim is not None and i >= dim):
            raise ValueError(f"feature index {i} out of range for dim={dim}")
        mask |= 1 << i
    return mask


def indices_from_mask(mask: int) -> tuple[int, ...]:
    """Ascending 0-based feature indices of a mask."""
    out = []
    i = 0
    m = int(mask)
    while m:
        if m & 1:
            out.append(i)
        m >>= 1
        i += 1
    return tuple(out)


def subset_key(mask: int) -> str:
    """Human/JSON key for a subset: comma-joined ascending indices, e.g. "0,2,3"."""
    return ",".join(str(i) for i in indices_from_mask(mask))


def parse_subset_key(key: str, dim: int) -> int:
    """Inverse of :func:`subset_key`; enforces ascending, in-range, unique indices."""
    if key == "":
        return 0
    parts = key.split(",")
    indices = []
    for part in parts:
        try:
            indices.append(int(part))
        except ValueError:
            raise ValueError(f"bad subset key {key!r}: {part!r} is not an integer") from None
    for a, b in zip(indices, indices[1:]):
        if b <= a:
            raise ValueError(f"bad subset key {key!r}: indices must be strictly ascending")
    if indices[0] < 0 or indices[-1] >= dim:
        raise ValueError(f"bad subset key {key!r}: index out of range for dim={dim}")
    return mask_from_indices(indices)


def iter_submasks(mask: int):
    """Yield every submask of ``mask``, in decreasing mask order, ending at 0."""
    sub = int(mask)
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


@dataclass(frozen=True)
class SubsetTable:
    """Dense float64 table over all 2**dim subsets, immutable after construction."""

    dim: int
    values: np.ndarray

    def __post_init__(self):
        if not 0 <= self.dim <= MAX_DIM:
            raise ValueError(f"dim must be in [0, {MAX_DIM}], got {self.dim}")
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != (1 << self.dim,):
            raise ValueError(
                f"table for dim={self.dim} needs exactly {1 << self.dim} entries, "
                f"got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("table entries must be finite")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, mask: int) -> float:
        return float(self.values[mask])


def enumerate_subsets(dim: int, max_size: int) -> list[int]:
    """All masks of cardinality <= max_size, in increasing mask order."""
    if not 0 <= dim <= MAX_DIM:
        raise ValueError(f"dim must be in [0, {MAX_DIM}], got {dim}")
    if not 0 <= max_size <= dim:
        raise ValueError(f"max_size must be in [0, dim={dim}], got {max_size}")
    pc = _kernels.popcount_table(dim)
    return [int(m) for m in np.flatnonzero(pc <= max_size)]


def moebius_transform(table: SubsetTable) -> SubsetTable:
    """Alternating-sign inversion: out[S] = sum_{L subset S} (-1)^(|S|-|L|) table[L].

    Turns a cumulative subset table (a value table) into its per-subset
    components. Exact inverse of :func:`zeta_transform`.
    """
    return SubsetTable(table.dim, _kernels.moebius_subsets(table.values, table.dim))


def zeta_transform(table: SubsetTable) -> SubsetTable:
    """Cumulative subset sum: out[S] = sum_{L subset S} table[L]."""
    return SubsetTable(table.dim, _kernels.zeta_subsets(table.values, table.dim))
