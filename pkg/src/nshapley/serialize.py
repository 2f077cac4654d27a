"""Round-trip JSON serialization of interaction indices.

One record per explained point and order:

    {"dim": d, "order": n, "baseline": v0, "point": [...],
     "provenance": "...", "values": {"0": ..., "0,2": ..., ...}}

Subset keys are comma-joined ascending 0-based feature indices. Floats
are written in round-trip decimal form (up to 17 significant digits),
so parsing a results file back reproduces every value bit for bit.
A results file is a JSON array of such records.
"""

from __future__ import annotations

import json
from typing import Sequence

import numpy as np

from .core import InteractionIndex, ShapleyGam
from .lattice import parse_subset_key, subset_key

__all__ = [
    "index_to_record",
    "record_to_index",
    "dumps_records",
    "loads_records",
    "write_records",
    "read_records",
]

_RECORD_KEYS = {"dim", "order", "baseline", "point", "provenance", "values"}


def index_to_record(index: InteractionIndex) -> dict:
    values = {subset_key(mask): index.values[mask] for mask in sorted(index.values)}
    return {
        "dim": index.dim,
        "order": index.order,
        "baseline": index.baseline,
        "point": None if index.point is None else [float(v) for v in index.point],
        "provenance": index.provenance,
        "values": values,
    }


def record_to_index(record: dict) -> InteractionIndex:
    unknown = set(record) - _RECORD_KEYS
    if unknown:
        raise ValueError(f"unknown record keys: {sorted(unknown)}")
    dim = int(record["dim"])
    order = int(record["order"])
    values = {
        parse_subset_key(key, dim): float(val) for key, val in record["values"].items()
    }
    point = record.get("point")
    cls = ShapleyGam if order == dim else InteractionIndex
    return cls(
        dim=dim,
        order=order,
        baseline=float(record["baseline"]),
        values=values,
        point=None if point is None else np.asarray(point, dtype=np.float64),
        provenance=record.get("provenance", "direct"),
    )


def dumps_records(indices: Sequence[InteractionIndex]) -> str:
    records = [index_to_record(ix) for ix in indices]
    return json.dumps(records, indent=2, allow_nan=False) + "\n"


def loads_records(text: str) -> list[InteractionIndex]:
    payload = json.loads(text)
    if not isinstance(payload, list):
        raise ValueError("a results document is a JSON array of records")
    return [record_to_index(rec) for rec in payload]


def write_records(indices: Sequence[InteractionIndex], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_records(indices))


def read_records(path) -> list[InteractionIndex]:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_records(fh.read())
