"""Declarative run configuration and the pipelines it drives.

A run is described by a JSON object (or the equivalent CLI flags):

    {
      "data": "rows.csv",
      "model": {"type": "knn", "k": 3, "label": "y"},
      "value_fn": {"type": "interventional"},
      "background": "all",          // or "start:stop" or [start, stop]
      "order": "all",               // or an integer 1..d
      "points": [0, 2],             // or "all" or "sample:N"
      "seed": 0,
      "out": "results.json",
      "format": "json"
    }

Unknown keys anywhere in the document are errors; a typo never passes
silently. Identical configuration bytes produce byte-identical output
files: backgrounds are taken in row order, point sampling is seeded,
and every float is serialized in round-trip form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .analysis import interaction_degree, partial_dependence
from .core import (
    InteractionIndex,
    ShapleyGam,
    classic_shapley_oracle,
    n_shapley_all_orders,
    n_shapley_explicit,
    n_shapley_from_gam,
    n_shapley_recursive,
    recovery_check,
    shapley_gam,
)
from .datasets import Dataset, load_csv
from .figures import emit_dependence, emit_stacked_bars
from .lattice import subset_key
from .models import (
    CheckerboardSpec,
    ComponentMap,
    ConstantComponent,
    LookupComponent,
    PolyFactor,
    PredictFn,
    ProcessFailed,
    ProductComponent,
    ProtocolTimeout,
    SineFactor,
    StepFactor,
    additive_model,
    checkerboard,
    external_model,
    knn_model,
)
from .serialize import dumps_records
from .valuefn import (
    GamInducedValueFunction,
    InterventionalValueFunction,
    NoMatchingRows,
    ObservationalExactMatchValueFunction,
    ValueFunction,
    build_value_table,
)

__all__ = [
    "ConfigError",
    "RunError",
    "RunConfig",
    "load_config",
    "parse_components",
    "build_model",
    "build_value_function",
    "run_explain",
    "run_degree",
    "run_check",
    "run_plot",
]


class ConfigError(ValueError):
    """The configuration document is malformed."""


class RunError(RuntimeError):
    """A configured run failed; the message carries point/subset context."""


def _require_keys(mapping: Mapping, allowed: set[str], required: set[str], where: str):
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(mapping)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


_CONFIG_KEYS = {
    "data",
    "model",
    "value_fn",
    "background",
    "order",
    "points",
    "seed",
    "out",
    "format",
}


@dataclass(frozen=True)
class RunConfig:
    data: str
    model: Mapping
    value_fn: Mapping
    background: str | tuple[int, int] = "all"
    order: int | str = "all"
    points: str | tuple[int, ...] = "all"
    seed: int = 0
    out: str | None = None
    format: str = "json"

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "RunConfig":
        _require_keys(mapping, _CONFIG_KEYS, {"data", "model", "value_fn"}, "config")
        background = _parse_background(mapping.get("background", "all"))
        order = _parse_order(mapping.get("order", "all"))
        points = _parse_points(mapping.get("points", "all"))
        fmt = mapping.get("format", "json")
        if fmt not in {"json", "csv", "svg"}:
            raise ConfigError(f"config: format must be json|csv|svg, got {fmt!r}")
        model = mapping["model"]
        value_fn = mapping["value_fn"]
        if isinstance(model, str):
            model = {"type": model}
        if isinstance(value_fn, str):
            value_fn = {"type": value_fn}
        if not isinstance(model, Mapping) or "type" not in model:
            raise ConfigError("config: model must be an object with a 'type'")
        if not isinstance(value_fn, Mapping) or "type" not in value_fn:
            raise ConfigError("config: value_fn must be an object with a 'type'")
        return cls(
            data=str(mapping["data"]),
            model=dict(model),
            value_fn=dict(value_fn),
            background=background,
            order=order,
            points=points,
            seed=int(mapping.get("seed", 0)),
            out=mapping.get("out"),
            format=fmt,
        )


def _parse_background(raw) -> str | tuple[int, int]:
    if raw == "all":
        return "all"
    if isinstance(raw, str):
        parts = raw.split(":")
        if len(parts) != 2:
            raise ConfigError(f"background: expected 'all' or 'start:stop', got {raw!r}")
        try:
            return (int(parts[0]), int(parts[1]))
        except ValueError:
            raise ConfigError(f"background: bad row range {raw!r}") from None
    if isinstance(raw, Sequence) and len(raw) == 2:
        return (int(raw[0]), int(raw[1]))
    raise ConfigError(f"background: expected 'all' or a [start, stop] pair, got {raw!r}")


def _parse_order(raw) -> int | str:
    if raw == "all":
        return "all"
    try:
        order = int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"order: expected 'all' or an integer, got {raw!r}") from None
    if order < 1:
        raise ConfigError(f"order: must be >= 1, got {order}")
    return order


def _parse_points(raw) -> str | tuple[int, ...]:
    if raw == "all":
        return "all"
    if isinstance(raw, str):
        if raw.startswith("sample:"):
            try:
                count = int(raw.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"points: bad sample size in {raw!r}") from None
            if count < 1:
                raise ConfigError("points: sample size must be >= 1")
            return raw
        try:
            return tuple(int(p) for p in raw.split(","))
        except ValueError:
            raise ConfigError(f"points: expected 'all', 'sample:N' or indices, got {raw!r}") from None
    if isinstance(raw, Sequence):
        return tuple(int(p) for p in raw)
    raise ConfigError(f"points: expected 'all', 'sample:N' or a list, got {raw!r}")


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: the config document must be a JSON object")
    return RunConfig.from_mapping(payload)


# ---------------------------------------------------------------------------
# Component grammar parsing
# ---------------------------------------------------------------------------


def _parse_factor(spec: Mapping, where: str):
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise ConfigError(f"{where}: each factor needs a 'kind'")
    kind = spec["kind"]
    if kind == "poly":
        _require_keys(spec, {"kind", "coeffs"}, {"coeffs"}, where)
        return PolyFactor(tuple(float(c) for c in spec["coeffs"]))
    if kind == "sine":
        _require_keys(spec, {"kind", "frequency", "phase"}, set(), where)
        return SineFactor(float(spec.get("frequency", 1.0)), float(spec.get("phase", 0.0)))
    if kind == "step":
        _require_keys(spec, {"kind", "threshold"}, set(), where)
        return StepFactor(float(spec.get("threshold", 0.0)))
    raise ConfigError(f"{where}: unknown factor kind {kind!r}")


def _parse_component(spec: Mapping, index: int):
    where = f"components[{index}]"
    if not isinstance(spec, Mapping) or "type" not in spec:
        raise ConfigError(f"{where}: each component needs a 'type'")
    ctype = spec["type"]
    if ctype == "constant":
        _require_keys(spec, {"type", "value"}, {"value"}, where)
        return ConstantComponent(float(spec["value"]))
    if ctype == "term":
        _require_keys(spec, {"type", "features", "factors", "coefficient"}, {"features", "factors"}, where)
        features = tuple(int(i) for i in spec["features"])
        factors = tuple(_parse_factor(f, where) for f in spec["factors"])
        return ProductComponent(features, factors, float(spec.get("coefficient", 1.0)))
    if ctype == "lookup":
        _require_keys(spec, {"type", "features", "lo", "hi", "values"}, {"features", "lo", "hi", "values"}, where)
        return LookupComponent(
            tuple(int(i) for i in spec["features"]), spec["lo"], spec["hi"], spec["values"]
        )
    raise ConfigError(f"{where}: unknown component type {ctype!r}")


def parse_components(specs, dim: int) -> ComponentMap:
    if not isinstance(specs, Sequence) or isinstance(specs, (str, bytes)):
        raise ConfigError("components must be a list of component objects")
    comps = [_parse_component(spec, i) for i, spec in enumerate(specs)]
    try:
        return ComponentMap(dim, comps)
    except ValueError as exc:
        raise ConfigError(f"components: {exc}") from exc


# ---------------------------------------------------------------------------
# Model and value-function construction
# ---------------------------------------------------------------------------


def model_label_column(model_spec: Mapping) -> str | None:
    """The dataset column a model trains on, if any."""
    if model_spec.get("type") == "knn":
        label = model_spec.get("label")
        if not label:
            raise ConfigError("model: knn requires a 'label' column name")
        return str(label)
    return None


def build_model(spec: Mapping, dataset: Dataset) -> PredictFn:
    mtype = spec.get("type")
    where = "model"
    if mtype == "additive":
        _require_keys(spec, {"type", "components"}, {"components"}, where)
        return additive_model(parse_components(spec["components"], dataset.dim))
    if mtype == "checkerboard":
        _require_keys(spec, {"type", "granularity", "active"}, set(), where)
        active = spec.get("active")
        cb_spec = CheckerboardSpec(
            dim=dataset.dim,
            granularity=int(spec.get("granularity", 2)),
            active=None if active is None else tuple(int(i) for i in active),
        )
        return checkerboard(cb_spec)
    if mtype == "knn":
        _require_keys(spec, {"type", "k", "label"}, {"k", "label"}, where)
        if dataset.labels is None:
            raise ConfigError("model: knn needs the dataset loaded with its label column")
        return knn_model(dataset.rows, dataset.labels, int(spec["k"]))
    if mtype == "external":
        _require_keys(spec, {"type", "command", "timeout"}, {"command"}, where)
        return external_model(
            str(spec["command"]), dataset.dim, timeout=float(spec.get("timeout", 60.0))
        )
    raise ConfigError(f"model: unknown type {mtype!r}")


def build_value_function(
    spec: Mapping, model: PredictFn, dataset: Dataset, background: np.ndarray
) -> ValueFunction:
    vtype = spec.get("type")
    where = "value_fn"
    if vtype == "interventional":
        _require_keys(spec, {"type"}, set(), where)
        return InterventionalValueFunction(model, background)
    if vtype in {"observational", "observational-exactmatch"}:
        _require_keys(spec, {"type"}, set(), where)
        return ObservationalExactMatchValueFunction(model, dataset.rows)
    if vtype == "gam":
        _require_keys(spec, {"type", "components"}, {"components"}, where)
        return GamInducedValueFunction(parse_components(spec["components"], dataset.dim))
    raise ConfigError(f"value_fn: unknown type {vtype!r}")


def _resolve_background(config: RunConfig, dataset: Dataset) -> np.ndarray:
    if config.background == "all":
        return dataset.rows
    start, stop = config.background
    rows = dataset.rows[start:stop]
    if rows.shape[0] == 0:
        raise ConfigError(f"background: row range {start}:{stop} selects no rows")
    return rows


def _resolve_points(config: RunConfig, dataset: Dataset) -> list[int]:
    if config.points == "all":
        return list(range(len(dataset)))
    if isinstance(config.points, str):  # "sample:N"
        count = int(config.points.split(":", 1)[1])
        if count > len(dataset):
            raise ConfigError(
                f"points: cannot sample {count} of {len(dataset)} rows"
            )
        rng = np.random.default_rng(config.seed)
        return sorted(int(i) for i in rng.choice(len(dataset), size=count, replace=False))
    out = []
    for idx in config.points:
        if not 0 <= idx < len(dataset):
            raise ConfigError(f"points: row {idx} out of range (dataset has {len(dataset)})")
        out.append(idx)
    return out


def _resolve_orders(config: RunConfig, dim: int) -> list[int]:
    if config.order == "all":
        return list(range(1, dim + 1))
    if config.order > dim:
        raise ConfigError(f"order: {config.order} exceeds the data dimension {dim}")
    return [config.order]


@dataclass(frozen=True)
class _Prepared:
    dataset: Dataset
    model: PredictFn
    value_fn: ValueFunction
    point_ids: list[int]
    orders: list[int]


def _prepare(config: RunConfig) -> _Prepared:
    label = model_label_column(config.model)
    dataset = load_csv(config.data, label_column=label)
    model = build_model(config.model, dataset)
    background = _resolve_background(config, dataset)
    value_fn = build_value_function(config.value_fn, model, dataset, background)
    return _Prepared(
        dataset=dataset,
        model=model,
        value_fn=value_fn,
        point_ids=_resolve_points(config, dataset),
        orders=_resolve_orders(config, dataset.dim),
    )


def _explain_point(prepared: _Prepared, point_id: int) -> ShapleyGam:
    try:
        table = build_value_table(prepared.value_fn, prepared.dataset.rows[point_id])
    except (NoMatchingRows, ProcessFailed, ProtocolTimeout) as exc:
        raise RunError(f"point {point_id}: {exc}") from exc
    return shapley_gam(table)


def _indices_for_point(prepared: _Prepared, point_id: int) -> list[InteractionIndex]:
    gam = _explain_point(prepared, point_id)
    if prepared.orders == list(range(1, prepared.dataset.dim + 1)):
        return n_shapley_all_orders(gam)
    return [
        gam if order == gam.dim else n_shapley_from_gam(gam, order)
        for order in prepared.orders
    ]


def _records_csv(point_ids: list[int], per_point: list[list[InteractionIndex]]) -> str:
    lines = ["point,order,set,value"]
    for pid, indices in zip(point_ids, per_point):
        for index in indices:
            lines.append(f'{pid},{index.order},"",{index.baseline!r}')
            for mask in sorted(index.values):
                lines.append(
                    f'{pid},{index.order},"{subset_key(mask)}",{index.values[mask]!r}'
                )
    return "\n".join(lines) + "\n"


def _write_out(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def run_explain(config: RunConfig, full_order_only: bool = False) -> str:
    """Compute the configured indices and return (and optionally write) them.

    Output is a JSON array of per-point, per-order records (or a flat
    CSV), deterministic given the configuration bytes.
    """
    if config.format == "svg":
        raise ConfigError("format: svg output comes from the plot command")
    prepared = _prepare(config)
    if full_order_only:
        prepared = _Prepared(
            dataset=prepared.dataset,
            model=prepared.model,
            value_fn=prepared.value_fn,
            point_ids=prepared.point_ids,
            orders=[prepared.dataset.dim],
        )
    per_point = [_indices_for_point(prepared, pid) for pid in prepared.point_ids]
    if config.format == "csv":
        text = _records_csv(prepared.point_ids, per_point)
    else:
        text = dumps_records([ix for indices in per_point for ix in indices])
    _write_out(text, config.out)
    return text


def run_gam(config: RunConfig) -> str:
    """Indices at full order only: the decomposition per point."""
    return run_explain(config, full_order_only=True)


def run_degree(config: RunConfig) -> str:
    """Interaction-degree report over the selected points."""
    if config.format == "svg":
        raise ConfigError("format: svg output comes from the plot command")
    prepared = _prepare(config)
    gams = [_explain_point(prepared, pid) for pid in prepared.point_ids]
    report = interaction_degree(gams)
    if config.format == "csv":
        lines = ["point,degree"]
        lines.extend(
            f"{pid},{deg!r}"
            for pid, deg in zip(prepared.point_ids, report.per_point.tolist())
        )
        text = "\n".join(lines) + "\n"
    else:
        payload = {
            "count": len(gams),
            "mean_degree": report.mean_degree,
            "pooled_degree": report.pooled_degree,
            "quantiles": dict(report.quantiles),
            "order_mass_share": [float(v) for v in report.order_mass_share],
            "per_point": {
                str(pid): float(deg)
                for pid, deg in zip(prepared.point_ids, report.per_point)
            },
        }
        text = json.dumps(payload, indent=2, allow_nan=False) + "\n"
    _write_out(text, config.out)
    return text


def run_check(config: RunConfig, tol: float = 1e-9) -> tuple[str, bool]:
    """Efficiency, dual-path and recovery suites on the configured run.

    Returns the report text and whether every check passed. The slow
    cross-validation routes are exercised up to dim 10 and the
    brute-force per-feature oracle up to dim 12.
    """
    prepared = _prepare(config)
    d = prepared.dataset.dim
    lines = []
    ok = True

    def record(name: str, passed: bool, detail: str):
        nonlocal ok
        ok = ok and passed
        lines.append(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")

    for pid in prepared.point_ids:
        try:
            table = build_value_table(prepared.value_fn, prepared.dataset.rows[pid])
        except NoMatchingRows as exc:
            raise RunError(f"point {pid}: {exc}") from exc
        gam = shapley_gam(table)
        v_gap = float(table.values[-1] - table.values[0])
        scale = max(1.0, abs(float(table.values[-1])))
        for order in prepared.orders:
            phi = gam if order == d else n_shapley_from_gam(gam, order)
            eff = abs(phi.total() - v_gap)
            record(
                f"efficiency point={pid} order={order}",
                eff <= tol * scale,
                f"gap={eff:.3e}",
            )
        recon = abs(gam.prediction() - float(table.values[-1]))
        record(f"decomposition-sum point={pid}", recon <= tol * scale, f"gap={recon:.3e}")
        if d <= 10:
            for order in prepared.orders:
                direct = n_shapley_recursive(table, order)
                unrolled = n_shapley_explicit(table, order)
                combined = gam if order == d else n_shapley_from_gam(gam, order)
                gap = 0.0
                for mask in direct.values:
                    gap = max(gap, abs(direct.values[mask] - combined.values[mask]))
                    gap = max(gap, abs(direct.values[mask] - unrolled.values[mask]))
                record(
                    f"dual-path point={pid} order={order}", gap <= tol, f"gap={gap:.3e}"
                )
        if d <= 12:
            oracle = classic_shapley_oracle(table)
            order_one = n_shapley_from_gam(gam, 1)
            gap = max(
                abs(order_one.value(1 << i) - oracle[i]) for i in range(d)
            )
            record(f"order-1-oracle point={pid}", gap <= tol, f"gap={gap:.3e}")
        for order in prepared.orders:
            if order < d:
                report = recovery_check(gam, order)
                lines.append(
                    f"INFO  recovery point={pid} order={order}  "
                    f"max-above-order={report.max_component_above_order:.3e} "
                    f"attribution-gap={report.max_attribution_gap:.3e}"
                )
    text = "\n".join(lines) + "\n"
    _write_out(text, config.out)
    return text, ok


def run_plot(config: RunConfig, mode: str, feature: int | None, out: str) -> list[str]:
    """Render bar or dependence figures; returns the paths written."""
    import os

    prepared = _prepare(config)
    written: list[str] = []
    per_point = {pid: _indices_for_point(prepared, pid) for pid in prepared.point_ids}
    if mode == "bars":
        jobs = [(pid, ix) for pid in prepared.point_ids for ix in per_point[pid]]
        single = len(jobs) == 1 and out.endswith(".svg")
        if not single:
            os.makedirs(out, exist_ok=True)
        for pid, index in jobs:
            path = out if single else os.path.join(
                out, f"bars_point{pid}_order{index.order}.svg"
            )
            emit_stacked_bars(index, path, feature_names=prepared.dataset.columns)
            written.append(path)
        return written
    if mode == "dependence":
        if feature is None:
            raise ConfigError("plot dependence needs a feature index")
        by_order: dict[int, list[InteractionIndex]] = {}
        for pid in prepared.point_ids:
            for index in per_point[pid]:
                by_order.setdefault(index.order, []).append(index)
        single = len(by_order) == 1 and out.endswith(".svg")
        if not single:
            os.makedirs(out, exist_ok=True)
        for order in sorted(by_order):
            series = partial_dependence(by_order[order], feature)
            if single:
                svg_path = out
                csv_path = out[: -len(".svg")] + ".csv"
            else:
                stem = os.path.join(out, f"dependence_feature{feature}_order{order}")
                svg_path, csv_path = stem + ".svg", stem + ".csv"
            emit_dependence(series, csv_path, svg_path)
            written.extend([csv_path, svg_path])
        return written
    raise ConfigError(f"plot: unknown mode {mode!r} (expected bars|dependence)")
