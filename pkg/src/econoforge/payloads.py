"""Canonical JSON payload builders shared by the HTTP API and the CLI.

Both surfaces must emit byte-identical JSON for the same logical query, so
every response body is built here as a plain dict and serialized with
:func:`to_json_bytes` (sorted keys, compact separators, ASCII). Integers
whose magnitude exceeds 2^53 - 1 are serialized as strings so JavaScript
clients cannot silently lose cents.
"""

from __future__ import annotations

import json
from typing import Sequence

from .aggregation import aggregate_bins, aggregate_regions, temporal_delta
from .core import DomainError, FirmRecord, TransactionModel
from .flows import compare_models, flows_for_selection, model_membership
from .hexgrid import HexIndex, bin_center, edge_length_m
from .rules import (
    ConstraintSet,
    DegreeCap,
    EdgeBound,
    FixedEdge,
    Forbid,
    NonNegativity,
    SectorTotal,
    _print_predicate,
)
from .store import Dataset

_MAX_SAFE_INT = 2 ** 53 - 1


def _widen(value):
    """Recursively stringify integers beyond double precision."""
    if isinstance(value, bool):
        return value
    if isinstance(value, int):
        return str(value) if abs(value) > _MAX_SAFE_INT else value
    if isinstance(value, dict):
        return {k: _widen(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_widen(v) for v in value]
    return value


def to_json_bytes(payload) -> bytes:
    return json.dumps(
        _widen(payload), sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False
    ).encode("ascii") + b"\n"


class BadRequest(ValueError):
    """Client-addressable parameter problem (HTTP 400 / CLI exit 1)."""


def summary_payload(ds: Dataset) -> dict:
    s = ds.summary()
    return {
        "dataset_id": ds.dataset_id,
        "years": list(s.years),
        "sectors": {code: ds.registry.names[code] for code in s.sectors},
        "firm_counts": {str(y): s.firm_counts[y] for y in s.years},
        "cash_flow_cents": {str(y): s.cash_flow_cents[y] for y in s.years},
    }


def _bin_entry(idx: HexIndex, metrics, value) -> dict:
    lat, lon = bin_center(idx)
    entry = {
        "q": idx.q,
        "r": idx.r,
        "center_lat": lat,
        "center_lon": lon,
        "value": value,
    }
    if metrics is not None:
        entry["firm_count"] = metrics.firm_count
        entry["cash_flow_cents"] = metrics.cash_flow_cents
        entry["sector_breakdown"] = dict(metrics.sector_breakdown)
    return entry


def _select_firms(ds: Dataset, year: int, model: TransactionModel | None,
                  hide_unrepresented: bool) -> Sequence[FirmRecord]:
    firms = ds.firms(year)
    if hide_unrepresented:
        if model is None:
            raise BadRequest("hide_unrepresented requires a model id")
        members = model_membership(model)
        firms = tuple(f for f in firms if f.firm_id in members)
    return firms


def bins_payload(
    ds: Dataset,
    year: int,
    resolution: int,
    metric: str,
    mode: str = "absolute",
    model: TransactionModel | None = None,
    hide_unrepresented: bool = False,
) -> dict:
    if year not in ds.years:
        raise BadRequest(f"dataset {ds.dataset_id} has no year {year}")
    firms = _select_firms(ds, year, model, hide_unrepresented)
    layer = aggregate_bins(firms, year, resolution, metric)
    base = {
        "dataset_id": ds.dataset_id,
        "year": year,
        "resolution": resolution,
        "metric": metric,
        "mode": mode,
        "hex_edge_m": edge_length_m(resolution),
        "excluded_firm_count": layer.excluded_firm_count,
    }
    if model is not None:
        base["model_id"] = model.model_id
    if mode == "absolute":
        bins = [
            _bin_entry(idx, layer.bins[idx], layer.bins[idx].value(metric))
            for idx in sorted(layer.bins, key=lambda h: (h.q, h.r))
        ]
        base["bins"] = bins
        base["total_value"] = layer.total()
        return base
    if mode == "delta":
        years = ds.years
        pos = years.index(year)
        if pos == 0:
            raise BadRequest(
                f"delta mode needs a previous year; {year} is the first year of {ds.dataset_id}"
            )
        prev_year = years[pos - 1]
        prev_firms = _select_firms(ds, prev_year, model, hide_unrepresented)
        prev_layer = aggregate_bins(prev_firms, prev_year, resolution, metric)
        delta = temporal_delta(layer, prev_layer, metric)
        base["previous_year"] = prev_year
        base["bins"] = [
            {
                "q": idx.q,
                "r": idx.r,
                "center_lat": bin_center(idx)[0],
                "center_lon": bin_center(idx)[1],
                "delta": delta.deltas[idx],
                "magnitude": abs(delta.deltas[idx]),
            }
            for idx in sorted(delta.deltas, key=lambda h: (h.q, h.r))
        ]
        return base
    raise BadRequest(f"unknown mode {mode!r} (expected absolute or delta)")


def regions_payload(ds: Dataset, year: int, level: int, metric: str, normalize: bool) -> dict:
    if year not in ds.years:
        raise BadRequest(f"dataset {ds.dataset_id} has no year {year}")
    try:
        metrics = aggregate_regions(ds.firms(year), year, level, metric, normalize, ds.regions)
    except DomainError as e:
        raise BadRequest(str(e)) from e
    return {
        "dataset_id": ds.dataset_id,
        "year": year,
        "level": level,
        "metric": metric,
        "normalize": normalize,
        "regions": [
            {
                "region_code": m.region_code,
                "name": ds.regions[m.region_code].name if m.region_code in ds.regions else m.region_code,
                "firm_count": m.firm_count,
                "cash_flow_cents": m.cash_flow_cents,
                "value": m.value(metric),
                "area_km2": m.area_km2,
                "normalized": m.normalized,
                "sector_breakdown": dict(m.sector_breakdown),
            }
            for m in metrics
        ],
    }


def model_summary_payload(model: TransactionModel) -> dict:
    return {
        "model_id": model.model_id,
        "dataset_id": model.dataset_id,
        "year": model.year,
        "constraint_set_id": model.constraint_set_id,
        "provenance": model.provenance.value,
        "edge_count": len(model.edges),
        "total_cents": sum(e.amount_cents for e in model.edges),
        "max_relative_residual": (
            model.residuals.max_relative_residual if model.residuals is not None else None
        ),
    }


def flows_payload(
    ds: Dataset,
    model: TransactionModel,
    selection: HexIndex,
    include_internal: bool = False,
) -> dict:
    arcs, stats = flows_for_selection(
        model, ds.firms(model.year), selection, include_internal=include_internal
    )
    def _endpoint(idx: HexIndex) -> dict:
        lat, lon = bin_center(idx)
        return {"q": idx.q, "r": idx.r, "lat": lat, "lon": lon}
    return {
        "dataset_id": ds.dataset_id,
        "model_id": model.model_id,
        "year": model.year,
        "resolution": selection.resolution,
        "selection": {"q": selection.q, "r": selection.r},
        "include_internal": include_internal,
        "arcs": [
            {
                "from": _endpoint(a.from_bin),
                "to": _endpoint(a.to_bin),
                "amount_cents": a.amount_cents,
                "direction": a.direction,
                "relative_weight": a.relative_weight,
            }
            for a in arcs
        ],
        "stats": {
            "inflow_cents": stats.inflow_cents,
            "outflow_cents": stats.outflow_cents,
            "pct_inward": stats.pct_inward,
            "pct_outward": stats.pct_outward,
            "overall_flow_cents": stats.overall_flow_cents,
        },
    }


def diff_payload(model_a: TransactionModel, model_b: TransactionModel,
                 firms: Sequence[FirmRecord]) -> dict:
    diff = compare_models(model_a, model_b, firms)
    return {
        "model_a": model_a.model_id,
        "model_b": model_b.model_id,
        "additions": [[s, d, a] for s, d, a in diff.additions],
        "removals": [[s, d, a] for s, d, a in diff.removals],
        "amount_deltas": [[s, d, a] for s, d, a in diff.amount_deltas],
        "sector_pair_deltas": {f"{s}->{t}": v for (s, t), v in diff.sector_pair_deltas.items()},
    }


def constraints_payload(cs: ConstraintSet) -> dict:
    out = []
    for c in cs.constraints:
        if isinstance(c, NonNegativity):
            out.append({"id": c.id, "kind": c.kind})
        elif isinstance(c, SectorTotal):
            out.append({
                "id": c.id, "kind": c.kind, "from_sector": c.from_sector,
                "to_sector": c.to_sector, "amount_cents": c.amount_cents,
                "tolerance_cents": c.tolerance_cents,
            })
        elif isinstance(c, DegreeCap):
            out.append({
                "id": c.id, "kind": c.kind, "direction": c.direction,
                "firm_predicate": _print_predicate(c.firm_predicate),
                "counterparty_predicate": _print_predicate(c.counterparty_predicate),
                "max_count": c.max_count,
            })
        elif isinstance(c, FixedEdge):
            out.append({
                "id": c.id, "kind": c.kind, "src_firm": c.src_firm,
                "dst_firm": c.dst_firm, "amount_cents": c.amount_cents,
            })
        elif isinstance(c, EdgeBound):
            out.append({
                "id": c.id, "kind": c.kind,
                "src_predicate": _print_predicate(c.src_predicate),
                "dst_predicate": _print_predicate(c.dst_predicate),
                "lo_cents": c.lo_cents, "hi_cents": c.hi_cents,
            })
        elif isinstance(c, Forbid):
            out.append({
                "id": c.id, "kind": c.kind,
                "src_predicate": _print_predicate(c.src_predicate),
                "dst_predicate": _print_predicate(c.dst_predicate),
            })
    return {"constraint_set_id": cs.set_id, "constraints": out}
