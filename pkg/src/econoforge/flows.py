"""Flow-map arcs, selection statistics, membership and model diffing.

Arcs are bin-to-bin aggregates of firm-level edges (never firm-to-firm), so
payload size is bounded by the number of occupied bins rather than by edge
count. Direction and ``relative_weight`` are semantic fields; the red/green
source/target gradient and arc bending are client rendering rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import DomainError, FirmRecord, TransactionModel
from .hexgrid import HexIndex, bin_point


@dataclass(frozen=True)
class FlowArc:
    from_bin: HexIndex
    to_bin: HexIndex
    amount_cents: int
    direction: str  # "out-of-selection" | "into-selection"
    relative_weight: float  # amount / max arc amount in the same response, in (0, 1]


@dataclass(frozen=True)
class SelectionStats:
    inflow_cents: int
    outflow_cents: int
    pct_inward: float
    pct_outward: float
    overall_flow_cents: int


def _located(firms: Sequence[FirmRecord]) -> dict[str, FirmRecord]:
    return {f.firm_id: f for f in firms if f.has_location}


def flows_for_selection(
    model: TransactionModel,
    firms: Sequence[FirmRecord],
    selection: HexIndex,
    resolution: int | None = None,
    include_internal: bool = False,
) -> tuple[list[FlowArc], SelectionStats]:
    """Aggregate the model's edges incident to the selected bin.

    Every edge with exactly one located endpoint inside the selection
    contributes to exactly one arc. Edges fully inside the selection are never
    drawn as arcs; they count toward both inflow and outflow only when
    ``include_internal`` is set (default: neither).
    """
    resolution = selection.resolution if resolution is None else resolution
    if resolution != selection.resolution:
        raise DomainError(
            f"selection bin is at resolution {selection.resolution}, not {resolution}"
        )
    located = _located(firms)
    bin_of: dict[str, HexIndex] = {}
    for firm_id, f in located.items():
        bin_of[firm_id] = bin_point(f.lat, f.lon, resolution)  # type: ignore[arg-type]

    inflow = 0
    outflow = 0
    arc_amounts: dict[tuple[HexIndex, HexIndex, str], int] = {}
    for e in sorted(model.edges, key=lambda e: (e.src, e.dst)):
        src_bin = bin_of.get(e.src)
        dst_bin = bin_of.get(e.dst)
        src_in = src_bin == selection
        dst_in = dst_bin == selection
        if src_in and dst_in:
            if include_internal:
                inflow += e.amount_cents
                outflow += e.amount_cents
            continue
        if src_in and dst_bin is not None:
            outflow += e.amount_cents
            key = (selection, dst_bin, "out-of-selection")
            arc_amounts[key] = arc_amounts.get(key, 0) + e.amount_cents
        elif dst_in and src_bin is not None:
            inflow += e.amount_cents
            key = (src_bin, selection, "into-selection")
            arc_amounts[key] = arc_amounts.get(key, 0) + e.amount_cents

    max_amount = max(arc_amounts.values(), default=0)
    arcs = [
        FlowArc(
            from_bin=frm,
            to_bin=to,
            amount_cents=amount,
            direction=direction,
            relative_weight=amount / max_amount,
        )
        for (frm, to, direction), amount in sorted(
            arc_amounts.items(), key=lambda kv: (kv[0][2], kv[0][0].q, kv[0][0].r, kv[0][1].q, kv[0][1].r)
        )
    ]

    total = inflow + outflow
    if total > 0:
        pct_in = 100.0 * inflow / total
        pct_out = 100.0 - pct_in  # exact complement by construction
    else:
        pct_in = pct_out = 0.0
    stats = SelectionStats(
        inflow_cents=inflow,
        outflow_cents=outflow,
        pct_inward=pct_in,
        pct_outward=pct_out,
        overall_flow_cents=total,
    )
    return arcs, stats


def model_membership(model: TransactionModel, firms: Sequence[FirmRecord] | None = None) -> set[str]:
    """Firm ids with at least one incident edge (used by hide-unrepresented mode)."""
    members: set[str] = set()
    for e in model.edges:
        members.add(e.src)
        members.add(e.dst)
    if firms is not None:
        known = {f.firm_id for f in firms}
        members &= known
    return members


@dataclass(frozen=True)
class ModelDiff:
    additions: tuple[tuple[str, str, int], ...]  # pairs only in b
    removals: tuple[tuple[str, str, int], ...]  # pairs only in a
    amount_deltas: tuple[tuple[str, str, int], ...]  # shared pairs, amount(b) - amount(a) != 0
    sector_pair_deltas: Mapping[tuple[str, str], int]  # sum(b) - sum(a) per sector pair


def compare_models(
    model_a: TransactionModel,
    model_b: TransactionModel,
    firms: Sequence[FirmRecord],
) -> ModelDiff:
    """Symmetric-difference diff from ``model_a`` to ``model_b``."""
    if model_a.dataset_id != model_b.dataset_id:
        raise DomainError(
            f"models belong to different datasets: {model_a.dataset_id!r} vs {model_b.dataset_id!r}"
        )
    sector_of = {f.firm_id: f.sector for f in firms}
    a = model_a.edge_map()
    b = model_b.edge_map()
    additions = tuple((s, d, b[(s, d)]) for (s, d) in sorted(b.keys() - a.keys()))
    removals = tuple((s, d, a[(s, d)]) for (s, d) in sorted(a.keys() - b.keys()))
    amount_deltas = tuple(
        (s, d, b[(s, d)] - a[(s, d)])
        for (s, d) in sorted(a.keys() & b.keys())
        if b[(s, d)] != a[(s, d)]
    )
    rollup: dict[tuple[str, str], int] = {}
    for (s, d), amount in b.items():
        key = (sector_of[s], sector_of[d])
        rollup[key] = rollup.get(key, 0) + amount
    for (s, d), amount in a.items():
        key = (sector_of[s], sector_of[d])
        rollup[key] = rollup.get(key, 0) - amount
    rollup = {k: v for k, v in sorted(rollup.items()) if v != 0}
    return ModelDiff(
        additions=additions,
        removals=removals,
        amount_deltas=amount_deltas,
        sector_pair_deltas=rollup,
    )
