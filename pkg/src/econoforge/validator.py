"""Exact integer validation of transaction models against constraint sets."""

from __future__ import annotations

from typing import Sequence

from .core import (
    ConstraintStatus,
    DomainError,
    FirmRecord,
    ResidualReport,
    TransactionModel,
)
from .rules import (
    ConstraintSet,
    DegreeCap,
    EdgeBound,
    FixedEdge,
    Forbid,
    NonNegativity,
    SectorTotal,
)


def validate(
    model: TransactionModel,
    firms: Sequence[FirmRecord],
    cs: ConstraintSet,
) -> ResidualReport:
    """Check every constraint exactly (integer arithmetic throughout).

    Pure and deterministic: the report's mappings are built in a fixed order
    (constraint-set order; sector pairs sorted). Raises DomainError on edges
    whose endpoints are not in ``firms``.
    """
    by_id = {f.firm_id: f for f in firms}
    model.check_endpoints(by_id)
    edge_amounts = model.edge_map()

    # per-sector-pair achieved sums
    achieved: dict[tuple[str, str], int] = {}
    for (src, dst), amount in edge_amounts.items():
        pair = (by_id[src].sector, by_id[dst].sector)
        achieved[pair] = achieved.get(pair, 0) + amount

    status: dict[str, ConstraintStatus] = {}
    pair_residuals: dict[tuple[str, str], int] = {}
    max_rel = 0.0

    for c in cs.constraints:
        if isinstance(c, NonNegativity):
            bad = sum(-a for a in edge_amounts.values() if a < 0)
            status[c.id] = ConstraintStatus(bad == 0, bad)
        elif isinstance(c, SectorTotal):
            got = achieved.get((c.from_sector, c.to_sector), 0)
            diff = abs(got - c.amount_cents)
            pair = (c.from_sector, c.to_sector)
            pair_residuals[pair] = max(pair_residuals.get(pair, 0), diff)
            if c.amount_cents > 0:
                max_rel = max(max_rel, diff / c.amount_cents)
            status[c.id] = ConstraintStatus(diff <= c.tolerance_cents, max(0, diff - c.tolerance_cents))
        elif isinstance(c, DegreeCap):
            worst = 0
            for f in firms:
                if not c.firm_predicate.matches(f):
                    continue
                count = 0
                for (src, dst), amount in edge_amounts.items():
                    if amount <= 0:
                        continue
                    other = dst if (c.direction == "out" and src == f.firm_id) else (
                        src if (c.direction == "in" and dst == f.firm_id) else None
                    )
                    if other is not None and c.counterparty_predicate.matches(by_id[other]):
                        count += 1  # ordered pairs are unique, so each counterparty counts once
                worst = max(worst, count - c.max_count)
            worst = max(worst, 0)
            status[c.id] = ConstraintStatus(worst == 0, worst)
        elif isinstance(c, FixedEdge):
            got = edge_amounts.get((c.src_firm, c.dst_firm), 0)
            diff = abs(got - c.amount_cents)
            status[c.id] = ConstraintStatus(diff == 0, diff)
        elif isinstance(c, EdgeBound):
            worst = 0
            src_matched = [f for f in firms if c.src_predicate.matches(f)]
            dst_matched = [f for f in firms if c.dst_predicate.matches(f)]
            for i in src_matched:
                for j in dst_matched:
                    if i.firm_id == j.firm_id:
                        continue
                    w = edge_amounts.get((i.firm_id, j.firm_id), 0)
                    if w < c.lo_cents:
                        worst = max(worst, c.lo_cents - w)
                    elif w > c.hi_cents:
                        worst = max(worst, w - c.hi_cents)
            status[c.id] = ConstraintStatus(worst == 0, worst)
        elif isinstance(c, Forbid):
            offending = 0
            src_matched = {f.firm_id for f in firms if c.src_predicate.matches(f)}
            dst_matched = {f.firm_id for f in firms if c.dst_predicate.matches(f)}
            for (src, dst), amount in edge_amounts.items():
                if src in src_matched and dst in dst_matched:
                    offending += amount
            status[c.id] = ConstraintStatus(offending == 0, offending)
        else:
            raise DomainError(f"validator cannot handle constraint kind {type(c).__name__}")

    ordered_pairs = {pair: pair_residuals[pair] for pair in sorted(pair_residuals)}
    return ResidualReport(
        sector_pair_residuals=ordered_pairs,
        constraint_status=status,
        max_relative_residual=max_rel,
    )


def is_satisfied(report: ResidualReport) -> bool:
    """The solver's 'satisfied' criterion: all constraints pass and residuals are exactly zero."""
    return report.all_satisfied and report.max_relative_residual == 0.0
