"""Independent brute-force constraint checker used as the validator oracle.

Deliberately naive: every check walks the full firm/edge lists from scratch,
shares no helpers with econoforge.validator, and never short-circuits. Written
before the production validator; keep it that way.
"""

from econoforge.rules import (
    DegreeCap,
    EdgeBound,
    FixedEdge,
    Forbid,
    NonNegativity,
    SectorTotal,
    eval_predicate,
)


def naive_check(edges, firms, cs):
    """Return {constraint_id: bool} by literal re-evaluation of every rule.

    ``edges`` is a mapping (src, dst) -> amount_cents; ``firms`` a list of
    FirmRecord for the model year.
    """
    sector_of = {}
    for f in firms:
        sector_of[f.firm_id] = f.sector
    by_id = {}
    for f in firms:
        by_id[f.firm_id] = f

    verdicts = {}
    for c in cs.constraints:
        if isinstance(c, NonNegativity):
            ok = True
            for pair in edges:
                if edges[pair] < 0:
                    ok = False
            verdicts[c.id] = ok
        elif isinstance(c, SectorTotal):
            total = 0
            for (src, dst) in edges:
                if sector_of[src] == c.from_sector and sector_of[dst] == c.to_sector:
                    total += edges[(src, dst)]
            verdicts[c.id] = abs(total - c.amount_cents) <= c.tolerance_cents
        elif isinstance(c, DegreeCap):
            ok = True
            for f in firms:
                if not eval_predicate(c.firm_predicate, f):
                    continue
                counterparties = set()
                for (src, dst) in edges:
                    if edges[(src, dst)] <= 0:
                        continue
                    if c.direction == "out" and src == f.firm_id:
                        other = dst
                    elif c.direction == "in" and dst == f.firm_id:
                        other = src
                    else:
                        continue
                    if eval_predicate(c.counterparty_predicate, by_id[other]):
                        counterparties.add(other)
                if len(counterparties) > c.max_count:
                    ok = False
            verdicts[c.id] = ok
        elif isinstance(c, FixedEdge):
            actual = 0
            for pair in edges:
                if pair == (c.src_firm, c.dst_firm):
                    actual = edges[pair]
            verdicts[c.id] = actual == c.amount_cents
        elif isinstance(c, EdgeBound):
            ok = True
            for i in firms:
                for j in firms:
                    if i.firm_id == j.firm_id:
                        continue
                    if eval_predicate(c.src_predicate, i) and eval_predicate(c.dst_predicate, j):
                        w = edges.get((i.firm_id, j.firm_id), 0)
                        if w < c.lo_cents or w > c.hi_cents:
                            ok = False
            verdicts[c.id] = ok
        elif isinstance(c, Forbid):
            ok = True
            for i in firms:
                for j in firms:
                    if i.firm_id == j.firm_id:
                        continue
                    if eval_predicate(c.src_predicate, i) and eval_predicate(c.dst_predicate, j):
                        if edges.get((i.firm_id, j.firm_id), 0) != 0:
                            ok = False
            verdicts[c.id] = ok
        else:
            raise TypeError(f"unhandled constraint {type(c).__name__}")
    return verdicts


def naive_all_ok(edges, firms, cs):
    return all(naive_check(edges, firms, cs).values())
