"""Heuristic construction of constraint-satisfying transaction models.

Three deterministic phases:

1. gravity allocation — each sector-pair target is split over admissible
   firm pairs proportionally to size_out(i) * size_in(j), where size_out is
   the firm's expenses and size_in its revenue (floored at 1 cent so no firm
   vanishes from the allocation);
2. repair — fixed edges become hard assignments, degree caps keep the
   heaviest counterparties (ties broken by ascending firm id) with trimmed
   mass redistributed inside the sector pair, edge bounds clamp weights;
3. rebalance + integerize — per-sector-pair proportional rescaling under the
   surviving clamps, then largest-remainder rounding so every satisfiable
   sector total is met exactly in integer cents.

Exact solving is intentionally not done here; export the same instance with
emit_smtlib and feed any SMT-LIB solver instead.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

from .core import Edge, FirmRecord, Provenance, ResidualReport, TransactionModel
from .rules import ConstraintSet, FixedEdge, SectorTotal
from .validator import is_satisfied, validate

_INF = math.inf


class SolveStatus(str, Enum):
    SATISFIED = "satisfied"
    RESIDUAL = "residual"
    INFEASIBLE = "infeasible-detected"


class SolveCancelled(Exception):
    """Raised when a cancellation callback interrupts a running solve."""


class SolveError(ValueError):
    """The constraint set cannot be solved at all (e.g. nothing to allocate)."""


@dataclass(frozen=True)
class SolverParams:
    max_iterations: int = 200
    tolerance: float = 1e-6  # relative, applied to per-sector-pair totals
    seed: int = 0  # reserved for reproducibility contracts; construction is deterministic


@dataclass(frozen=True)
class SolveReport:
    status: SolveStatus
    iterations: int
    residuals: ResidualReport
    wall_time_ms: int
    infeasible_witnesses: tuple[str, ...] = ()


ProgressFn = Callable[[str, int, float], None]
CancelFn = Callable[[], bool]


def _size_out(f: FirmRecord) -> int:
    return max(f.expenses_cents, 1)


def _size_in(f: FirmRecord) -> int:
    return max(f.revenue_cents, 1)


class _Infeasible(Exception):
    def __init__(self, witnesses: Sequence[str]):
        self.witnesses = tuple(dict.fromkeys(witnesses))  # dedupe, keep order


def solve_heuristic(
    firms: Sequence[FirmRecord],
    cs: ConstraintSet,
    params: SolverParams = SolverParams(),
    *,
    dataset_id: str = "",
    year: int | None = None,
    progress: ProgressFn | None = None,
    should_cancel: CancelFn | None = None,
) -> tuple[TransactionModel, SolveReport]:
    """Build a model for ``firms`` under ``cs``; returns (model, report).

    Deterministic for fixed inputs. Provably impossible combinations that are
    cheap to witness yield status ``infeasible-detected`` with the witnessing
    constraint ids (full infeasibility proofs are the SMT path's job).
    """
    t0 = time.perf_counter()
    if not cs.sector_totals and not cs.fixed_edges:
        raise SolveError("constraint set has no sector totals and no fixed edges; nothing to allocate")
    if year is None:
        years = {f.year for f in firms}
        year = min(years) if years else 0

    state = _State(firms, cs)
    iterations = 0
    witnesses: tuple[str, ...] = ()
    try:
        state.check_fixed_conflicts()
        state.phase1_gravity()
        _tick(progress, should_cancel, "gravity", 0, _INF)
        state.phase2_caps()
        state.phase2_bounds()
        _tick(progress, should_cancel, "repair", 0, _INF)
        state.check_capacity(params)
        iterations = state.phase3_rebalance(params, progress, should_cancel)
        edges = state.integerize()
    except _Infeasible as inf:
        witnesses = inf.witnesses
        edges = []

    model = _build_model(edges, dataset_id, year, cs)
    report_residuals = validate(model, firms, cs)
    wall_ms = int((time.perf_counter() - t0) * 1000)
    if witnesses:
        status = SolveStatus.INFEASIBLE
    elif is_satisfied(report_residuals):
        status = SolveStatus.SATISFIED
    else:
        status = SolveStatus.RESIDUAL
    report = SolveReport(
        status=status,
        iterations=iterations,
        residuals=report_residuals,
        wall_time_ms=wall_ms,
        infeasible_witnesses=witnesses,
    )
    return model, report


def _tick(progress: ProgressFn | None, should_cancel: CancelFn | None,
          stage: str, iteration: int, residual: float) -> None:
    if should_cancel is not None and should_cancel():
        raise SolveCancelled(f"cancelled during {stage}")
    if progress is not None:
        progress(stage, iteration, residual)


def _build_model(edges: list[tuple[str, str, int]], dataset_id: str, year: int,
                 cs: ConstraintSet) -> TransactionModel:
    edges = sorted(edges)
    digest = hashlib.sha1(
        repr((dataset_id, year, cs.set_id, edges)).encode()
    ).hexdigest()[:12]
    return TransactionModel(
        model_id=f"m-{digest}",
        dataset_id=dataset_id,
        year=year,
        constraint_set_id=cs.set_id,
        edges=tuple(Edge(s, d, a) for s, d, a in edges),
        provenance=Provenance.HEURISTIC_SOLVER,
    )


class _State:
    """Mutable working state shared by the solver phases."""

    def __init__(self, firms: Sequence[FirmRecord], cs: ConstraintSet):
        self.cs = cs
        self.firms = sorted(firms, key=lambda f: f.firm_id)
        self.by_id = {f.firm_id: f for f in self.firms}
        self.by_sector: dict[str, list[FirmRecord]] = {}
        for f in self.firms:
            self.by_sector.setdefault(f.sector, []).append(f)

        # forbidden pairs as (src-id-set, dst-id-set) per Forbid rule
        self.forbid_sets = [
            (fb.id,
             {f.firm_id for f in self.firms if fb.src_predicate.matches(f)},
             {f.firm_id for f in self.firms if fb.dst_predicate.matches(f)})
            for fb in cs.forbids
        ]

        self.w: dict[tuple[str, str], float] = {}
        self.fixed: dict[tuple[str, str], int] = {}
        self.lo: dict[tuple[str, str], int] = {}
        self.hi: dict[tuple[str, str], int] = {}
        self.out_idx: dict[str, set[tuple[str, str]]] = {}
        self.in_idx: dict[str, set[tuple[str, str]]] = {}
        self.groups: dict[tuple[str, str], set[tuple[str, str]]] = {}  # sector pair -> member pairs
        # per sector pair: the governing total and its member pairs
        self.targets: dict[tuple[str, str], SectorTotal] = {}
        self.trimmers: dict[tuple[str, str], list[str]] = {}  # sector pair -> cap/bound ids that bit

    # -- helpers ------------------------------------------------------------

    def forbidden_ids(self, src: str, dst: str) -> list[str]:
        return [fid for fid, srcs, dsts in self.forbid_sets if src in srcs and dst in dsts]

    def sector_pair(self, pair: tuple[str, str]) -> tuple[str, str]:
        return (self.by_id[pair[0]].sector, self.by_id[pair[1]].sector)

    def _add_pair(self, pair: tuple[str, str], weight: float) -> None:
        if pair not in self.w:
            self.out_idx.setdefault(pair[0], set()).add(pair)
            self.in_idx.setdefault(pair[1], set()).add(pair)
            self.groups.setdefault(self.sector_pair(pair), set()).add(pair)
        self.w[pair] = weight

    def _remove_pair(self, pair: tuple[str, str]) -> float:
        mass = self.w.pop(pair)
        self.out_idx[pair[0]].discard(pair)
        self.in_idx[pair[1]].discard(pair)
        self.groups[self.sector_pair(pair)].discard(pair)
        return mass

    def group_pairs(self, st_pair: tuple[str, str]) -> list[tuple[str, str]]:
        return sorted(self.groups.get(st_pair, ()))

    # -- cheap conflict detection -------------------------------------------

    def check_fixed_conflicts(self) -> None:
        seen: dict[tuple[str, str], FixedEdge] = {}
        for fe in self.cs.fixed_edges:
            pair = (fe.src_firm, fe.dst_firm)
            prev = seen.get(pair)
            if prev is not None and prev.amount_cents != fe.amount_cents:
                raise _Infeasible([prev.id, fe.id])
            seen[pair] = fe
            if fe.amount_cents > 0:
                forbidders = self.forbidden_ids(*pair)
                if forbidders:
                    raise _Infeasible([fe.id, *forbidders])
        for st in self.cs.sector_totals:
            key = (st.from_sector, st.to_sector)
            prev_st = self.targets.get(key)
            if prev_st is not None:
                # two totals for one pair must agree within their tolerances
                gap = abs(prev_st.amount_cents - st.amount_cents)
                if gap > prev_st.tolerance_cents + st.tolerance_cents:
                    raise _Infeasible([prev_st.id, st.id])
                continue
            self.targets[key] = st

    # -- phase 1 ------------------------------------------------------------

    def phase1_gravity(self) -> None:
        for key in sorted(self.targets):
            st = self.targets[key]
            srcs = self.by_sector.get(st.from_sector, [])
            dsts = self.by_sector.get(st.to_sector, [])
            denom = sum(_size_out(i) for i in srcs) * sum(_size_in(j) for j in dsts)
            for i in srcs:
                for j in dsts:
                    if i.firm_id == j.firm_id:
                        continue
                    if self.forbidden_ids(i.firm_id, j.firm_id):
                        continue
                    weight = st.amount_cents * (_size_out(i) * _size_in(j)) / denom if denom else 0.0
                    self._add_pair((i.firm_id, j.firm_id), weight)

        for fe in self.cs.fixed_edges:
            pair = (fe.src_firm, fe.dst_firm)
            if fe.src_firm not in self.by_id or fe.dst_firm not in self.by_id:
                raise SolveError(f"fixed edge {fe.id} references a firm not in the dataset")
            if fe.amount_cents == 0:
                if pair in self.w:
                    self._remove_pair(pair)
            else:
                self._add_pair(pair, float(fe.amount_cents))
            self.fixed[pair] = fe.amount_cents

    # -- phase 2 ------------------------------------------------------------

    def phase2_caps(self) -> None:
        for cap in self.cs.degree_caps:
            trimmed_mass: dict[tuple[str, str], float] = {}
            for f in self.firms:
                if not cap.firm_predicate.matches(f):
                    continue
                incident = self.out_idx.get(f.firm_id, set()) if cap.direction == "out" \
                    else self.in_idx.get(f.firm_id, set())
                relevant = []
                for pair in incident:
                    other = pair[1] if cap.direction == "out" else pair[0]
                    if cap.counterparty_predicate.matches(self.by_id[other]):
                        relevant.append(pair)
                if len(relevant) <= cap.max_count:
                    continue
                fixed_rel = sorted(p for p in relevant if p in self.fixed)
                if len(fixed_rel) > cap.max_count:
                    raise _Infeasible([cap.id, *(self._fixed_id(p) for p in fixed_rel)])
                free_rel = [p for p in relevant if p not in self.fixed]
                counter = (lambda p: p[1]) if cap.direction == "out" else (lambda p: p[0])
                free_rel.sort(key=lambda p: (-self.w[p], counter(p)))
                keep = cap.max_count - len(fixed_rel)
                for pair in free_rel[keep:]:
                    group = self.sector_pair(pair)
                    trimmed_mass[group] = trimmed_mass.get(group, 0.0) + self._remove_pair(pair)
                    self.trimmers.setdefault(group, []).append(cap.id)
            for group in sorted(trimmed_mass):
                self._redistribute(group, trimmed_mass[group])

    def _fixed_id(self, pair: tuple[str, str]) -> str:
        for fe in self.cs.fixed_edges:
            if (fe.src_firm, fe.dst_firm) == pair:
                return fe.id
        return f"fix:{pair[0]}->{pair[1]}"

    def _redistribute(self, group: tuple[str, str], mass: float) -> None:
        """Spread ``mass`` proportionally over the group's surviving free edges."""
        if mass <= 0:
            return
        survivors = [p for p in self.group_pairs(group) if p not in self.fixed]
        if not survivors:
            return  # mass is lost here; phase 3 reports the residual
        total = sum(self.w[p] for p in survivors)
        if total <= 0:
            share = mass / len(survivors)
            for p in survivors:
                self.w[p] += share
        else:
            for p in survivors:
                self.w[p] += mass * self.w[p] / total

    def phase2_bounds(self) -> None:
        for eb in self.cs.edge_bounds:
            src_matched = [f for f in self.firms if eb.src_predicate.matches(f)]
            dst_matched = [f for f in self.firms if eb.dst_predicate.matches(f)]
            shifted: dict[tuple[str, str], float] = {}
            for i in src_matched:
                for j in dst_matched:
                    if i.firm_id == j.firm_id:
                        continue
                    pair = (i.firm_id, j.firm_id)
                    if self.forbidden_ids(*pair):
                        if eb.lo_cents > 0:
                            raise _Infeasible([eb.id, *self.forbidden_ids(*pair)])
                        continue
                    lo = max(self.lo.get(pair, 0), eb.lo_cents)
                    hi = min(self.hi.get(pair, _INF), eb.hi_cents)
                    if lo > hi:
                        raise _Infeasible([eb.id] + self._bound_ids(pair))
                    self.lo[pair], self.hi[pair] = lo, int(hi) if hi != _INF else hi
                    if pair in self.fixed:
                        if not lo <= self.fixed[pair] <= hi:
                            raise _Infeasible([eb.id, self._fixed_id(pair)])
                        continue
                    if pair not in self.w:
                        if lo > 0:
                            self._add_pair(pair, float(lo))
                        continue
                    old = self.w[pair]
                    new = min(max(old, float(lo)), float(hi))
                    if new != old:
                        self.w[pair] = new
                        group = self.sector_pair(pair)
                        shifted[group] = shifted.get(group, 0.0) + (old - new)
                        self.trimmers.setdefault(group, []).append(eb.id)
            for group in sorted(shifted):
                self._shift_within_bounds(group, shifted[group])

    def _bound_ids(self, pair: tuple[str, str]) -> list[str]:
        out = []
        for eb in self.cs.edge_bounds:
            i, j = self.by_id.get(pair[0]), self.by_id.get(pair[1])
            if i and j and eb.src_predicate.matches(i) and eb.dst_predicate.matches(j):
                out.append(eb.id)
        return out

    def _shift_within_bounds(self, group: tuple[str, str], mass: float) -> None:
        """Move clamp excess (either sign) onto free edges with slack; leftovers wait for phase 3."""
        if mass == 0:
            return
        movable = []
        for p in self.group_pairs(group):
            if p in self.fixed:
                continue
            slack = (self.hi.get(p, _INF) - self.w[p]) if mass > 0 else (self.w[p] - self.lo.get(p, 0))
            if slack > 0:
                movable.append((p, slack))
        total_slack = sum(s for _, s in movable)
        if total_slack <= 0:
            return
        take = min(abs(mass), total_slack)
        for p, slack in movable:
            self.w[p] += math.copysign(take * slack / total_slack, mass)

    # -- cheap capacity check ------------------------------------------------

    def check_capacity(self, params: SolverParams) -> None:
        for key in sorted(self.targets):
            st = self.targets[key]
            pairs = self.group_pairs(key)
            fixed_sum = sum(self.fixed.get(p, 0) for p in pairs if p in self.fixed)
            if fixed_sum > st.amount_cents + st.tolerance_cents:
                fixed_ids = [self._fixed_id(p) for p in pairs if p in self.fixed]
                raise _Infeasible([st.id, *fixed_ids])
            capacity: float = fixed_sum
            ceiling_ids: list[str] = []
            for p in pairs:
                if p not in self.fixed:
                    hi = self.hi.get(p, _INF)
                    capacity += hi
                    if hi != _INF:
                        ceiling_ids.extend(self._bound_ids(p))
            if capacity < st.amount_cents - st.tolerance_cents:
                raise _Infeasible([st.id, *self.trimmers.get(key, []), *ceiling_ids])

    # -- phase 3 ------------------------------------------------------------

    def phase3_rebalance(self, params: SolverParams, progress: ProgressFn | None,
                         should_cancel: CancelFn | None) -> int:
        worst_iters = 0
        for key in sorted(self.targets):
            st = self.targets[key]
            pairs = [p for p in self.group_pairs(key) if p not in self.fixed]
            fixed_sum = sum(a for p, a in self.fixed.items()
                            if p in self.w and self.sector_pair(p) == key)
            budget = max(float(st.amount_cents - fixed_sum), 0.0)
            iters = self._fill_group(pairs, budget, params)
            worst_iters = max(worst_iters, iters)
            achieved = sum(self.w[p] for p in self.group_pairs(key))
            rel = abs(achieved - st.amount_cents) / st.amount_cents if st.amount_cents else 0.0
            _tick(progress, should_cancel, "rebalance", iters, rel)
        return worst_iters

    def _fill_group(self, pairs: list[tuple[str, str]], budget: float,
                    params: SolverParams) -> int:
        """Proportional rescale-then-clamp fixpoint: free weights sum to ``budget``."""
        frozen: dict[tuple[str, str], float] = {}
        iters = 0
        active = list(pairs)
        while active and iters < params.max_iterations:
            iters += 1
            need = budget - sum(frozen.values())
            cur = sum(self.w[p] for p in active)
            if need <= 0:
                for p in active:
                    frozen[p] = float(self.lo.get(p, 0))
                break
            if cur <= 0:
                for p in active:
                    self.w[p] = need / len(active)
                cur = need
            factor = need / cur
            still_active = []
            for p in active:
                scaled = self.w[p] * factor
                lo, hi = float(self.lo.get(p, 0)), self.hi.get(p, _INF)
                if scaled < lo:
                    frozen[p] = lo
                elif scaled > hi:
                    frozen[p] = float(hi)
                else:
                    self.w[p] = scaled
                    still_active.append(p)
            if len(still_active) == len(active):
                break  # exact fit, nothing newly frozen
            active = still_active
        for p, v in frozen.items():
            self.w[p] = v
        return iters

    # -- integerization -------------------------------------------------------

    def integerize(self) -> list[tuple[str, str, int]]:
        amounts: dict[tuple[str, str], int] = {}
        grouped: set[tuple[str, str]] = set()

        for key in sorted(self.targets):
            st = self.targets[key]
            members = self.group_pairs(key)
            grouped.update(members)
            free = [p for p in members if p not in self.fixed]
            fixed_sum = sum(self.fixed[p] for p in members if p in self.fixed)
            budget = max(st.amount_cents - fixed_sum, 0)
            for p, v in zip(free, self._round_preserving_total(free, budget)):
                amounts[p] = v
            for p in members:
                if p in self.fixed:
                    amounts[p] = self.fixed[p]

        for p in sorted(self.w):
            if p in grouped:
                continue
            if p in self.fixed:
                amounts[p] = self.fixed[p]
            else:
                amounts[p] = int(round(self.w[p]))  # bound-instantiated floor values are integral

        return [(src, dst, a) for (src, dst), a in sorted(amounts.items()) if a > 0]

    def _round_preserving_total(self, pairs: list[tuple[str, str]], budget: int) -> list[int]:
        """Largest-remainder rounding to hit ``budget`` exactly, honoring bounds."""
        if not pairs:
            return []
        vals = [self.w[p] for p in pairs]
        floors = [int(math.floor(v)) for v in vals]
        remainders = [v - f for v, f in zip(vals, floors)]
        out = list(floors)
        deficit = budget - sum(floors)
        order = sorted(range(len(pairs)), key=lambda k: (-remainders[k], pairs[k]))
        while deficit > 0:
            progressed = False
            for k in order:
                if deficit == 0:
                    break
                hi = self.hi.get(pairs[k], _INF)
                if out[k] + 1 <= hi:
                    out[k] += 1
                    deficit -= 1
                    progressed = True
            if not progressed:
                break  # bound ceilings exhausted; residual will be reported
        while deficit < 0:
            progressed = False
            for k in reversed(order):
                if deficit == 0:
                    break
                lo = self.lo.get(pairs[k], 0)
                if out[k] - 1 >= max(lo, 0):
                    out[k] -= 1
                    deficit += 1
                    progressed = True
            if not progressed:
                break
        return out
