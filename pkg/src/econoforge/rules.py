"""Constraint rule DSL: parsing, predicate evaluation, canonical printing.

The grammar is line-oriented (one rule per line, ``#`` comments) and is
documented bit-exactly in docs/rules-grammar.md. Five rule kinds exist on top
of the always-present implicit non-negativity constraint:

    sector_total C -> A = 3200000000000 tol 0
    cap out for firm(region == "AT/1" and employee_expenses < 10000000) to firm(region == "AT/2") <= 10
    fix F0001 -> F0002 = 125000
    bound from firm(sector == "C") to firm(sector == "A") in [0, 500000]
    forbid from firm(region == "AT/3") to firm(region == "AT/3")

Any rule may end with ``as "name"`` to override the default content-derived
id. Parsing is pure and deterministic: the same source always yields the same
ids and payloads.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Iterable, Union

from .core import FirmRecord, IOTable, SectorRegistry

NONNEG_ID = "nonneg:implicit"

# DSL field name -> (FirmRecord attribute, kind)
_FIELDS: dict[str, tuple[str, str]] = {
    "firm_id": ("firm_id", "str"),
    "name": ("name", "str"),
    "sector": ("sector", "str"),
    "region": ("region_code", "str"),
    "year": ("year", "num"),
    "revenue": ("revenue_cents", "num"),
    "expenses": ("expenses_cents", "num"),
    "employee_expenses": ("employee_expenses_cents", "num"),
    "cash_flow": ("cash_flow_cents", "num"),
    "lat": ("lat", "num"),
    "lon": ("lon", "num"),
}

_NUM_OPS = ("==", "!=", "<=", ">=", "<", ">")
_STR_OPS = ("==", "!=")


class RuleSyntaxError(ValueError):
    """Parse failure with 1-based line/column position."""

    def __init__(self, line: int, col: int, message: str):
        self.line = line
        self.col = col
        self.message = message
        super().__init__(f"line {line}, col {col}: {message}")


@dataclass(frozen=True)
class Comparison:
    """One atomic ``field op literal`` test."""

    field: str
    op: str
    value: Union[int, float, str, tuple[str, ...]]

    def matches(self, firm: FirmRecord) -> bool:
        attr, kind = _FIELDS[self.field]
        actual = getattr(firm, attr)
        if self.op == "in":
            return actual in self.value  # type: ignore[operator]
        if kind == "num":
            if actual is None:  # firms without coordinates never match numeric tests on them
                return False
            if self.op == "==":
                return actual == self.value
            if self.op == "!=":
                return actual != self.value
            if self.op == "<":
                return actual < self.value
            if self.op == "<=":
                return actual <= self.value
            if self.op == ">":
                return actual > self.value
            return actual >= self.value
        if self.op == "==":
            return actual == self.value
        return actual != self.value


@dataclass(frozen=True)
class FirmPredicate:
    """Conjunction of atomic comparisons over firm fields."""

    atoms: tuple[Comparison, ...]

    def matches(self, firm: FirmRecord) -> bool:
        return all(a.matches(firm) for a in self.atoms)


def eval_predicate(p: FirmPredicate, f: FirmRecord) -> bool:
    """Pure evaluation of a predicate against one firm record."""
    return p.matches(f)


@dataclass(frozen=True)
class NonNegativity:
    id: str = NONNEG_ID
    kind: str = "nonneg"


@dataclass(frozen=True)
class SectorTotal:
    id: str
    from_sector: str
    to_sector: str
    amount_cents: int
    tolerance_cents: int
    kind: str = "sector_total"


@dataclass(frozen=True)
class DegreeCap:
    id: str
    firm_predicate: FirmPredicate
    counterparty_predicate: FirmPredicate
    direction: str  # "in" | "out"
    max_count: int
    kind: str = "cap"


@dataclass(frozen=True)
class FixedEdge:
    id: str
    src_firm: str
    dst_firm: str
    amount_cents: int
    kind: str = "fix"


@dataclass(frozen=True)
class EdgeBound:
    id: str
    src_predicate: FirmPredicate
    dst_predicate: FirmPredicate
    lo_cents: int
    hi_cents: int
    kind: str = "bound"


@dataclass(frozen=True)
class Forbid:
    id: str
    src_predicate: FirmPredicate
    dst_predicate: FirmPredicate
    kind: str = "forbid"


Constraint = Union[NonNegativity, SectorTotal, DegreeCap, FixedEdge, EdgeBound, Forbid]


@dataclass(frozen=True)
class ConstraintSet:
    """Parsed rules plus the implicit non-negativity constraint.

    ``set_id`` is stable: it hashes the sorted member ids, so re-parsing the
    same source (in any statement order) names the same set.
    """

    constraints: tuple[Constraint, ...]

    @property
    def set_id(self) -> str:
        digest = hashlib.sha1("\n".join(sorted(c.id for c in self.constraints)).encode()).hexdigest()
        return f"cs-{digest[:12]}"

    def of_kind(self, kind: str) -> list:
        return [c for c in self.constraints if c.kind == kind]

    @property
    def sector_totals(self) -> list[SectorTotal]:
        return self.of_kind("sector_total")

    @property
    def degree_caps(self) -> list[DegreeCap]:
        return self.of_kind("cap")

    @property
    def fixed_edges(self) -> list[FixedEdge]:
        return self.of_kind("fix")

    @property
    def edge_bounds(self) -> list[EdgeBound]:
        return self.of_kind("bound")

    @property
    def forbids(self) -> list[Forbid]:
        return self.of_kind("forbid")

    def merged_with(self, other: "ConstraintSet") -> "ConstraintSet":
        return _assemble(list(self.constraints) + list(other.constraints))


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#.*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<symbol>->|<=|>=|==|!=|<|>|=|\(|\)|\[|\]|,)
  | (?P<word>[A-Za-z_][A-Za-z0-9_/.-]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    text: str
    kind: str  # "string" | "number" | "symbol" | "word"
    col: int


def _tokenize_line(line: str, lineno: int) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(line):
        m = _TOKEN_RE.match(line, pos)
        if m is None:
            raise RuleSyntaxError(lineno, pos + 1, f"unexpected character {line[pos]!r}")
        kind = m.lastgroup or ""
        if kind == "comment":
            break
        if kind != "ws":
            toks.append(_Tok(m.group(), kind, pos + 1))
        pos = m.end()
    return toks


class _Cursor:
    def __init__(self, toks: list[_Tok], lineno: int):
        self.toks = toks
        self.lineno = lineno
        self.i = 0

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self, expect: str | None = None, kind: str | None = None) -> _Tok:
        tok = self.peek()
        where = tok.col if tok else (self.toks[-1].col + len(self.toks[-1].text) if self.toks else 1)
        if tok is None:
            raise RuleSyntaxError(self.lineno, where, f"unexpected end of line (expected {expect or kind})")
        if expect is not None and tok.text != expect:
            raise RuleSyntaxError(self.lineno, tok.col, f"expected {expect!r}, found {tok.text!r}")
        if kind is not None and tok.kind != kind:
            raise RuleSyntaxError(self.lineno, tok.col, f"expected {kind}, found {tok.text!r}")
        self.i += 1
        return tok

    def done(self) -> bool:
        return self.i >= len(self.toks)

    def error(self, message: str) -> RuleSyntaxError:
        tok = self.peek()
        return RuleSyntaxError(self.lineno, tok.col if tok else 1, message)


# ---------------------------------------------------------------------------
# parsing

def _unquote(raw: str) -> str:
    body = raw[1:-1]
    return body.replace('\\"', '"').replace("\\\\", "\\")


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _parse_nonneg_int(cur: _Cursor, what: str) -> int:
    tok = cur.next(kind="number")
    if "." in tok.text:
        raise RuleSyntaxError(cur.lineno, tok.col, f"{what} must be an integer amount in cents")
    value = int(tok.text)
    if value < 0:
        raise RuleSyntaxError(cur.lineno, tok.col, f"{what} may not be negative")
    return value


def _parse_predicate(cur: _Cursor) -> FirmPredicate:
    cur.next(expect="firm")
    cur.next(expect="(")
    atoms: list[Comparison] = []
    while True:
        field_tok = cur.next(kind="word")
        if field_tok.text not in _FIELDS:
            raise RuleSyntaxError(cur.lineno, field_tok.col, f"unknown field {field_tok.text!r}")
        _, field_kind = _FIELDS[field_tok.text]
        op_tok = cur.peek()
        if op_tok is None:
            raise cur.error("expected a comparison operator")
        if op_tok.text == "in":
            cur.next()
            cur.next(expect="(")
            values = []
            while True:
                values.append(_unquote(cur.next(kind="string").text))
                if cur.peek() and cur.peek().text == ",":  # type: ignore[union-attr]
                    cur.next()
                    continue
                break
            cur.next(expect=")")
            if field_kind != "str":
                raise RuleSyntaxError(cur.lineno, op_tok.col, f"'in' applies only to string fields, not {field_tok.text!r}")
            atoms.append(Comparison(field_tok.text, "in", tuple(values)))
        else:
            ops = _NUM_OPS if field_kind == "num" else _STR_OPS
            if op_tok.text not in ops:
                raise RuleSyntaxError(cur.lineno, op_tok.col, f"operator {op_tok.text!r} not valid for field {field_tok.text!r}")
            cur.next()
            val_tok = cur.peek()
            if val_tok is None:
                raise cur.error("expected a literal")
            if field_kind == "num":
                tok = cur.next(kind="number")
                value: Union[int, float] = float(tok.text) if "." in tok.text else int(tok.text)
                atoms.append(Comparison(field_tok.text, op_tok.text, value))
            else:
                tok = cur.next(kind="string")
                atoms.append(Comparison(field_tok.text, op_tok.text, _unquote(tok.text)))
        nxt = cur.peek()
        if nxt is not None and nxt.text == "and":
            cur.next()
            continue
        break
    cur.next(expect=")")
    return FirmPredicate(tuple(atoms))


def _parse_sector(cur: _Cursor, registry: SectorRegistry | None) -> str:
    tok = cur.next(kind="word")
    if registry is not None and tok.text not in registry:
        raise RuleSyntaxError(cur.lineno, tok.col, f"unknown sector {tok.text!r}")
    return tok.text


def _parse_statement(cur: _Cursor, registry: SectorRegistry | None) -> tuple[Constraint, str | None]:
    """Parse one rule; returns the constraint (id empty) and an optional explicit name."""
    head = cur.next(kind="word")
    c: Constraint
    if head.text == "sector_total":
        src = _parse_sector(cur, registry)
        cur.next(expect="->")
        dst = _parse_sector(cur, registry)
        cur.next(expect="=")
        amount = _parse_nonneg_int(cur, "sector total")
        tol = 0
        if cur.peek() is not None and cur.peek().text == "tol":  # type: ignore[union-attr]
            cur.next()
            tol = _parse_nonneg_int(cur, "tolerance")
        c = SectorTotal("", src, dst, amount, tol)
    elif head.text == "cap":
        direction_tok = cur.next(kind="word")
        if direction_tok.text not in ("in", "out"):
            raise RuleSyntaxError(cur.lineno, direction_tok.col, "cap direction must be 'in' or 'out'")
        cur.next(expect="for")
        firm_pred = _parse_predicate(cur)
        link = cur.next(kind="word")
        expected_link = "to" if direction_tok.text == "out" else "from"
        if link.text != expected_link:
            raise RuleSyntaxError(cur.lineno, link.col, f"expected {expected_link!r} after the {direction_tok.text}-cap subject")
        counter_pred = _parse_predicate(cur)
        cur.next(expect="<=")
        max_count = _parse_nonneg_int(cur, "cap count")
        c = DegreeCap("", firm_pred, counter_pred, direction_tok.text, max_count)
    elif head.text == "fix":
        src = cur.next(kind="word").text
        cur.next(expect="->")
        dst_tok = cur.next(kind="word")
        if dst_tok.text == src:
            raise RuleSyntaxError(cur.lineno, dst_tok.col, "fixed edge may not be a self-edge")
        cur.next(expect="=")
        amount = _parse_nonneg_int(cur, "fixed amount")
        c = FixedEdge("", src, dst_tok.text, amount)
    elif head.text == "bound":
        cur.next(expect="from")
        src_pred = _parse_predicate(cur)
        cur.next(expect="to")
        dst_pred = _parse_predicate(cur)
        cur.next(expect="in")
        cur.next(expect="[")
        lo = _parse_nonneg_int(cur, "lower bound")
        cur.next(expect=",")
        hi_tok_col = cur.peek().col if cur.peek() else 1
        hi = _parse_nonneg_int(cur, "upper bound")
        cur.next(expect="]")
        if lo > hi:
            raise RuleSyntaxError(cur.lineno, hi_tok_col, f"bound interval is empty ({lo} > {hi})")
        c = EdgeBound("", src_pred, dst_pred, lo, hi)
    elif head.text == "forbid":
        cur.next(expect="from")
        src_pred = _parse_predicate(cur)
        cur.next(expect="to")
        dst_pred = _parse_predicate(cur)
        c = Forbid("", src_pred, dst_pred)
    else:
        raise RuleSyntaxError(cur.lineno, head.col, f"unknown rule kind {head.text!r}")

    name: str | None = None
    if cur.peek() is not None and cur.peek().text == "as":  # type: ignore[union-attr]
        cur.next()
        name = _unquote(cur.next(kind="string").text)
    if not cur.done():
        raise cur.error(f"trailing input after rule: {cur.peek().text!r}")  # type: ignore[union-attr]
    return c, name


def _with_id(c: Constraint, name: str | None) -> Constraint:
    if name is None:
        canonical = _print_constraint(c, include_name=False)
        digest = hashlib.sha1(canonical.encode()).hexdigest()[:8]
        rule_id = f"{c.kind}:{digest}"
    else:
        rule_id = name
    return type(c)(**{**c.__dict__, "id": rule_id})


def _assemble(constraints: Iterable[Constraint]) -> ConstraintSet:
    by_id: dict[str, Constraint] = {NONNEG_ID: NonNegativity()}
    for c in constraints:
        if isinstance(c, NonNegativity):
            continue
        prev = by_id.get(c.id)
        if prev is not None and prev != c:
            raise ValueError(f"conflicting rules share the id {c.id!r}")
        by_id[c.id] = c
    ordered = [by_id.pop(NONNEG_ID)] + list(by_id.values())
    return ConstraintSet(tuple(ordered))


def parse_rules(text: str, registry: SectorRegistry | None = None) -> ConstraintSet:
    """Parse DSL source into a ConstraintSet (always containing NonNegativity).

    Sector codes are checked against ``registry`` when one is supplied.
    Raises RuleSyntaxError with a 1-based line/column on any malformed input.
    """
    out: list[Constraint] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        toks = _tokenize_line(line, lineno)
        if not toks:
            continue
        cur = _Cursor(toks, lineno)
        c, name = _parse_statement(cur, registry)
        out.append(_with_id(c, name))
    return _assemble(out)


# ---------------------------------------------------------------------------
# canonical printing

def _print_predicate(p: FirmPredicate) -> str:
    parts = []
    for a in p.atoms:
        if a.op == "in":
            lits = ", ".join(_quote(v) for v in a.value)  # type: ignore[union-attr]
            parts.append(f"{a.field} in ({lits})")
        elif isinstance(a.value, str):
            parts.append(f"{a.field} {a.op} {_quote(a.value)}")
        else:
            parts.append(f"{a.field} {a.op} {a.value}")
    return "firm(" + " and ".join(parts) + ")"


def _print_constraint(c: Constraint, include_name: bool = True) -> str:
    if isinstance(c, SectorTotal):
        body = f"sector_total {c.from_sector} -> {c.to_sector} = {c.amount_cents} tol {c.tolerance_cents}"
    elif isinstance(c, DegreeCap):
        link = "to" if c.direction == "out" else "from"
        body = (
            f"cap {c.direction} for {_print_predicate(c.firm_predicate)} "
            f"{link} {_print_predicate(c.counterparty_predicate)} <= {c.max_count}"
        )
    elif isinstance(c, FixedEdge):
        body = f"fix {c.src_firm} -> {c.dst_firm} = {c.amount_cents}"
    elif isinstance(c, EdgeBound):
        body = (
            f"bound from {_print_predicate(c.src_predicate)} to {_print_predicate(c.dst_predicate)} "
            f"in [{c.lo_cents}, {c.hi_cents}]"
        )
    elif isinstance(c, Forbid):
        body = f"forbid from {_print_predicate(c.src_predicate)} to {_print_predicate(c.dst_predicate)}"
    else:
        raise TypeError(f"cannot print {type(c).__name__}")
    if include_name and c.id:
        default_id = f"{c.kind}:{hashlib.sha1(body.encode()).hexdigest()[:8]}"
        if c.id != default_id:
            body += f" as {_quote(c.id)}"
    return body


def pretty_print(cs: ConstraintSet) -> str:
    """Render a set back to canonical DSL source (NonNegativity is implicit)."""
    lines = [_print_constraint(c) for c in cs.constraints if not isinstance(c, NonNegativity)]
    return "\n".join(lines) + ("\n" if lines else "")


def io_table_to_constraints(table: IOTable, tolerance_cents: int = 0) -> list[SectorTotal]:
    """One SectorTotal per IO-table entry, amounts copied verbatim."""
    if tolerance_cents < 0:
        raise ValueError("tolerance may not be negative")
    out = []
    for (src, dst) in sorted(table.entries):
        c = SectorTotal("", src, dst, table.entries[(src, dst)], tolerance_cents)
        out.append(_with_id(c, None))
    return out
