"""SMT-LIB 2.6 emission and solver-output parsing (logic QF_LIA).

The encoding uses one integer variable ``w_<src>_<dst>`` per admissible
ordered firm pair (every non-self pair not matched by a Forbid rule).
Finite quantification is expanded into explicit conjunctions, so the plain
quantifier-free linear integer arithmetic logic suffices:

* non-negativity        -> one ``(assert (>= w 0))`` per pair
* sector totals         -> two-sided sum bound per rule
* fixed edges           -> equality per rule (constant-false if the pair is forbidden)
* edge bounds           -> interval per matched pair
* degree caps           -> boolean indicator ``b_<src>_<dst>`` per capped pair with
                           ``w > 0 => b`` plus one cardinality sum per capped firm

No solver is bundled; feed the document to any SMT-LIB solver and pipe its
model output back through :func:`parse_smt_model`.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Iterator, Sequence

from .core import Edge, FirmRecord, Provenance, TransactionModel
from .rules import ConstraintSet

_SYMBOL_SAFE = re.compile(r"^[A-Za-z0-9.-]+$")


class SmtEmitError(ValueError):
    pass


class SmtSyntaxError(ValueError):
    pass


def var_name(src: str, dst: str) -> str:
    return f"w_{src}_{dst}"


def _indicator_name(src: str, dst: str) -> str:
    return f"b_{src}_{dst}"


def _check_symbol_safe(firms: Sequence[FirmRecord]) -> None:
    for f in firms:
        if not _SYMBOL_SAFE.match(f.firm_id):
            raise SmtEmitError(
                f"firm id {f.firm_id!r} cannot be embedded in an SMT symbol "
                "(allowed: letters, digits, '.', '-')"
            )


def _plus(terms: list[str]) -> str:
    if not terms:
        return "0"
    if len(terms) == 1:
        return terms[0]
    return "(+ " + " ".join(terms) + ")"


def admissible_pairs(firms: Sequence[FirmRecord], cs: ConstraintSet) -> list[tuple[str, str]]:
    """All ordered non-self firm pairs not matched by any Forbid rule, sorted."""
    forbid_sets = [
        ({f.firm_id for f in firms if fb.src_predicate.matches(f)},
         {f.firm_id for f in firms if fb.dst_predicate.matches(f)})
        for fb in cs.forbids
    ]
    ids = sorted(f.firm_id for f in firms)
    pairs = []
    for i in ids:
        for j in ids:
            if i == j:
                continue
            if any(i in srcs and j in dsts for srcs, dsts in forbid_sets):
                continue
            pairs.append((i, j))
    return pairs


def emit_smtlib(firms: Sequence[FirmRecord], cs: ConstraintSet) -> str:
    """Render the constraint problem over ``firms`` as an SMT-LIB 2.6 document."""
    _check_symbol_safe(firms)
    firms = sorted(firms, key=lambda f: f.firm_id)
    by_id = {f.firm_id: f for f in firms}
    pairs = admissible_pairs(firms, cs)
    pair_set = set(pairs)

    lines: list[str] = [
        "(set-option :produce-models true)",
        "(set-logic QF_LIA)",
    ]

    # indicator variables exist for pairs under at least one degree cap
    capped_pairs: set[tuple[str, str]] = set()
    cap_groups: list[tuple[str, list[list[tuple[str, str]]]]] = []  # (cap id, per-firm pair lists)
    for cap in cs.degree_caps:
        subjects = [f for f in firms if cap.firm_predicate.matches(f)]
        counters = {f.firm_id for f in firms if cap.counterparty_predicate.matches(f)}
        per_firm: list[list[tuple[str, str]]] = []
        for f in subjects:
            edges = []
            for other in sorted(counters):
                pair = (f.firm_id, other) if cap.direction == "out" else (other, f.firm_id)
                if pair in pair_set:
                    edges.append(pair)
            if edges:
                per_firm.append(edges)
                capped_pairs.update(edges)
        cap_groups.append((cap.id, per_firm))

    for src, dst in pairs:
        lines.append(f"(declare-fun {var_name(src, dst)} () Int)")
    for src, dst in sorted(capped_pairs):
        lines.append(f"(declare-fun {_indicator_name(src, dst)} () Bool)")

    for src, dst in pairs:
        lines.append(f"(assert (>= {var_name(src, dst)} 0))")

    for fe in cs.fixed_edges:
        pair = (fe.src_firm, fe.dst_firm)
        if fe.src_firm not in by_id or fe.dst_firm not in by_id:
            raise SmtEmitError(f"fixed edge {fe.id} references a firm not in the dataset")
        term = var_name(*pair) if pair in pair_set else "0"
        lines.append(f"(assert (= {term} {fe.amount_cents}))")

    for eb in cs.edge_bounds:
        src_matched = [f.firm_id for f in firms if eb.src_predicate.matches(f)]
        dst_matched = [f.firm_id for f in firms if eb.dst_predicate.matches(f)]
        for i in src_matched:
            for j in dst_matched:
                if i == j:
                    continue
                term = var_name(i, j) if (i, j) in pair_set else "0"
                lines.append(f"(assert (and (>= {term} {eb.lo_cents}) (<= {term} {eb.hi_cents})))")

    sector_pairs: dict[tuple[str, str], list[str]] = {}
    for src, dst in pairs:
        key = (by_id[src].sector, by_id[dst].sector)
        sector_pairs.setdefault(key, []).append(var_name(src, dst))
    for st in cs.sector_totals:
        total = _plus(sector_pairs.get((st.from_sector, st.to_sector), []))
        lo = st.amount_cents - st.tolerance_cents
        hi = st.amount_cents + st.tolerance_cents
        lo_term = f"(- {-lo})" if lo < 0 else str(lo)
        lines.append(f"(assert (and (>= {total} {lo_term}) (<= {total} {hi})))")

    for src, dst in sorted(capped_pairs):
        lines.append(
            f"(assert (=> (> {var_name(src, dst)} 0) {_indicator_name(src, dst)}))"
        )
    for cap, (cap_id, per_firm) in zip(cs.degree_caps, cap_groups):
        for edges in per_firm:
            count = _plus([f"(ite {_indicator_name(*p)} 1 0)" for p in edges])
            lines.append(f"(assert (<= {count} {cap.max_count}))")

    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# well-formedness smoke checking (tokenizer-level, no full SMT-LIB grammar)

_KNOWN_COMMANDS = {
    "set-option", "set-logic", "set-info", "declare-fun", "declare-const",
    "define-fun", "assert", "check-sat", "get-model", "get-value", "exit", "model",
}

_SMT_TOKEN = re.compile(
    r"""
    (?P<ws>[\s]+)
  | (?P<comment>;[^\n]*)
  | (?P<open>\()
  | (?P<close>\))
  | (?P<string>"(?:[^"]|"")*")
  | (?P<atom>[^\s()";]+)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class SmtDocStats:
    commands: int
    asserts: int
    declares: int


def _tokens(text: str) -> Iterator[tuple[str, str]]:
    pos = 0
    while pos < len(text):
        m = _SMT_TOKEN.match(text, pos)
        if m is None:
            raise SmtSyntaxError(f"illegal character at offset {pos}: {text[pos]!r}")
        kind = m.lastgroup or ""
        if kind not in ("ws", "comment"):
            yield kind, m.group()
        pos = m.end()


def check_wellformed(text: str) -> SmtDocStats:
    """Tokenize and paren-balance the document; every top-level form must be
    a known command. Returns command/assert/declare counts."""
    depth = 0
    commands = asserts = declares = 0
    expect_head = False
    for kind, tok in _tokens(text):
        if kind == "open":
            depth += 1
            expect_head = depth == 1
        elif kind == "close":
            depth -= 1
            if depth < 0:
                raise SmtSyntaxError("unbalanced ')'")
        else:
            if depth == 0:
                raise SmtSyntaxError(f"top-level atom {tok!r} outside any command form")
            if expect_head:
                if tok not in _KNOWN_COMMANDS:
                    raise SmtSyntaxError(f"unknown top-level command {tok!r}")
                commands += 1
                if tok == "assert":
                    asserts += 1
                elif tok in ("declare-fun", "declare-const"):
                    declares += 1
                expect_head = False
    if depth != 0:
        raise SmtSyntaxError(f"unbalanced '(' (depth {depth} at end of document)")
    if commands == 0:
        raise SmtSyntaxError("document contains no commands")
    return SmtDocStats(commands=commands, asserts=asserts, declares=declares)


# ---------------------------------------------------------------------------
# solver output parsing

def _read_sexprs(text: str):
    stack: list[list] = []
    top: list = []
    for kind, tok in _tokens(text):
        if kind == "open":
            stack.append([])
        elif kind == "close":
            if not stack:
                raise SmtSyntaxError("unbalanced ')' in solver output")
            done = stack.pop()
            (stack[-1] if stack else top).append(done)
        else:
            (stack[-1] if stack else top).append(tok)
    if stack:
        raise SmtSyntaxError("unbalanced '(' in solver output")
    return top


def _resolve_pair(name: str, firm_ids: set[str]) -> tuple[str, str]:
    if not name.startswith("w_"):
        raise SmtSyntaxError(f"not a weight variable: {name!r}")
    body = name[2:]
    matches = []
    for idx, ch in enumerate(body):
        if ch != "_":
            continue
        left, right = body[:idx], body[idx + 1:]
        if left in firm_ids and right in firm_ids:
            matches.append((left, right))
    if not matches:
        raise SmtSyntaxError(f"variable {name!r} does not name two known firms")
    if len(set(matches)) > 1:
        raise SmtSyntaxError(f"variable {name!r} is ambiguous: {sorted(set(matches))}")
    return matches[0]


def _int_value(expr) -> int:
    if isinstance(expr, str):
        try:
            return int(expr)
        except ValueError as e:
            raise SmtSyntaxError(f"expected an integer literal, found {expr!r}") from e
    if isinstance(expr, list) and len(expr) == 2 and expr[0] == "-":
        return -_int_value(expr[1])
    raise SmtSyntaxError(f"expected an integer literal, found {expr!r}")


def parse_smt_model(
    text: str,
    firms: Sequence[FirmRecord],
    *,
    dataset_id: str = "",
    year: int | None = None,
    constraint_set_id: str = "",
) -> TransactionModel | None:
    """Turn solver output (``sat`` + model s-expressions) into a model.

    Returns None for ``unsat``/``unknown`` (the explicit no-model result).
    Zero-valued variables are omitted; negative values are rejected since the
    emitted encoding forbids them.
    """
    stripped = text.strip()
    if not stripped:
        raise SmtSyntaxError("empty solver output")
    exprs = _read_sexprs(stripped)
    if not exprs:
        raise SmtSyntaxError("no tokens in solver output")
    verdict = exprs[0]
    if verdict in ("unsat", "unknown"):
        return None
    if verdict != "sat":
        raise SmtSyntaxError(f"expected sat/unsat/unknown, found {verdict!r}")

    defines = []
    for expr in exprs[1:]:
        if not isinstance(expr, list):
            raise SmtSyntaxError(f"unexpected atom {expr!r} after sat")
        items = expr[1:] if expr and expr[0] == "model" else expr
        for item in items:
            if isinstance(item, list) and item and item[0] == "define-fun":
                defines.append(item)

    firm_ids = {f.firm_id for f in firms}
    edges: dict[tuple[str, str], int] = {}
    for item in defines:
        if len(item) != 5:
            raise SmtSyntaxError(f"malformed define-fun: {item!r}")
        _, name, args, sort, value = item
        if sort != "Int" or args != [] or not isinstance(name, str) or not name.startswith("w_"):
            continue
        amount = _int_value(value)
        if amount < 0:
            raise SmtSyntaxError(f"negative weight {amount} for {name!r} violates the encoding")
        if amount == 0:
            continue
        pair = _resolve_pair(name, firm_ids)
        if pair in edges:
            raise SmtSyntaxError(f"duplicate definition for {name!r}")
        edges[pair] = amount

    if year is None:
        years = {f.year for f in firms}
        year = min(years) if years else 0
    ordered = sorted(edges.items())
    digest = hashlib.sha1(repr((dataset_id, year, constraint_set_id, ordered)).encode()).hexdigest()[:12]
    return TransactionModel(
        model_id=f"smt-{digest}",
        dataset_id=dataset_id,
        year=year,
        constraint_set_id=constraint_set_id,
        edges=tuple(Edge(src, dst, amount) for (src, dst), amount in ordered),
        provenance=Provenance.EXTERNAL_SMT,
    )


def render_assignment(edges: dict[tuple[str, str], int], all_pairs: Sequence[tuple[str, str]]) -> str:
    """Format an assignment the way an SMT-LIB solver prints models.

    Useful for feeding heuristic solutions through the solver-output pipeline
    (and for tests that stand in for an external solver).
    """
    lines = ["sat", "(model"]
    for src, dst in all_pairs:
        amount = edges.get((src, dst), 0)
        lines.append(f"  (define-fun {var_name(src, dst)} () Int {amount})")
    lines.append(")")
    return "\n".join(lines) + "\n"
