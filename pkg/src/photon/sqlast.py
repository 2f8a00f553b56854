"""AST for the supported SQL subset, canonical formatting, and exact set match.

The subset covers aggregates, multi-table joins with ON, nested WHERE
predicates (including subquery operands), GROUP BY/HAVING, ORDER BY/LIMIT and
the three set operations. Structural equality of the frozen dataclasses is
the round-trip contract for parse/format.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

AGGREGATES = ("COUNT", "SUM", "AVG", "MIN", "MAX")
COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=")
PREDICATE_OPS = COMPARISON_OPS + ("LIKE", "IN", "NOT IN", "BETWEEN")
SET_OPS = ("UNION", "INTERSECT", "EXCEPT")


@dataclass(frozen=True)
class ColumnRef:
    column: str  # canonical field name, or "*"
    table: str | None = None

    @property
    def is_star(self) -> bool:
        return self.column == "*"

    def text(self) -> str:
        return f"{self.table}.{self.column}" if self.table else self.column


@dataclass(frozen=True)
class Expr:
    """A select item / order key / predicate LHS: optional aggregate over a ref."""

    ref: ColumnRef
    aggregate: str | None = None  # one of AGGREGATES


@dataclass(frozen=True)
class Literal:
    value: Union[str, int, float]

    @property
    def is_string(self) -> bool:
        return isinstance(self.value, str)


@dataclass(frozen=True)
class Predicate:
    lhs: Expr
    op: str  # one of PREDICATE_OPS
    # literal; (lo, hi) pair for BETWEEN; or a nested query
    operand: Union[Literal, tuple, "SqlQuery"]


@dataclass(frozen=True)
class And:
    children: tuple = ()


@dataclass(frozen=True)
class Or:
    children: tuple = ()


Condition = Union[Predicate, And, Or]


@dataclass(frozen=True)
class Join:
    left: ColumnRef
    right: ColumnRef


@dataclass(frozen=True)
class OrderKey:
    expr: Expr
    descending: bool = False


@dataclass(frozen=True)
class SqlQuery:
    select_items: tuple = ()  # tuple[Expr, ...]
    distinct: bool = False
    from_tables: tuple = ()  # tuple[str, ...] in clause order
    joins: tuple = ()  # tuple[Join, ...], joins[i] attaches from_tables[i + 1]
    where: Condition | None = None
    group_by: tuple = ()  # tuple[ColumnRef, ...]
    having: Condition | None = None
    order_by: tuple = ()  # tuple[OrderKey, ...]
    limit: int | None = None
    set_op: str | None = None  # one of SET_OPS
    set_rhs: "SqlQuery | None" = None

    def has_aggregate(self) -> bool:
        if any(it.aggregate for it in self.select_items):
            return True
        if any(k.expr.aggregate for k in self.order_by):
            return True
        return _condition_has_aggregate(self.having)


def _condition_has_aggregate(cond: Condition | None) -> bool:
    if cond is None:
        return False
    if isinstance(cond, Predicate):
        return cond.lhs.aggregate is not None
    return any(_condition_has_aggregate(c) for c in cond.children)


def iter_subqueries(query: SqlQuery):
    """Yield the query and every nested query (operands and set-op sides)."""
    yield query
    for cond in (query.where, query.having):
        yield from _iter_condition_subqueries(cond)
    if query.set_rhs is not None:
        yield from iter_subqueries(query.set_rhs)


def _iter_condition_subqueries(cond: Condition | None):
    if cond is None:
        return
    if isinstance(cond, Predicate):
        if isinstance(cond.operand, SqlQuery):
            yield from iter_subqueries(cond.operand)
        return
    for c in cond.children:
        yield from _iter_condition_subqueries(c)


# ---------------------------------------------------------------------------
# Canonical formatting


def quote_string(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def format_literal(lit: Literal) -> str:
    if lit.is_string:
        return quote_string(lit.value)
    if isinstance(lit.value, float) and lit.value.is_integer():
        return repr(lit.value)
    return str(lit.value)


def expr_text(e: Expr) -> str:
    if e.aggregate:
        return f"{e.aggregate}({e.ref.text()})"
    return e.ref.text()


def join_tokens(tokens: list[str]) -> str:
    """Single-space join with canonical tightening around parentheses and
    commas; aggregates glue to their opening parenthesis."""
    out: list[str] = []
    for tok in tokens:
        if not out:
            out.append(tok)
            continue
        prev = out[-1]
        if tok in (")", ","):
            out[-1] = prev + tok
        elif prev.endswith("("):
            out[-1] = prev + tok
        elif tok == "(" and prev.upper() in AGGREGATES:
            out[-1] = prev + tok
        else:
            out.append(tok)
    return " ".join(out)


def format_tokens(query: SqlQuery) -> list[str]:
    """Flat canonical token stream; join_tokens() turns it into text."""
    toks: list[str] = ["SELECT"]
    if query.distinct:
        toks.append("DISTINCT")
    for i, item in enumerate(query.select_items):
        if i:
            toks.append(",")
        _expr_tokens(item, toks)
    toks.append("FROM")
    if query.from_tables:
        toks.append(query.from_tables[0])
    for i, join in enumerate(query.joins):
        toks += ["JOIN", query.from_tables[i + 1], "ON",
                 join.left.text(), "=", join.right.text()]
    if query.where is not None:
        toks.append("WHERE")
        _condition_tokens(query.where, toks, top=True)
    if query.group_by:
        toks += ["GROUP", "BY"]
        for i, ref in enumerate(query.group_by):
            if i:
                toks.append(",")
            toks.append(ref.text())
    if query.having is not None:
        toks.append("HAVING")
        _condition_tokens(query.having, toks, top=True)
    if query.order_by:
        toks += ["ORDER", "BY"]
        for i, key in enumerate(query.order_by):
            if i:
                toks.append(",")
            _expr_tokens(key.expr, toks)
            if key.descending:
                toks.append("DESC")
    if query.limit is not None:
        toks += ["LIMIT", str(query.limit)]
    if query.set_op is not None:
        toks.append(query.set_op)
        toks += format_tokens(query.set_rhs)
    return toks


def _expr_tokens(e: Expr, toks: list[str]) -> None:
    if e.aggregate:
        toks += [e.aggregate, "(", e.ref.text(), ")"]
    else:
        toks.append(e.ref.text())


def _condition_tokens(cond: Condition, toks: list[str], top: bool = False) -> None:
    if isinstance(cond, Predicate):
        _expr_tokens(cond.lhs, toks)
        if cond.op == "BETWEEN":
            lo, hi = cond.operand
            toks += ["BETWEEN", format_literal(lo), "AND", format_literal(hi)]
        elif cond.op in ("IN", "NOT IN"):
            toks += cond.op.split()
            toks.append("(")
            toks += format_tokens(cond.operand)
            toks.append(")")
        else:
            toks.append(cond.op)
            if isinstance(cond.operand, SqlQuery):
                toks.append("(")
                toks += format_tokens(cond.operand)
                toks.append(")")
            else:
                toks.append(format_literal(cond.operand))
        return
    word = "AND" if isinstance(cond, And) else "OR"
    for i, child in enumerate(cond.children):
        if i:
            toks.append(word)
        nested = isinstance(child, (And, Or))
        if nested:
            toks.append("(")
        _condition_tokens(child, toks)
        if nested:
            toks.append(")")


def format_sql(query: SqlQuery) -> str:
    """Canonical text: uppercase keywords, qualified refs as stored,
    single spaces. parse_sql(format_sql(q)) is structurally q."""
    return join_tokens(format_tokens(query))


# ---------------------------------------------------------------------------
# Exact set match


def _ref_key(ref: ColumnRef):
    return (ref.table.lower() if ref.table else None, ref.column.lower())


def _expr_key(e: Expr):
    return (e.aggregate, _ref_key(e.ref))


def _literal_key(lit: Literal, with_values: bool):
    if not with_values:
        return ("lit",)
    if lit.is_string:
        return ("lit", "s", lit.value.lower())
    return ("lit", "n", float(lit.value))


def _operand_key(operand, with_values: bool):
    if isinstance(operand, SqlQuery):
        return ("sql", _query_key(operand, with_values))
    if isinstance(operand, tuple):
        return ("pair",) + tuple(_literal_key(x, with_values) for x in operand)
    return _literal_key(operand, with_values)


def _condition_key(cond: Condition | None, with_values: bool):
    if cond is None:
        return None
    if isinstance(cond, Predicate):
        return ("pred", _expr_key(cond.lhs), cond.op,
                _operand_key(cond.operand, with_values))
    word = "and" if isinstance(cond, And) else "or"
    children = [_condition_key(c, with_values) for c in cond.children]
    if len(children) == 1:
        return children[0]
    return (word, tuple(sorted(children, key=repr)))


def _query_key(q: SqlQuery, with_values: bool):
    select = (q.distinct, tuple(sorted((_expr_key(it) for it in q.select_items),
                                       key=repr)))
    from_key = tuple(sorted(t.lower() for t in q.from_tables))
    joins = tuple(sorted((tuple(sorted((_ref_key(j.left), _ref_key(j.right)),
                                       key=repr)) for j in q.joins), key=repr))
    group = tuple(sorted((_ref_key(r) for r in q.group_by), key=repr))
    order = tuple((_expr_key(k.expr), k.descending) for k in q.order_by)
    if q.limit is None:
        limit = None
    else:
        limit = q.limit if with_values else "present"
    setop = None
    if q.set_op is not None:
        setop = (q.set_op, _query_key(q.set_rhs, with_values))
    return (select, from_key, joins,
            _condition_key(q.where, with_values), group,
            _condition_key(q.having, with_values), order, limit, setop)


def exact_set_match(predicted: SqlQuery, gold: SqlQuery,
                    with_values: bool = False) -> bool:
    """Clause-wise equality treating select items, same-level conjuncts,
    group-by keys and FROM tables as unordered collections. When
    ``with_values`` is false, literal operands compare equal regardless of
    value and LIMIT compares by presence."""
    return _query_key(predicted, with_values) == _query_key(gold, with_values)
