"""Static validation of SQL candidates against a schema, and beam filtering.

Rules:
  SYNTAX       the text does not parse;
  UNKNOWN_NAME a referenced table/column does not exist in the schema;
  SELECT_SCOPE a field resolves to a table absent from its query's FROM
               clause (applied to all field references by default, or to
               SELECT items only with scope_select_only);
  JOIN_ORDER   a join condition references a table not yet mentioned in the
               JOIN chain.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

from .schema import DatabaseSchema
from .sqlast import ColumnRef, Condition, Predicate, SqlQuery
from .sqlparser import SqlSyntaxError, parse_sql


class Rule(Enum):
    SYNTAX = "SYNTAX"
    SELECT_SCOPE = "SELECT_SCOPE"
    JOIN_ORDER = "JOIN_ORDER"
    UNKNOWN_NAME = "UNKNOWN_NAME"


@dataclass(frozen=True)
class Violation:
    rule: Rule
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.rule.value} {self.location}: {self.message}"


def check(query: Union[str, SqlQuery], schema: DatabaseSchema,
          scope_select_only: bool = False) -> list[Violation]:
    """Return all rule violations; an empty list means the query is valid."""
    if isinstance(query, str):
        try:
            ast = parse_sql(query)
        except SqlSyntaxError as exc:
            return [Violation(Rule.SYNTAX, "query", str(exc))]
    else:
        ast = query
    out: list[Violation] = []
    _check_query(ast, schema, "", scope_select_only, out)
    return out


def _check_query(q: SqlQuery, schema: DatabaseSchema, path: str,
                 scope_select_only: bool, out: list[Violation]) -> None:
    from_tables = [t.lower() for t in q.from_tables]
    broken_from = False
    for idx, t in enumerate(from_tables):
        if schema.table(t) is None:
            broken_from = True
            out.append(Violation(Rule.UNKNOWN_NAME, f"{path}from.tables[{idx}]",
                                 f"unknown table: {t}"))
    if broken_from:
        # scope checks against an unresolved FROM list would only cascade
        for i, item in enumerate(q.select_items):
            _check_ref(item.ref, schema, from_tables, f"{path}select.items[{i}]",
                       scope=False, out=out)
        if q.set_rhs is not None:
            _check_query(q.set_rhs, schema, f"{path}set_rhs.",
                         scope_select_only, out)
        return
    for j, join in enumerate(q.joins):
        in_front = set(from_tables[:j + 2])
        for side, ref in (("left", join.left), ("right", join.right)):
            loc = f"{path}from.joins[{j}].{side}"
            if not _name_exists(ref, schema, loc, out):
                continue
            tables = _candidate_tables(ref, schema)
            if not any(t in in_front for t in tables):
                out.append(Violation(
                    Rule.JOIN_ORDER, loc,
                    f"{ref.text()} does not come from a table mentioned in "
                    f"front of it in the JOIN clause"))
    for i, item in enumerate(q.select_items):
        _check_ref(item.ref, schema, from_tables, f"{path}select.items[{i}]",
                   scope=True, out=out)
    scope_rest = not scope_select_only
    _check_condition(q.where, schema, from_tables, f"{path}where",
                     scope_rest, scope_select_only, out)
    for i, ref in enumerate(q.group_by):
        _check_ref(ref, schema, from_tables, f"{path}group_by[{i}]",
                   scope=scope_rest, out=out)
    _check_condition(q.having, schema, from_tables, f"{path}having",
                     scope_rest, scope_select_only, out)
    for i, key in enumerate(q.order_by):
        _check_ref(key.expr.ref, schema, from_tables, f"{path}order_by[{i}]",
                   scope=scope_rest, out=out)
    if q.set_rhs is not None:
        _check_query(q.set_rhs, schema, f"{path}set_rhs.", scope_select_only, out)


def _check_condition(cond: Optional[Condition], schema: DatabaseSchema,
                     from_tables: list[str], path: str, scope: bool,
                     scope_select_only: bool, out: list[Violation]) -> None:
    if cond is None:
        return
    if isinstance(cond, Predicate):
        _check_ref(cond.lhs.ref, schema, from_tables, path, scope, out)
        if isinstance(cond.operand, SqlQuery):
            _check_query(cond.operand, schema, f"{path}.subquery.",
                         scope_select_only, out)
        return
    for i, child in enumerate(cond.children):
        _check_condition(child, schema, from_tables, f"{path}[{i}]",
                         scope, scope_select_only, out)


def _name_exists(ref: ColumnRef, schema: DatabaseSchema, loc: str,
                 out: list[Violation]) -> bool:
    if ref.is_star:
        if ref.table and schema.table(ref.table) is None:
            out.append(Violation(Rule.UNKNOWN_NAME, loc,
                                 f"unknown table: {ref.table}"))
            return False
        return True
    if ref.table is not None:
        if schema.table(ref.table) is None:
            out.append(Violation(Rule.UNKNOWN_NAME, loc,
                                 f"unknown table: {ref.table}"))
            return False
        if schema.field_in_table(ref.table, ref.column) is None:
            out.append(Violation(Rule.UNKNOWN_NAME, loc,
                                 f"unknown column: {ref.text()}"))
            return False
        return True
    if not schema.tables_with_column(ref.column):
        out.append(Violation(Rule.UNKNOWN_NAME, loc,
                             f"unknown column: {ref.column}"))
        return False
    return True


def _candidate_tables(ref: ColumnRef, schema: DatabaseSchema) -> list[str]:
    if ref.table is not None:
        return [ref.table.lower()]
    if ref.is_star:
        return []
    return schema.tables_with_column(ref.column)


def _check_ref(ref: ColumnRef, schema: DatabaseSchema, from_tables: list[str],
               loc: str, scope: bool, out: list[Violation]) -> None:
    if not _name_exists(ref, schema, loc, out):
        return
    if not scope:
        return
    if ref.is_star:
        if ref.table and ref.table.lower() not in from_tables:
            out.append(Violation(Rule.SELECT_SCOPE, loc,
                                 f"{ref.text()} is not in the FROM clause"))
        return
    tables = _candidate_tables(ref, schema)
    if not any(t in from_tables for t in tables):
        out.append(Violation(
            Rule.SELECT_SCOPE, loc,
            f"{ref.text()} does not come from a table in the FROM clause"))


def filter_beam(candidates: list[str], schema: DatabaseSchema,
                scope_select_only: bool = False) -> Optional[tuple[SqlQuery, int]]:
    """First candidate (best rank wins, 1-based) with zero violations."""
    for rank, text in enumerate(candidates, start=1):
        try:
            ast = parse_sql(text)
        except SqlSyntaxError:
            continue
        if not check(ast, schema, scope_select_only=scope_select_only):
            return ast, rank
    return None
