"""In-memory execution of validated SQL ASTs over typed CSV-loaded tables.

Semantics of the subset (pinned for the engine and its test oracle alike):
comparisons with NULL are false; aggregates ignore NULLs except COUNT(*);
NULL sorts before every value ascending; NULLs group and deduplicate as
equal; unqualified columns resolve to the first FROM table declaring them;
equality is Python equality (numbers numeric, strings case-sensitive); LIKE
is case-insensitive; the left operand's ORDER BY/LIMIT apply before a set
operation, and set operations use distinct-set semantics in first-occurrence
order.

Masking is display-level and applies to the top-level result only: a result
row is withheld when a projected cell exposes a confidential field's value
(bare column or MIN/MAX/SUM/AVG over it), and a provenance row is withheld
when any of its cells comes from a confidential column; hidden_count counts
both. Set-operation rows lose their side of origin after deduplication, so a
position that is confidential on either side masks conservatively.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Optional, Union

from .schema import DatabaseSchema, FieldType
from .sqlast import (ColumnRef, Condition, Expr, Literal, Predicate, SqlQuery,
                     expr_text, format_sql)


class ExecutorError(Exception):
    pass


class TypeCoercionError(ExecutorError):
    pass


class ArityError(ExecutorError):
    pass


class ExecutionError(ExecutorError):
    """Runtime failure; signals the INVALID_QUERY dialogue state."""


@dataclass
class Database:
    schema: DatabaseSchema
    tables: dict[str, list[tuple]]


@dataclass
class ResultSet:
    columns: list[str]
    rows: list[tuple]
    provenance: Optional[list[tuple]]
    provenance_columns: Optional[list[str]]
    hidden_count: int
    sql_text: str


_TRUE = {"true", "t", "1", "yes", "y"}
_FALSE = {"false", "f", "0", "no", "n"}


def coerce_cell(text, field_type: FieldType, where: str):
    if text is None or text == "":
        return None
    if field_type is FieldType.NUMBER:
        s = str(text).strip()
        try:
            return int(s)
        except ValueError:
            try:
                return float(s)
            except ValueError:
                raise TypeCoercionError(f"{where}: not a number: {text!r}") from None
    if field_type is FieldType.BOOLEAN:
        s = str(text).strip().lower()
        if s in _TRUE:
            return True
        if s in _FALSE:
            return False
        raise TypeCoercionError(f"{where}: not a boolean: {text!r}")
    return str(text)


def load_database(schema: DatabaseSchema,
                  csv_per_table: Union[Mapping[str, str], str, Path]) -> Database:
    """Build a typed database from one CSV per table (text map or directory)."""
    if isinstance(csv_per_table, (str, Path)):
        root = Path(csv_per_table)
        csv_per_table = {}
        for t in schema.tables:
            p = root / f"{t.canonical_name}.csv"
            csv_per_table[t.canonical_name] = p.read_text(encoding="utf-8") if p.exists() else ""
    tables: dict[str, list[tuple]] = {}
    for t in schema.tables:
        text = csv_per_table.get(t.canonical_name, "")
        fields = schema.fields_of(t.table_id)
        rows: list[tuple] = []
        if text.strip():
            reader = csv.reader(io.StringIO(text))
            header = next(reader, None)
            if header is None:
                tables[t.table_id] = rows
                continue
            header = [h.strip().lower() for h in header]
            names = [f.canonical_name for f in fields]
            if sorted(header) != sorted(names):
                raise ArityError(
                    f"table {t.canonical_name}: header {header} does not match "
                    f"schema columns {names}")
            order = [header.index(n) for n in names]
            for r, raw in enumerate(reader):
                if not raw:
                    continue
                if len(raw) != len(header):
                    raise ArityError(
                        f"table {t.canonical_name} row {r}: {len(raw)} cells, "
                        f"expected {len(header)}")
                rows.append(tuple(
                    coerce_cell(raw[order[c]], fields[c].field_type,
                                f"{t.canonical_name} row {r} column {fields[c].canonical_name}")
                    for c in range(len(fields))))
        tables[t.table_id] = rows
    return Database(schema=schema, tables=tables)


# ---------------------------------------------------------------------------
# Evaluation


def _compare(v, w, op: str) -> bool:
    if v is None or w is None:
        return False
    if isinstance(v, str) and isinstance(w, (int, float)) and not isinstance(w, bool):
        try:
            v = float(v)
        except ValueError:
            return False
    elif isinstance(w, str) and isinstance(v, (int, float)) and not isinstance(v, bool):
        try:
            w = float(w)
        except ValueError:
            return False
    if op == "=":
        return v == w
    if op == "!=":
        return v != w
    if op == "<":
        return v < w
    if op == "<=":
        return v <= w
    if op == ">":
        return v > w
    if op == ">=":
        return v >= w
    raise ExecutionError(f"unsupported operator: {op}")


def _like(v, pattern: str) -> bool:
    if v is None:
        return False
    rx = re.escape(pattern).replace("%", ".*").replace("_", ".")
    return re.fullmatch(rx, str(v), re.IGNORECASE) is not None


class _Scope:
    """Column environment for one query level: the joined FROM rows."""

    def __init__(self, q: SqlQuery, db: Database):
        self.db = db
        self.q = q
        self.from_tables = [t.lower() for t in q.from_tables]
        if len(set(self.from_tables)) != len(self.from_tables):
            raise ExecutionError("duplicate table in FROM is not supported")
        self.columns: list[tuple[str, str]] = []
        self.confidential: list[bool] = []
        for t in self.from_tables:
            for f in db.schema.fields_of(t):
                self.columns.append((t, f.canonical_name))
                self.confidential.append(f.confidential)
        self.pos = {tc: i for i, tc in enumerate(self.columns)}

    def resolve(self, ref: ColumnRef) -> int:
        if ref.table is not None:
            key = (ref.table.lower(), ref.column.lower())
            if key not in self.pos:
                raise ExecutionError(f"cannot resolve {ref.text()}")
            return self.pos[key]
        for t in self.from_tables:
            key = (t, ref.column.lower())
            if key in self.pos:
                return self.pos[key]
        raise ExecutionError(f"cannot resolve {ref.column}")

    def resolved_ref(self, ref: ColumnRef) -> ColumnRef:
        if ref.table is not None or ref.is_star:
            return ref
        t, c = self.columns[self.resolve(ref)]
        return ColumnRef(c, table=t)

    def is_confidential(self, ref: ColumnRef) -> bool:
        return self.confidential[self.resolve(ref)]


def _join_rows(scope: _Scope) -> list[tuple]:
    db, q = scope.db, scope.q
    rows = list(db.tables.get(scope.from_tables[0], []))
    width = len(db.schema.fields_of(scope.from_tables[0]))
    for j, join in enumerate(q.joins):
        new_table = scope.from_tables[j + 1]
        new_rows = db.tables.get(new_table, [])
        new_fields = db.schema.fields_of(new_table)
        new_width = len(new_fields)
        local = {(new_table, f.canonical_name): i for i, f in enumerate(new_fields)}

        def side_pos(ref: ColumnRef):
            if ref.table is not None:
                key = (ref.table.lower(), ref.column.lower())
            else:
                key = None
                for t in scope.from_tables[:j + 2]:
                    if (t, ref.column.lower()) in scope.pos:
                        key = (t, ref.column.lower())
                        break
                if key is None:
                    raise ExecutionError(f"cannot resolve {ref.column}")
            if key[0] == new_table:
                return ("new", local[key])
            if key not in scope.pos or scope.pos[key] >= width:
                raise ExecutionError(f"cannot resolve {ref.text()} at join {j}")
            return ("old", scope.pos[key])

        lside, lpos = side_pos(join.left)
        rside, rpos = side_pos(join.right)
        if lside != rside:
            old_pos = lpos if lside == "old" else rpos
            new_pos = rpos if rside == "new" else lpos
            buckets: dict = {}
            for nr in new_rows:
                k = nr[new_pos]
                if k is None:
                    continue
                buckets.setdefault(k, []).append(nr)
            out = []
            for row in rows:
                k = row[old_pos]
                if k is None:
                    continue
                for nr in buckets.get(k, ()):
                    out.append(row + nr)
            rows = out
        else:
            out = []
            for row in rows:
                for nr in new_rows:
                    combined = row + nr
                    a = combined[width + lpos] if lside == "new" else combined[lpos]
                    b = combined[width + rpos] if rside == "new" else combined[rpos]
                    if a is not None and a == b:
                        out.append(combined)
            rows = out
        width += new_width
    return rows


def _eval_condition(cond: Condition, scope: _Scope, row: tuple,
                    group: Optional[list] = None,
                    subcache: Optional[dict] = None) -> bool:
    if isinstance(cond, Predicate):
        return _eval_predicate(cond, scope, row, group, subcache)
    results = (_eval_condition(c, scope, row, group, subcache)
               for c in cond.children)
    if cond.__class__.__name__ == "And":
        return all(results)
    return any(results)


def _lhs_value(e: Expr, scope: _Scope, row: tuple, group: Optional[list]):
    if e.aggregate:
        if group is None:
            raise ExecutionError("aggregate outside HAVING/SELECT context")
        return _aggregate(e, scope, group)
    return row[scope.resolve(e.ref)] if row is not None else None


def _eval_predicate(pred: Predicate, scope: _Scope, row: tuple,
                    group: Optional[list], subcache: Optional[dict]) -> bool:
    v = _lhs_value(pred.lhs, scope, row, group)
    op = pred.op
    if op == "LIKE":
        return _like(v, pred.operand.value)
    if op in ("IN", "NOT IN"):
        values = _subquery_values(pred.operand, scope.db, subcache)
        if v is None:
            return False
        member = any(v == w for w in values if w is not None)
        return member if op == "IN" else not member
    if op == "BETWEEN":
        lo, hi = pred.operand
        return _compare(v, lo.value, ">=") and _compare(v, hi.value, "<=")
    if isinstance(pred.operand, SqlQuery):
        values = _subquery_values(pred.operand, scope.db, subcache)
        if len(values) > 1:
            raise ExecutionError("scalar subquery returned more than one row")
        w = values[0] if values else None
        return _compare(v, w, op)
    return _compare(v, pred.operand.value, op)


def _subquery_values(sub: SqlQuery, db: Database, subcache: Optional[dict]) -> list:
    key = id(sub)
    if subcache is not None and key in subcache:
        return subcache[key]
    result = _execute(sub, db, top_level=False)
    if len(result.columns) != 1:
        raise ExecutionError("subquery must return a single column")
    values = [r[0] for r in result.rows]
    if subcache is not None:
        subcache[key] = values
    return values


def _aggregate(e: Expr, scope: _Scope, group: list):
    agg = e.aggregate
    if e.ref.is_star:
        if agg != "COUNT":
            raise ExecutionError(f"{agg}(*) is not supported")
        return len(group)
    pos = scope.resolve(e.ref)
    values = [r[pos] for r in group if r[pos] is not None]
    if agg == "COUNT":
        return len(values)
    if not values:
        return None
    if agg in ("SUM", "AVG"):
        total = 0.0
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ExecutionError(f"{agg} over non-numeric value {v!r}")
            total += v
        if agg == "AVG":
            return total / len(values)
        if all(isinstance(v, int) for v in values):
            return int(total)
        return total
    if agg == "MIN":
        return min(values)
    if agg == "MAX":
        return max(values)
    raise ExecutionError(f"unknown aggregate {agg}")


def _sort_wrap(v):
    return (0, 0) if v is None else (1, v)


def _distinct(rows: list[tuple]) -> list[tuple]:
    seen = set()
    out = []
    for r in rows:
        if r not in seen:
            seen.add(r)
            out.append(r)
    return out


def _expanded_items(q: SqlQuery, db: Database, scope: "_Scope") -> list[Expr]:
    items: list[Expr] = []
    for item in q.select_items:
        if item.ref.is_star and item.aggregate is None:
            if item.ref.table is not None:
                t = item.ref.table.lower()
                for f in db.schema.fields_of(t):
                    items.append(Expr(ColumnRef(f.canonical_name, table=t)))
            else:
                for t, c in scope.columns:
                    items.append(Expr(ColumnRef(c, table=t)))
        else:
            items.append(item)
    return items


def _reveal_flags(q: SqlQuery, db: Database) -> list[bool]:
    """Per output position: does the cell expose a confidential field's value?
    For set operations, a position is revealing if either side reveals."""
    core = replace(q, set_op=None, set_rhs=None)
    scope = _Scope(core, db)
    flags = []
    for it in _expanded_items(core, db, scope):
        flags.append(not it.ref.is_star and it.aggregate != "COUNT"
                     and scope.is_confidential(it.ref))
    if q.set_rhs is not None:
        rhs = _reveal_flags(q.set_rhs, db)
        if len(rhs) == len(flags):
            flags = [a or b for a, b in zip(flags, rhs)]
    return flags


def _execute(q: SqlQuery, db: Database, top_level: bool) -> ResultSet:
    if q.set_op is not None:
        left = _execute(replace(q, set_op=None, set_rhs=None), db, top_level=False)
        right = _execute(q.set_rhs, db, top_level=False)
        if len(left.columns) != len(right.columns):
            raise ExecutionError("set operation arity mismatch")
        lrows = _distinct(left.rows)
        lset = set(lrows)
        rset = set(right.rows)
        if q.set_op == "UNION":
            rows = lrows + [r for r in _distinct(right.rows) if r not in lset]
        elif q.set_op == "INTERSECT":
            rows = [r for r in lrows if r in rset]
        else:
            rows = [r for r in lrows if r not in rset]
        hidden = 0
        if top_level:
            reveal = _reveal_flags(q, db)
            if any(reveal):
                kept = []
                for r in rows:
                    if any(c and r[i] is not None for i, c in enumerate(reveal)):
                        hidden += 1
                    else:
                        kept.append(r)
                rows = kept
        return ResultSet(columns=left.columns, rows=rows, provenance=None,
                         provenance_columns=None, hidden_count=hidden,
                         sql_text=format_sql(q))

    scope = _Scope(q, db)
    rows = _join_rows(scope)
    subcache: dict = {}
    if q.where is not None:
        rows = [r for r in rows
                if _eval_condition(q.where, scope, r, None, subcache)]

    is_agg = bool(q.group_by) or q.has_aggregate()
    provenance = list(rows) if is_agg else None
    items = _expanded_items(q, db, scope)

    if is_agg:
        if q.group_by:
            group_pos = [scope.resolve(ref) for ref in q.group_by]
            groups: dict = {}
            for r in rows:
                groups.setdefault(tuple(r[p] for p in group_pos), []).append(r)
            group_list = list(groups.values())
        else:
            group_list = [rows]
        if q.having is not None:
            group_list = [
                g for g in group_list
                if _eval_condition(q.having, scope, g[0] if g else None, g, subcache)
            ]
        units = [(g[0] if g else None, g) for g in group_list]
    else:
        units = [(r, None) for r in rows]

    def project(row, group):
        return tuple(_lhs_value(it, scope, row, group) for it in items)

    def order_value(key_expr: Expr, row, group):
        if key_expr.aggregate:
            if group is None:
                raise ExecutionError("aggregate in ORDER BY without grouping")
            return _aggregate(key_expr, scope, group)
        return row[scope.resolve(key_expr.ref)] if row is not None else None

    if q.order_by:
        for key in reversed(q.order_by):
            units.sort(key=lambda u: _sort_wrap(order_value(key.expr, u[0], u[1])),
                       reverse=key.descending)
    out_rows = [project(row, group) for row, group in units]
    if q.distinct:
        out_rows = _distinct(out_rows)
    if q.limit is not None:
        out_rows = out_rows[:q.limit]

    columns = [expr_text(Expr(scope.resolved_ref(it.ref), it.aggregate))
               for it in items]

    hidden = 0
    prov_columns = None
    if top_level:
        reveal = []
        for it in items:
            conf = (not it.ref.is_star and it.aggregate != "COUNT"
                    and scope.is_confidential(it.ref))
            reveal.append(conf)
        if any(reveal):
            kept = []
            for r in out_rows:
                if any(c and r[i] is not None for i, c in enumerate(reveal)):
                    hidden += 1
                else:
                    kept.append(r)
            out_rows = kept
        if provenance is not None:
            prov_columns = [f"{t}.{c}" for t, c in scope.columns]
            if any(scope.confidential):
                kept = []
                for r in provenance:
                    if any(c and r[i] is not None
                           for i, c in enumerate(scope.confidential)):
                        hidden += 1
                    else:
                        kept.append(r)
                provenance = kept
    else:
        provenance = None

    return ResultSet(columns=columns, rows=out_rows,
                     provenance=provenance if top_level and provenance is not None else None,
                     provenance_columns=prov_columns,
                     hidden_count=hidden, sql_text=format_sql(q))


def execute(ast: SqlQuery, db: Database) -> ResultSet:
    """Run a statically valid query; read-only over the database."""
    return _execute(ast, db, top_level=True)
