"""Lexer and recursive-descent parser for the supported SQL subset.

Every failure path raises SqlSyntaxError carrying a 1-based character
offset; arbitrary input never crashes the parser.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .sqlast import (AGGREGATES, And, ColumnRef, Expr, Join, Literal, Or,
                     OrderKey, Predicate, SET_OPS, SqlQuery)

KEYWORDS = {
    "SELECT", "DISTINCT", "FROM", "JOIN", "ON", "WHERE", "AND", "OR", "NOT",
    "IN", "LIKE", "BETWEEN", "GROUP", "BY", "HAVING", "ORDER", "ASC", "DESC",
    "LIMIT", "UNION", "INTERSECT", "EXCEPT",
} | set(AGGREGATES)

_MAX_DEPTH = 80


class SqlSyntaxError(Exception):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset  # 1-based character position


@dataclass(frozen=True)
class Tok:
    kind: str  # NAME KEYWORD NUMBER STRING OP EOF
    text: str
    pos: int  # 0-based character offset


def lex(text: str) -> list[Tok]:
    toks: list[Tok] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in ("'", '"'):
            quote = ch
            j = i + 1
            buf: list[str] = []
            while True:
                if j >= n:
                    raise SqlSyntaxError("unterminated string literal", i + 1)
                if text[j] == quote:
                    if quote == "'" and j + 1 < n and text[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                buf.append(text[j])
                j += 1
            toks.append(Tok("STRING", "".join(buf), i))
            i = j + 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            toks.append(Tok("NUMBER", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "KEYWORD" if word.upper() in KEYWORDS else "NAME"
            toks.append(Tok(kind, word, i))
            i = j
            continue
        two = text[i:i + 2]
        if two in ("<=", ">=", "!=", "<>"):
            toks.append(Tok("OP", "!=" if two == "<>" else two, i))
            i += 2
            continue
        if ch in "=<>(),.*":
            toks.append(Tok("OP", ch, i))
            i += 1
            continue
        raise SqlSyntaxError(f"unexpected character {ch!r}", i + 1)
    toks.append(Tok("EOF", "", n))
    return toks


class _Parser:
    def __init__(self, toks: list[Tok]):
        self.toks = toks
        self.i = 0
        self.depth = 0

    # -- token helpers

    def peek(self) -> Tok:
        return self.toks[self.i]

    def next(self) -> Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at_keyword(self, *words: str) -> bool:
        t = self.peek()
        return t.kind == "KEYWORD" and t.text.upper() in words

    def expect_keyword(self, word: str) -> Tok:
        t = self.peek()
        if not self.at_keyword(word):
            raise SqlSyntaxError(f"expected {word}", t.pos + 1)
        return self.next()

    def at_op(self, *ops: str) -> bool:
        t = self.peek()
        return t.kind == "OP" and t.text in ops

    def expect_op(self, op: str) -> Tok:
        t = self.peek()
        if not self.at_op(op):
            raise SqlSyntaxError(f"expected {op!r}", t.pos + 1)
        return self.next()

    def error(self, message: str) -> SqlSyntaxError:
        return SqlSyntaxError(message, self.peek().pos + 1)

    def _enter(self) -> None:
        self.depth += 1
        if self.depth > _MAX_DEPTH:
            raise self.error("query nesting too deep")

    # -- grammar

    def parse_query(self) -> SqlQuery:
        self._enter()
        try:
            core = self.parse_select_core()
            if self.at_keyword(*SET_OPS):
                op = self.next().text.upper()
                rhs = self.parse_query()
                return replace(core, set_op=op, set_rhs=rhs)
            return core
        finally:
            self.depth -= 1

    def parse_select_core(self) -> SqlQuery:
        self.expect_keyword("SELECT")
        distinct = False
        if self.at_keyword("DISTINCT"):
            self.next()
            distinct = True
        items = [self.parse_expr()]
        while self.at_op(","):
            self.next()
            items.append(self.parse_expr())
        self.expect_keyword("FROM")
        tables = [self.parse_table_name()]
        joins = []
        while self.at_keyword("JOIN"):
            self.next()
            tables.append(self.parse_table_name())
            self.expect_keyword("ON")
            left = self.parse_column_ref()
            self.expect_op("=")
            right = self.parse_column_ref()
            joins.append(Join(left, right))
        where = None
        if self.at_keyword("WHERE"):
            self.next()
            where = self.parse_condition()
        group_by: list[ColumnRef] = []
        having = None
        if self.at_keyword("GROUP"):
            self.next()
            self.expect_keyword("BY")
            group_by.append(self.parse_column_ref())
            while self.at_op(","):
                self.next()
                group_by.append(self.parse_column_ref())
            if self.at_keyword("HAVING"):
                self.next()
                having = self.parse_condition()
        order_by: list[OrderKey] = []
        if self.at_keyword("ORDER"):
            self.next()
            self.expect_keyword("BY")
            order_by.append(self.parse_order_key())
            while self.at_op(","):
                self.next()
                order_by.append(self.parse_order_key())
        limit = None
        if self.at_keyword("LIMIT"):
            self.next()
            t = self.peek()
            if t.kind != "NUMBER" or "." in t.text:
                raise self.error("expected integer after LIMIT")
            self.next()
            limit = int(t.text)
        return SqlQuery(select_items=tuple(items), distinct=distinct,
                        from_tables=tuple(tables), joins=tuple(joins),
                        where=where, group_by=tuple(group_by), having=having,
                        order_by=tuple(order_by), limit=limit)

    def parse_table_name(self) -> str:
        t = self.peek()
        if t.kind != "NAME":
            raise self.error("expected table name")
        self.next()
        return t.text.lower()

    def parse_column_ref(self) -> ColumnRef:
        t = self.peek()
        if self.at_op("*"):
            self.next()
            return ColumnRef("*")
        if t.kind != "NAME":
            raise self.error("expected column reference")
        self.next()
        if self.at_op("."):
            self.next()
            c = self.peek()
            if self.at_op("*"):
                self.next()
                return ColumnRef("*", table=t.text.lower())
            if c.kind != "NAME":
                raise self.error("expected column name after '.'")
            self.next()
            return ColumnRef(c.text.lower(), table=t.text.lower())
        return ColumnRef(t.text.lower())

    def parse_expr(self) -> Expr:
        t = self.peek()
        if t.kind == "KEYWORD" and t.text.upper() in AGGREGATES:
            agg = self.next().text.upper()
            self.expect_op("(")
            star_at = self.peek().pos
            ref = self.parse_column_ref()
            if ref.is_star and agg != "COUNT":
                raise SqlSyntaxError(f"{agg}(*) is not supported", star_at + 1)
            self.expect_op(")")
            return Expr(ref, aggregate=agg)
        return Expr(self.parse_column_ref())

    def parse_order_key(self) -> OrderKey:
        expr = self.parse_expr()
        descending = False
        if self.at_keyword("ASC"):
            self.next()
        elif self.at_keyword("DESC"):
            self.next()
            descending = True
        return OrderKey(expr, descending)

    def parse_condition(self) -> Predicate | And | Or:
        self._enter()
        try:
            left = self.parse_and_group()
            if not self.at_keyword("OR"):
                return left
            children = [left]
            while self.at_keyword("OR"):
                self.next()
                children.append(self.parse_and_group())
            return Or(tuple(children))
        finally:
            self.depth -= 1

    def parse_and_group(self) -> Predicate | And | Or:
        left = self.parse_condition_atom()
        if not self.at_keyword("AND"):
            return left
        children = [left]
        while self.at_keyword("AND"):
            self.next()
            children.append(self.parse_condition_atom())
        return And(tuple(children))

    def parse_condition_atom(self) -> Predicate | And | Or:
        if self.at_op("("):
            self.next()
            cond = self.parse_condition()
            self.expect_op(")")
            return cond
        return self.parse_predicate()

    def parse_predicate(self) -> Predicate:
        lhs = self.parse_expr()
        t = self.peek()
        if self.at_op("=", "!=", "<", "<=", ">", ">="):
            op = self.next().text
            return Predicate(lhs, op, self.parse_operand())
        if self.at_keyword("LIKE"):
            self.next()
            s = self.peek()
            if s.kind != "STRING":
                raise self.error("expected string pattern after LIKE")
            self.next()
            return Predicate(lhs, "LIKE", Literal(s.text))
        if self.at_keyword("NOT"):
            self.next()
            self.expect_keyword("IN")
            return Predicate(lhs, "NOT IN", self.parse_subquery_operand())
        if self.at_keyword("IN"):
            self.next()
            return Predicate(lhs, "IN", self.parse_subquery_operand())
        if self.at_keyword("BETWEEN"):
            self.next()
            lo = self.parse_literal()
            self.expect_keyword("AND")
            hi = self.parse_literal()
            return Predicate(lhs, "BETWEEN", (lo, hi))
        raise SqlSyntaxError("expected comparison operator", t.pos + 1)

    def parse_operand(self):
        if self.at_op("("):
            self.next()
            sub = self.parse_query()
            self.expect_op(")")
            return sub
        return self.parse_literal()

    def parse_subquery_operand(self) -> SqlQuery:
        self.expect_op("(")
        sub = self.parse_query()
        self.expect_op(")")
        return sub

    def parse_literal(self) -> Literal:
        t = self.peek()
        if t.kind == "STRING":
            self.next()
            return Literal(t.text)
        if t.kind == "NUMBER":
            self.next()
            if "." in t.text:
                return Literal(float(t.text))
            return Literal(int(t.text))
        raise self.error("expected literal value")


def parse_sql(text: str) -> SqlQuery:
    """Parse a query in the subset grammar; deterministic; raises
    SqlSyntaxError (with 1-based offset) on any malformed input."""
    if not isinstance(text, str):
        raise SqlSyntaxError("input is not text", 1)
    parser = _Parser(lex(text))
    query = parser.parse_query()
    t = parser.peek()
    if t.kind != "EOF":
        raise SqlSyntaxError(f"unexpected trailing input {t.text!r}", t.pos + 1)
    return query
