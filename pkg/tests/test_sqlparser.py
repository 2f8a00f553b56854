import random
import string

import pytest

from photon.sqlast import (And, ColumnRef, Expr, Join, Literal, Or, OrderKey,
                           Predicate, SqlQuery, exact_set_match, format_sql)
from photon.sqlparser import SqlSyntaxError, parse_sql


def test_minimal_count_query():
    q = parse_sql("SELECT count(*) FROM singer")
    assert q.select_items == (Expr(ColumnRef("*"), aggregate="COUNT"),)
    assert q.from_tables == ("singer",)


def test_full_clause_ast_matches_hand_construction():
    q = parse_sql("SELECT name FROM singer WHERE age > 20 "
                  "ORDER BY age DESC LIMIT 1")
    expected = SqlQuery(
        select_items=(Expr(ColumnRef("name")),),
        from_tables=("singer",),
        where=Predicate(Expr(ColumnRef("age")), ">", Literal(20)),
        order_by=(OrderKey(Expr(ColumnRef("age")), descending=True),),
        limit=1)
    assert q == expected


def test_missing_select_list_offset():
    with pytest.raises(SqlSyntaxError) as exc:
        parse_sql("SELECT FROM singer")
    assert exc.value.offset == 8


def test_join_and_qualified_refs():
    q = parse_sql("SELECT singer.name FROM singer JOIN concert "
                  "ON singer.singer_id = concert.singer_ref")
    assert q.from_tables == ("singer", "concert")
    assert q.joins == (Join(ColumnRef("singer_id", table="singer"),
                            ColumnRef("singer_ref", table="concert")),)


def test_between_and_not_in():
    q = parse_sql("SELECT a FROM t WHERE a BETWEEN 1 AND 5 AND b NOT IN "
                  "(SELECT b FROM u)")
    assert isinstance(q.where, And)
    between, notin = q.where.children
    assert between.op == "BETWEEN"
    assert between.operand == (Literal(1), Literal(5))
    assert notin.op == "NOT IN"
    assert isinstance(notin.operand, SqlQuery)


def test_string_escape_roundtrip():
    q = parse_sql("SELECT a FROM t WHERE b = 'O''Brien'")
    assert q.where.operand == Literal("O'Brien")
    assert parse_sql(format_sql(q)) == q


def test_canonical_formatting():
    q = parse_sql("select distinct name , age from singer where "
                  "( age > 20 or age < 5 ) and name like 'A%'")
    text = format_sql(q)
    assert text == ("SELECT DISTINCT name, age FROM singer WHERE "
                    "(age > 20 OR age < 5) AND name LIKE 'A%'")
    assert parse_sql(text) == q


def test_set_op_roundtrip():
    q = parse_sql("SELECT a FROM t UNION SELECT a FROM u ORDER BY a LIMIT 2")
    assert q.set_op == "UNION"
    assert q.set_rhs.limit == 2
    assert parse_sql(format_sql(q)) == q


def test_group_having_roundtrip():
    q = parse_sql("SELECT country, COUNT(*) FROM singer GROUP BY country "
                  "HAVING COUNT(*) >= 2")
    assert q.group_by == (ColumnRef("country"),)
    assert q.having == Predicate(Expr(ColumnRef("*"), aggregate="COUNT"),
                                 ">=", Literal(2))
    assert parse_sql(format_sql(q)) == q


def test_parser_rejects_trailing_garbage():
    with pytest.raises(SqlSyntaxError):
        parse_sql("SELECT a FROM t extra tokens (")


def test_parser_never_crashes_on_noise():
    rng = random.Random(7)
    alphabet = string.printable + "é€和"
    for _ in range(500):
        text = "".join(rng.choice(alphabet)
                       for _ in range(rng.randrange(0, 60)))
        try:
            parse_sql(text)
        except SqlSyntaxError:
            pass


def test_parser_depth_limited():
    deep = "SELECT a FROM t WHERE " + "(" * 500 + "a = 1" + ")" * 500
    with pytest.raises(SqlSyntaxError):
        parse_sql(deep)


# -- exact set match


def test_em_reflexive_symmetric():
    q = parse_sql("SELECT a, COUNT(*) FROM t GROUP BY a HAVING COUNT(*) > 1")
    p = parse_sql("SELECT COUNT(*), a FROM t GROUP BY a HAVING COUNT(*) > 1")
    assert exact_set_match(q, q)
    assert exact_set_match(q, p) and exact_set_match(p, q)


def test_em_select_items_unordered_via_sorted_clause_oracle():
    a = parse_sql("SELECT a, b FROM t")
    b = parse_sql("SELECT b, a FROM t")
    # independent set-semantics check: compare sorted item multisets
    sa = sorted(repr(i) for i in a.select_items)
    sb = sorted(repr(i) for i in b.select_items)
    assert sa == sb
    assert exact_set_match(a, b)


def test_em_conjunct_permutation():
    a = parse_sql("SELECT a FROM t WHERE x = 1 AND y = 2")
    b = parse_sql("SELECT a FROM t WHERE y = 2 AND x = 1")
    assert exact_set_match(a, b, with_values=True)


def test_em_value_sensitivity():
    a = parse_sql("SELECT a FROM t WHERE x = 20")
    b = parse_sql("SELECT a FROM t WHERE x = 30")
    assert not exact_set_match(a, b, with_values=True)
    assert exact_set_match(a, b, with_values=False)


def test_em_string_values_case_insensitive():
    a = parse_sql("SELECT a FROM t WHERE x = 'Vienna'")
    b = parse_sql("SELECT a FROM t WHERE x = 'vienna'")
    assert exact_set_match(a, b, with_values=True)


def test_em_order_by_is_ordered():
    a = parse_sql("SELECT a FROM t ORDER BY a, b")
    b = parse_sql("SELECT a FROM t ORDER BY b, a")
    assert not exact_set_match(a, b)


def test_em_limit_presence_vs_value():
    a = parse_sql("SELECT a FROM t ORDER BY a LIMIT 1")
    b = parse_sql("SELECT a FROM t ORDER BY a LIMIT 5")
    c = parse_sql("SELECT a FROM t ORDER BY a")
    assert exact_set_match(a, b, with_values=False)
    assert not exact_set_match(a, b, with_values=True)
    assert not exact_set_match(a, c, with_values=False)


def test_em_join_sides_normalized():
    a = parse_sql("SELECT t.a FROM t JOIN u ON t.id = u.id")
    b = parse_sql("SELECT t.a FROM t JOIN u ON u.id = t.id")
    assert exact_set_match(a, b)


def test_em_literal_vs_subquery_not_equal():
    a = parse_sql("SELECT a FROM t WHERE x = 5")
    b = parse_sql("SELECT a FROM t WHERE x = (SELECT y FROM u)")
    assert not exact_set_match(a, b, with_values=False)


def test_non_count_star_aggregate_rejected():
    with pytest.raises(SqlSyntaxError):
        parse_sql("SELECT SUM(*) FROM t")
    parse_sql("SELECT COUNT(*) FROM t")


def test_random_ast_round_trip():
    from corpus import random_ast
    rng = random.Random(99)
    for _ in range(400):
        ast = random_ast(rng)
        assert parse_sql(format_sql(ast)) == ast, format_sql(ast)
