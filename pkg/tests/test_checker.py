import random

from photon.checker import Rule, check, filter_beam
from photon.sqlast import format_sql
from photon.sqlparser import parse_sql

from corpus import (inject_join_order, inject_select_scope, inject_syntax,
                    inject_unknown_name, random_database, random_schema,
                    random_valid_query)


def rules_of(violations):
    return {v.rule for v in violations}


def test_clean_query(concert_schema):
    assert check("SELECT name FROM singer", concert_schema) == []


def test_select_scope_by_hand(concert_schema):
    # age belongs to singer only; FROM mentions concert
    violations = check("SELECT age FROM concert", concert_schema)
    assert rules_of(violations) == {Rule.SELECT_SCOPE}


def test_join_order_by_hand(concert_schema):
    violations = check(
        "SELECT * FROM singer JOIN concert ON country.region = concert.singer_ref",
        concert_schema)
    # country is a known word but not a known table here -> unknown name
    assert Rule.UNKNOWN_NAME in rules_of(violations)
    violations = check(
        "SELECT * FROM singer JOIN concert ON concert.venue = concert.singer_ref",
        concert_schema)
    assert violations == []


def test_join_order_later_table():
    import json

    from photon.schema import load_schema
    doc = {"db_id": "x", "tables": [
        {"name": "a", "columns": [{"name": "id", "type": "number"}]},
        {"name": "b", "columns": [{"name": "id", "type": "number"}]},
        {"name": "c", "columns": [{"name": "id", "type": "number"}]}],
        "foreign_keys": []}
    schema = load_schema(json.dumps(doc))
    violations = check("SELECT * FROM a JOIN b ON c.id = b.id", schema)
    assert rules_of(violations) == {Rule.JOIN_ORDER}
    ok = check("SELECT * FROM a JOIN b ON a.id = b.id JOIN c ON c.id = a.id",
               schema)
    assert ok == []


def test_unknown_name(concert_schema):
    assert rules_of(check("SELECT nope FROM singer", concert_schema)) == \
        {Rule.UNKNOWN_NAME}
    assert rules_of(check("SELECT name FROM ghosts", concert_schema)) == \
        {Rule.UNKNOWN_NAME}


def test_syntax_violation(concert_schema):
    violations = check("SELECT FROM singer", concert_schema)
    assert rules_of(violations) == {Rule.SYNTAX}


def test_scope_select_only_toggle(concert_schema):
    text = "SELECT name FROM singer WHERE concert.year > 2000"
    assert Rule.SELECT_SCOPE in rules_of(check(text, concert_schema))
    assert check(text, concert_schema, scope_select_only=True) == []


def test_subquery_scopes_are_independent(concert_schema):
    text = ("SELECT name FROM singer WHERE singer_id IN "
            "(SELECT singer_ref FROM concert)")
    assert check(text, concert_schema) == []
    bad = ("SELECT name FROM singer WHERE singer_id IN "
           "(SELECT age FROM concert)")
    assert Rule.SELECT_SCOPE in rules_of(check(bad, concert_schema))


def test_text_and_ast_agree(concert_schema):
    text = "SELECT age FROM concert"
    assert check(text, concert_schema) == \
        check(parse_sql(text), concert_schema)


def test_filter_beam_picks_first_valid(concert_schema):
    got = filter_beam(["SELECT nope FROM singer", "SELECT name FROM singer"],
                      concert_schema)
    assert got is not None
    ast, rank = got
    assert rank == 2
    assert format_sql(ast) == "SELECT name FROM singer"


def test_filter_beam_all_invalid(concert_schema):
    assert filter_beam(["SELECT nope FROM singer", "SELEC x"],
                       concert_schema) is None


def test_filter_beam_gold_at_rank_7():
    rng = random.Random(11)
    schema = random_schema(rng, max_tables=4)
    db = random_database(rng, schema, max_rows=8)
    gold = random_valid_query(rng, schema, db)
    gold_text = format_sql(gold)
    beam = []
    for _ in range(6):
        beam.append(format_sql(inject_unknown_name(rng, gold)))
    beam.append(gold_text)
    beam += [format_sql(random_valid_query(rng, schema, db)) for _ in range(5)]
    got = filter_beam(beam, schema)
    assert got is not None and got[1] == 7
    assert format_sql(got[0]) == gold_text


def test_generated_corpus_detection_per_rule():
    rng = random.Random(23)
    per_rule = {Rule.SYNTAX: 0, Rule.UNKNOWN_NAME: 0,
                Rule.SELECT_SCOPE: 0, Rule.JOIN_ORDER: 0}
    valid_count = 0
    while valid_count < 60:
        schema = random_schema(rng, max_tables=4)
        db = random_database(rng, schema, max_rows=6)
        q = random_valid_query(rng, schema, db)
        assert check(q, schema) == [], format_sql(q)
        valid_count += 1

        syntax = inject_syntax(rng, format_sql(q))
        assert Rule.SYNTAX in rules_of(check(syntax, schema))
        per_rule[Rule.SYNTAX] += 1

        unknown = inject_unknown_name(rng, q)
        assert Rule.UNKNOWN_NAME in rules_of(check(unknown, schema))
        per_rule[Rule.UNKNOWN_NAME] += 1

        scoped = inject_select_scope(rng, q, schema)
        if scoped is not None:
            assert Rule.SELECT_SCOPE in rules_of(check(scoped, schema))
            per_rule[Rule.SELECT_SCOPE] += 1

        ordered = inject_join_order(rng, q, schema)
        if ordered is not None:
            assert Rule.JOIN_ORDER in rules_of(check(ordered, schema))
            per_rule[Rule.JOIN_ORDER] += 1
    assert all(count > 5 for count in per_rule.values()), per_rule
