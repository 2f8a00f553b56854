import json
import random

import pytest

from photon.confusion import SpanLabel
from photon.forge import (BagOfWordsClassifier, Forge, GeneratorExhausted,
                          NoDistractorAvailable, NoLinkedSpan, NotDroppable,
                          SourceExample, UtranExample, adversarial_filter,
                          apply_paraphrase, drop_question, drop_schema,
                          emit_dataset, link_field_spans, load_dataset,
                          original_example, paraphrase, swap_question)
from photon.schema import load_schema
from photon.sqlparser import parse_sql
from photon.textutil import words


@pytest.fixture(scope="module")
def world_schema():
    doc = {"db_id": "worldbank", "tables": [
        {"name": "country", "columns": [
            {"name": "country_id", "type": "number", "primary": True},
            {"name": "region", "type": "text"},
            {"name": "population", "type": "number"}]}],
        "foreign_keys": []}
    return load_schema(json.dumps(doc))


def example(question, sql, db_id="worldbank"):
    return SourceExample(db_id=db_id, question=question, sql=parse_sql(sql))


def test_link_countries_to_table(world_schema):
    ex = example("How many countries exist?", "SELECT COUNT(*) FROM country")
    spans = link_field_spans(ex.question, ex.sql, world_schema)
    assert len(spans) == 1
    assert spans[0].target_id == "country"
    assert (spans[0].start, spans[0].end) == (2, 2)  # "countries"


def test_link_no_shared_tokens(world_schema):
    ex = example("list everything please", "SELECT COUNT(*) FROM country")
    spans = link_field_spans(ex.question, ex.sql, world_schema)
    assert spans == [] or all(s.target_kind == "table" for s in spans)


def test_link_overlap_longest_first():
    doc = {"db_id": "m", "tables": [{"name": "singer", "columns": [
        {"name": "singer_name", "type": "text"},
        {"name": "name", "type": "text"}]}]}
    schema = load_schema(json.dumps(doc))
    sql = parse_sql("SELECT singer_name, name FROM singer")
    spans = link_field_spans("show the singer name please", sql, schema)
    lengths = sorted((s.end - s.start + 1, s.target_id) for s in spans)
    assert (2, "singer.singer_name") in lengths
    positions = set()
    for s in spans:
        for p in range(s.start, s.end + 1):
            assert p not in positions
            positions.add(p)


def test_drop_question_worked_example(world_schema):
    ex = example("How many countries exist?", "SELECT COUNT(*) FROM country")
    out = drop_question(ex, world_schema)
    assert out.question == "How many exist?"
    assert out.origin == "drop_question"
    assert out.label == SpanLabel(1, 3)
    assert out.tokens == ["How", "many", "exist"]


def test_drop_question_removes_preposition(world_schema):
    ex = example("what is the population of countries here",
                 "SELECT population FROM country")
    out = drop_question(ex, world_schema)
    assert "population" in out.dropped_or_swapped or \
        "country" in out.dropped_or_swapped
    assert "  " not in out.question


def test_drop_question_requires_spans(world_schema):
    ex = example("hello there", "SELECT COUNT(*) FROM country")
    with pytest.raises(NoLinkedSpan):
        drop_question(ex, world_schema)


def test_swap_question_label_covers_insertion(world_schema, concert_schema):
    ex = example("How many countries exist?", "SELECT COUNT(*) FROM country")
    out = swap_question(ex, world_schema, [world_schema, concert_schema])
    assert out.origin == "swap_question"
    inserted = out.dropped_or_swapped.split(" -> ")[1]
    toks = out.tokens
    s, e = out.label.start - 1, out.label.end - 1
    assert [t.lower() for t in toks[s:e + 1]] == words(inserted)
    assert out.question != ex.question
    # distractor is absent from the current schema
    assert inserted not in {f.display_name for f in world_schema.fields}


def test_swap_question_requires_distractor(world_schema):
    ex = example("How many countries exist?", "SELECT COUNT(*) FROM country")
    with pytest.raises(NoDistractorAvailable):
        swap_question(ex, world_schema, [world_schema])


def test_drop_schema_label_and_validation(world_schema):
    ex = example("show regions of countries", "SELECT region FROM country")
    out = drop_schema(ex, world_schema)
    assert out.origin == "drop_schema"
    assert out.question == ex.question
    s = out.label.start - 1
    assert out.tokens[s].lower().startswith("region")
    assert out.modified_schema is not None
    assert out.modified_schema.field("country.region") is None
    # reduced schema still validates
    from photon.schema import load_schema as reload
    reload(json.dumps(out.modified_schema.to_document()))


def test_drop_schema_foreign_key_protected(concert_schema):
    ex = SourceExample(db_id="concert_singer",
                       question="which singer ref is used",
                       sql=parse_sql("SELECT singer_ref FROM concert"))
    with pytest.raises(NotDroppable):
        drop_schema(ex, concert_schema)


def test_paraphrase_identity():
    q, span = paraphrase("How many exist?", (1, 1))
    assert q == "How many exist?" and span == (1, 1)


def test_paraphrase_provider_remaps_span():
    provider = lambda q: q.replace("How many", "Tell me how many")
    q, span = paraphrase("How many red items", (2, 2), provider)
    assert span == (4, 4)
    assert words(q)[4] == "red"


def test_paraphrase_span_lost_falls_back():
    provider = lambda q: "something completely different"
    q, span = paraphrase("How many red items", (2, 2), provider)
    assert span is None


def test_apply_paraphrase_whole_question_fallback(world_schema):
    ex = example("How many countries exist?", "SELECT COUNT(*) FROM country")
    swapped = swap_question(ex, world_schema,
                            [world_schema,
                             load_schema(json.dumps({"db_id": "o", "tables": [
                                 {"name": "boat", "columns": [
                                     {"name": "hull", "type": "text"}]}]}))])
    rewritten = apply_paraphrase(swapped, lambda q: "total rewrite here")
    assert rewritten.label == SpanLabel(1, 3)


def test_emit_and_reload_roundtrip(tmp_path, world_schema):
    ex = example("How many countries exist?", "SELECT COUNT(*) FROM country")
    pool = [original_example(ex), drop_question(ex, world_schema)]
    path = tmp_path / "data.jsonl"
    emit_dataset(pool, path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 2
    reloaded = load_dataset(path)
    assert [e.record() for e in reloaded] == [e.record() for e in pool]


def test_classifier_learns_obvious_signal():
    rng = random.Random(0)
    tran = [f"show the {w} of things" for w in
            ("name", "age", "year", "venue", "region", "rank")]
    untran = [f"zzq {w} gibberish" for w in
              ("name", "age", "year", "venue", "region", "rank")]
    clf = BagOfWordsClassifier()
    clf.fit(tran + untran, [0] * len(tran) + [1] * len(untran))
    assert clf.predict_proba("zzq name gibberish") > 0.8
    assert clf.predict_proba("show the rank of things") < 0.2


def _fixture_forge(seed=0):
    schemas = {}
    sources = []
    specs = [
        ("worldbank", [("country", ["region", "population", "area"])],
         [("How many countries exist?", "SELECT COUNT(*) FROM country"),
          ("show the region of countries", "SELECT region FROM country"),
          ("what is the total population", "SELECT SUM(population) FROM country"),
          ("list area values of countries", "SELECT area FROM country")]),
        ("music", [("singer", ["name", "age", "fame"])],
         [("how many singers are there", "SELECT COUNT(*) FROM singer"),
          ("show the name of singers", "SELECT name FROM singer"),
          ("what is the age of each singer", "SELECT age FROM singer"),
          ("rank singers by fame", "SELECT name FROM singer ORDER BY fame DESC")]),
    ]
    for db_id, tables, questions in specs:
        doc = {"db_id": db_id, "tables": [
            {"name": t, "columns": [{"name": c, "type": "text"}
                                    for c in cols] +
                [{"name": f"{t}_key", "type": "number"}]}
            for t, cols in tables], "foreign_keys": []}
        schemas[db_id] = load_schema(json.dumps(doc))
        for q, sql in questions:
            sources.append(SourceExample(db_id=db_id, question=q,
                                         sql=parse_sql(sql)))
    return Forge(sources, schemas, seed=seed)


def test_forge_generate_labeled_consistently():
    forge = _fixture_forge()
    for ex in forge.generate(12):
        qlen = len(ex.tokens)
        assert not ex.translatable
        if ex.origin == "drop_question":
            assert ex.label == SpanLabel(1, qlen)
        else:
            assert 1 <= ex.label.start <= ex.label.end <= qlen
        if ex.origin != "drop_schema":
            assert ex.question != ex.source_question


def test_adversarial_filter_zero_rounds_unchanged():
    forge = _fixture_forge()
    pool = forge.originals() + forge.generate(4)
    out = adversarial_filter(pool, rounds=0, tau=0.9,
                             regenerate=forge.generate)
    assert [e.record() for e in out] == [e.record() for e in pool]


def test_adversarial_filter_tau_one_discards_nothing():
    forge = _fixture_forge()
    pool = forge.originals() + forge.generate(4)
    out = adversarial_filter(pool, rounds=2, tau=1.0,
                             regenerate=forge.generate)
    assert [e.record() for e in out] == [e.record() for e in pool]


def test_adversarial_filter_replaces_easy_examples():
    forge = _fixture_forge(seed=3)
    pool = forge.originals() + forge.generate(6)
    out = adversarial_filter(pool, rounds=2, tau=0.6,
                             regenerate=forge.generate)
    assert sum(1 for e in out if not e.translatable) == 6
    assert sum(1 for e in out if e.translatable) == len(forge.originals())


def test_generator_exhausted():
    # one schema (no swap distractors) and no question/schema token overlap
    doc = {"db_id": "solo", "tables": [{"name": "qqtable", "columns": [
        {"name": "qqcol", "type": "text"}]}]}
    schema = load_schema(json.dumps(doc))
    sources = [SourceExample(db_id="solo", question="hello there friend",
                             sql=parse_sql("SELECT qqcol FROM qqtable"))]
    forge = Forge(sources, {"solo": schema}, seed=0)
    with pytest.raises(GeneratorExhausted):
        forge.generate(5)


def test_build_hits_ratio():
    forge = _fixture_forge(seed=1)
    pool = forge.build(ratio=0.35, rounds=1, tau=0.9)
    untran = sum(1 for e in pool if not e.translatable)
    frac = untran / len(pool)
    assert abs(frac - 0.35) <= 0.05
