import itertools
import math
import random

import numpy as np
import pytest

from photon.decoder import (Action, DecodeContext, Decoded, EOS_ACTION,
                            FeatureScorer, MalformedActionSequence,
                            OracleScorer, UncopyableLiteral, VOCAB,
                            actions_to_sql, beam_decode, generate,
                            legal_actions, reserved_vocab, sql_to_actions,
                            translate)
from photon.encoding import HashingEmbedder, encode_question, serialize
from photon.sqlast import exact_set_match, format_sql, format_tokens
from photon.sqlparser import parse_sql
from photon.textutil import words

from corpus import random_database, random_schema, random_valid_query


def test_vocab_size_and_digits():
    vocab = reserved_vocab()
    assert len(vocab) == 80
    assert list(vocab.tokens[-10:]) == [str(d) for d in range(10)]
    assert len(set(vocab.tokens)) == 80


def test_vocab_covers_formatter_terminals():
    rng = random.Random(5)
    literal_kinds = {"NUMBER", "STRING"}
    names = set()
    terminals = set()
    for _ in range(100):
        schema = random_schema(rng, 4)
        db = random_database(rng, schema, 6)
        q = random_valid_query(rng, schema, db)
        for tok in format_tokens(q):
            if tok.upper() in VOCAB.tokens:
                terminals.add(tok.upper())
            else:
                names.add(tok)
    # everything that is not a name/literal/qualified ref is in the vocabulary
    for tok in names:
        assert (tok.replace(".", "").replace("_", "").isalnum()
                or tok.startswith("'")
                or tok.replace(".", "").isdigit()), tok


def test_actions_to_sql_minimal(concert_schema):
    enc = encode_question("how many singers are there", concert_schema)
    actions = [generate("SELECT"), generate("COUNT"), generate("("),
               generate("*"), generate(")"), generate("FROM"),
               Action("copy_s", "singer"), EOS_ACTION]
    assert actions_to_sql(actions, enc, concert_schema) == \
        "SELECT COUNT(*) FROM singer"


def test_actions_to_sql_quoted_copy(concert_schema):
    enc = encode_question("who lives in France today", concert_schema)
    france = enc.question_span.start + 3
    actions = [generate("SELECT"), Action("copy_s", "singer.name"),
               generate("FROM"), Action("copy_s", "singer"),
               generate("WHERE"), Action("copy_s", "singer.country"),
               generate("="), generate("'"), Action("copy_q", france),
               generate("'"), EOS_ACTION]
    text = actions_to_sql(actions, enc, concert_schema)
    assert text == ("SELECT singer.name FROM singer WHERE "
                    "singer.country = 'France'")
    parse_sql(text)


def test_actions_to_sql_digit_merge(concert_schema):
    enc = encode_question("list them", concert_schema)
    actions = [generate("SELECT"), Action("copy_s", "singer.name"),
               generate("FROM"), Action("copy_s", "singer"),
               generate("WHERE"), Action("copy_s", "singer.age"),
               generate(">"), generate("2"), generate("0"), EOS_ACTION]
    assert actions_to_sql(actions, enc, concert_schema).endswith("age > 20")


def test_actions_to_sql_missing_eos(concert_schema):
    enc = encode_question("x", concert_schema)
    with pytest.raises(MalformedActionSequence):
        actions_to_sql([generate("SELECT")], enc, concert_schema)


def test_actions_to_sql_dangling_quote(concert_schema):
    enc = encode_question("x", concert_schema)
    with pytest.raises(MalformedActionSequence):
        actions_to_sql([generate("SELECT"), generate("'"), EOS_ACTION],
                       enc, concert_schema)


def test_sql_to_actions_count_example(concert_schema):
    enc = encode_question("how many singers are there", concert_schema)
    gold = parse_sql("SELECT COUNT(*) FROM singer")
    actions = sql_to_actions(gold, enc, concert_schema)
    assert len(actions) == 8
    assert actions[-1] == EOS_ACTION
    assert actions_to_sql(actions, enc, concert_schema) == format_sql(gold)


def test_sql_to_actions_digit_generation(concert_schema):
    enc = encode_question("who is older than twenty", concert_schema)
    gold = parse_sql("SELECT name FROM singer WHERE age > 20")
    actions = sql_to_actions(gold, enc, concert_schema)
    digit_gens = [a for a in actions
                  if a.kind == "gen" and VOCAB.tokens[a.ref] in ("2", "0")]
    assert [VOCAB.tokens[a.ref] for a in digit_gens] == ["2", "0"]


def test_sql_to_actions_prefers_question_copy_for_numbers(concert_schema):
    enc = encode_question("who is older than 20", concert_schema)
    gold = parse_sql("SELECT name FROM singer WHERE age > 20")
    actions = sql_to_actions(gold, enc, concert_schema)
    assert any(a.kind == "copy_q" for a in actions)


def test_sql_to_actions_uncopyable(concert_schema):
    enc = encode_question("who sings", concert_schema)
    gold = parse_sql("SELECT name FROM singer WHERE country = 'Vienna'")
    with pytest.raises(UncopyableLiteral):
        sql_to_actions(gold, enc, concert_schema)


def test_beam_greedy_follows_oracle(concert_schema):
    enc = encode_question("how many singers are there", concert_schema)
    gold = parse_sql("SELECT COUNT(*) FROM singer")
    path = sql_to_actions(gold, enc, concert_schema)
    out = beam_decode(OracleScorer([(path, 1.0)]), enc, beam_width=1,
                      max_len=40)
    assert len(out) == 1
    assert list(out[0].actions) == path
    assert math.isclose(out[0].score, 0.0, abs_tol=1e-12)


class TableScorer:
    """Explicit prefix -> distribution table over a tiny action set."""

    def __init__(self, table):
        self.table = table

    def next_action_distribution(self, prefix, ctx):
        probs = np.zeros(len(ctx.actions))
        dist = self.table.get(tuple(prefix), {EOS_ACTION: 1.0})
        for action, p in dist.items():
            probs[ctx.action_index[action]] = p
        return probs


def test_beam_top3_matches_enumeration(concert_schema):
    enc = encode_question("toy", concert_schema)
    a, b, c = generate("1"), generate("2"), generate("3")
    table = {
        (): {a: 0.6, b: 0.4},
        (a,): {EOS_ACTION: 0.7, c: 0.3},
        (a, c): {EOS_ACTION: 1.0},
        (b,): {EOS_ACTION: 1.0},
    }
    out = beam_decode(TableScorer(table), enc, beam_width=3, max_len=10)

    def prob(seq):
        p = 1.0
        for i in range(len(seq)):
            p *= table.get(tuple(seq[:i]), {EOS_ACTION: 1.0})[seq[i]]
        return p

    sequences = [(a, EOS_ACTION), (a, c, EOS_ACTION), (b, EOS_ACTION)]
    expected = sorted(sequences, key=lambda s: -prob(s))
    assert [list(d.actions) for d in out] == [list(s) for s in expected]
    for d, s in zip(out, expected):
        assert math.isclose(d.score, math.log(prob(s)), abs_tol=1e-12)


def test_beam_scores_non_increasing(concert_schema):
    enc = encode_question("list all singer names now", concert_schema)
    scorer = FeatureScorer(HashingEmbedder(dim=32, seed=2))
    out = beam_decode(scorer, enc, beam_width=6, max_len=12)
    assert len(out) <= 6
    scores = [d.score for d in out]
    assert scores == sorted(scores, reverse=True)
    legal = set(legal_actions(enc))
    for d in out:
        assert set(d.actions) <= legal


def test_beam_width_monotone_top1_for_shipped_scorers(concert_schema):
    enc = encode_question("how many singers are there", concert_schema)
    gold = parse_sql("SELECT COUNT(*) FROM singer")
    other = parse_sql("SELECT name FROM singer")
    paths = [(sql_to_actions(gold, enc, concert_schema), 0.7),
             (sql_to_actions(other, enc, concert_schema), 0.3)]
    tops = []
    for width in (1, 2, 4, 16):
        out = beam_decode(OracleScorer(paths), enc, beam_width=width,
                          max_len=40)
        tops.append(out[0].actions)
    assert all(t == tops[0] for t in tops)

    # wider beams can only improve the best finished score
    scorer = FeatureScorer(HashingEmbedder(dim=32, seed=2))
    best = -math.inf
    for width in (1, 2, 8):
        out = beam_decode(scorer, enc, beam_width=width, max_len=10)
        if out:
            assert out[0].score >= best - 1e-12
            best = max(best, out[0].score)


def test_action_round_trip_em_on_schema_corpus():
    rng = random.Random(17)
    done = 0
    skipped = 0
    while done < 60:
        schema = random_schema(rng, 4)
        db = random_database(rng, schema, 8)
        q = random_valid_query(rng, schema, db)
        lits = [w for w in format_tokens(q) if w.startswith("'")]
        question = "find " + " ".join(w.strip("'") for w in lits) + " rows"
        enc = encode_question(question, schema)
        try:
            actions = sql_to_actions(q, enc, schema)
        except UncopyableLiteral:
            skipped += 1
            continue
        text = actions_to_sql(actions, enc, schema)
        back = parse_sql(text)
        assert exact_set_match(back, q, with_values=True), \
            (format_sql(q), text)
        done += 1
    assert skipped < done


def test_translate_oracle_fixture(concert_schema, concert_db):
    embedder = HashingEmbedder(dim=32, seed=0)
    question = "how many singers are there"
    enc = encode_question(question, concert_schema)
    gold = parse_sql("SELECT COUNT(*) FROM singer")
    scorer = OracleScorer([(sql_to_actions(gold, enc, concert_schema), 1.0)])
    got = translate(question, concert_schema, embedder=embedder,
                    scorer=scorer, beam_width=4, max_len=40)
    assert got is not None and exact_set_match(got, gold, with_values=True)


def test_translate_invalid_candidates_none(concert_schema):
    embedder = HashingEmbedder(dim=32, seed=0)
    question = "gibberish"
    enc = encode_question(question, concert_schema)
    bad = [generate("SELECT"), generate("FROM"), EOS_ACTION]
    scorer = OracleScorer([(bad, 1.0)])
    assert translate(question, concert_schema, embedder=embedder,
                     scorer=scorer, beam_width=4, max_len=10) is None


def test_translate_static_check_recovers_gold(concert_schema):
    embedder = HashingEmbedder(dim=32, seed=0)
    question = "how many singers are there"
    enc = encode_question(question, concert_schema)
    gold = parse_sql("SELECT COUNT(*) FROM singer")
    # rank 1 parses but references an unknown column -> filtered
    invalid = [generate("SELECT"), Action("copy_q", enc.question_span.start),
               generate("FROM"), Action("copy_s", "singer"), EOS_ACTION]
    scorer = OracleScorer([(invalid, 0.9),
                           (sql_to_actions(gold, enc, concert_schema), 0.1)])
    got = translate(question, concert_schema, embedder=embedder,
                    scorer=scorer, beam_width=4, max_len=40)
    assert got is not None and exact_set_match(got, gold, with_values=True)


def test_beam_returns_empty_when_nothing_finishes(concert_schema):
    enc = encode_question("loop forever", concert_schema)
    never_ending = generate("SELECT")

    class LoopScorer:
        def next_action_distribution(self, prefix, ctx):
            probs = np.zeros(len(ctx.actions))
            probs[ctx.action_index[never_ending]] = 1.0
            return probs

    assert beam_decode(LoopScorer(), enc, beam_width=2, max_len=15) == []
