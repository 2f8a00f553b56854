"""Command-line interface: check, translate, forge, eval, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .checker import check
from .engine import Engine, EngineConfig
from .executor import Database
from .forge import Forge, emit_dataset, load_spider_examples
from .metrics import evaluate_files
from .schema import load_schema, load_spider_tables
from .sqlast import format_sql


def _read_schema(path: str):
    return load_schema(Path(path).read_text(encoding="utf-8"))


def cmd_check(args) -> int:
    schema = _read_schema(args.schema)
    if args.sql == "-":
        sql_text = sys.stdin.read()
    else:
        sql_text = Path(args.sql).read_text(encoding="utf-8")
    violations = check(sql_text.strip(), schema,
                       scope_select_only=args.scope_select_only)
    for v in violations:
        print(v)
    return 1 if violations else 0


def cmd_translate(args) -> int:
    schema = _read_schema(args.schema)
    config = EngineConfig(beam_width=args.beam, embed_dim=args.dim,
                          max_decode_len=args.max_len)
    db = Database(schema=schema, tables={t.table_id: [] for t in schema.tables})
    engine = Engine(db, config)
    ast = engine.translate(args.question)
    if ast is None:
        print("UNTRANSLATABLE")
        return 1
    print(format_sql(ast))
    return 0


def _load_forge_inputs(spider_dir: Path):
    tables = spider_dir / "tables.json"
    if tables.exists():
        schemas = load_spider_tables(tables.read_text(encoding="utf-8"))
    else:
        schemas = {}
        for p in sorted((spider_dir / "schemas").glob("*.json")):
            s = load_schema(p.read_text(encoding="utf-8"))
            schemas[s.db_id] = s
    records = []
    for name in ("train.json", "train_spider.json", "examples.json"):
        p = spider_dir / name
        if p.exists():
            records = json.loads(p.read_text(encoding="utf-8"))
            break
    else:
        p = spider_dir / "examples.jsonl"
        if p.exists():
            records = [json.loads(line) for line in
                       p.read_text(encoding="utf-8").splitlines() if line.strip()]
    return load_spider_examples(records), schemas


def cmd_forge(args) -> int:
    sources, schemas = _load_forge_inputs(Path(args.spider_dir))
    if not sources:
        print("no parsable source examples found", file=sys.stderr)
        return 1
    forge = Forge(sources, schemas, seed=args.seed)
    pool = forge.build(ratio=args.ratio, rounds=args.rounds, tau=args.tau)
    emit_dataset(pool, args.out)
    untran = sum(1 for ex in pool if not ex.translatable)
    print(f"wrote {len(pool)} examples ({untran} untranslatable) to {args.out}")
    return 0


def cmd_eval(args) -> int:
    report = evaluate_files(args.task, args.pred, args.gold,
                            with_values=args.with_values)
    for line in report.lines():
        print(line)
    return 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, run

    config = ServiceConfig.from_env(
        port=args.port, data_dir=args.data_dir, beam_width=args.beam,
        theta=args.theta, max_rounds=args.max_rounds, ui_dir=args.ui_dir,
        embed_dim=args.dim, seed=args.seed)
    run(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photon",
        description="Natural language interface to relational databases")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="statically validate SQL against a schema")
    p.add_argument("--schema", required=True)
    p.add_argument("--sql", required=True, help="SQL file, or - for stdin")
    p.add_argument("--scope-select-only", action="store_true",
                   help="restrict scope checking to SELECT items")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("translate", help="map a question to SQL")
    p.add_argument("--schema", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--beam", type=int, default=128)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--max-len", type=int, default=60)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("forge", help="synthesize an untranslatable-question dataset")
    p.add_argument("--spider-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ratio", type=float, default=0.35)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--tau", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_forge)

    p = sub.add_parser("eval", help="score predictions against gold labels")
    p.add_argument("--task", choices=("tran", "span", "em"), required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--with-values", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--beam", type=int, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--max-rounds", type=int, default=None)
    p.add_argument("--ui-dir", default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
