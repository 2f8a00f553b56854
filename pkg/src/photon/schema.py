"""Relational schema loading, validation, picklists, and the schema graph.

Schemas are immutable after load and shared freely across sessions. The
on-disk format is one JSON document per database:

    {"db_id": ..., "tables": [{"name": ..., "columns": [{"name": ..., "type": ...,
     "primary": bool, "confidential": bool}]}], "foreign_keys": [["t.col", "t.col"]]}

Table data arrives as one CSV per table with a header row of canonical field
names.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence


class SchemaError(Exception):
    """Base class for schema validation failures."""


class DuplicateName(SchemaError):
    pass


class UnresolvedForeignKey(SchemaError):
    pass


class EmptySchema(SchemaError):
    pass


class ColumnMismatch(SchemaError):
    pass


class FieldType(Enum):
    TEXT = "text"
    NUMBER = "number"
    TIME = "time"
    BOOLEAN = "boolean"
    OTHER = "other"

    @classmethod
    def from_string(cls, s: str) -> "FieldType":
        s = s.strip().lower()
        if s in ("others",):  # common alias in published schema dumps
            s = "other"
        try:
            return cls(s)
        except ValueError:
            return cls.OTHER


def display_tokens_of(name: str) -> list[str]:
    """Lowercased word list of an identifier: singer_name -> [singer, name]."""
    out: list[str] = []
    for part in name.lower().replace("-", "_").split("_"):
        if part:
            out.append(part)
    return out or [name.lower()]


@dataclass(frozen=True)
class Field:
    field_id: str  # "table.column", canonical
    table_id: str
    canonical_name: str
    display_tokens: tuple[str, ...]
    field_type: FieldType
    is_primary: bool = False
    foreign_target: str | None = None
    confidential: bool = False
    picklist: tuple[str, ...] | None = None

    @property
    def display_name(self) -> str:
        return " ".join(self.display_tokens)


@dataclass(frozen=True)
class Table:
    table_id: str  # canonical name
    canonical_name: str
    display_tokens: tuple[str, ...]
    field_ids: tuple[str, ...]

    @property
    def display_name(self) -> str:
        return " ".join(self.display_tokens)


@dataclass
class DatabaseSchema:
    db_id: str
    tables: list[Table]
    fields: list[Field]
    foreign_pairs: list[tuple[str, str]]

    def __post_init__(self) -> None:
        self._table_by_id = {t.table_id: t for t in self.tables}
        self._field_by_id = {f.field_id: f for f in self.fields}

    def table(self, table_id: str) -> Table | None:
        return self._table_by_id.get(table_id.lower())

    def field(self, field_id: str) -> Field | None:
        return self._field_by_id.get(field_id.lower())

    def fields_of(self, table_id: str) -> list[Field]:
        t = self.table(table_id)
        if t is None:
            return []
        return [self._field_by_id[fid] for fid in t.field_ids]

    def field_in_table(self, table_id: str, column: str) -> Field | None:
        return self._field_by_id.get(f"{table_id.lower()}.{column.lower()}")

    def tables_with_column(self, column: str) -> list[str]:
        column = column.lower()
        return [t.table_id for t in self.tables
                if self.field_in_table(t.table_id, column) is not None]

    def field_names(self) -> set[str]:
        return {f.canonical_name for f in self.fields}

    def in_foreign_pair(self, field_id: str) -> bool:
        return any(field_id in pair for pair in self.foreign_pairs)

    def to_document(self) -> dict:
        """Serialize back to the JSON schema file format."""
        tables = []
        for t in self.tables:
            columns = []
            for f in self.fields_of(t.table_id):
                columns.append({
                    "name": f.canonical_name,
                    "type": f.field_type.value,
                    "primary": f.is_primary,
                    "confidential": f.confidential,
                })
            tables.append({"name": t.canonical_name, "columns": columns})
        return {
            "db_id": self.db_id,
            "tables": tables,
            "foreign_keys": [[a, b] for a, b in self.foreign_pairs],
        }


def load_schema(schema_document: str | Mapping,
                extra_confidential: Iterable[str] = ()) -> DatabaseSchema:
    """Parse and validate a schema document.

    ``extra_confidential`` lets deployment configuration flag additional
    "table.column" names confidential beyond the document's own flags.
    """
    if isinstance(schema_document, str):
        try:
            doc = json.loads(schema_document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"schema document is not valid JSON: {exc}") from exc
    else:
        doc = dict(schema_document)

    db_id = str(doc.get("db_id", "")).strip()
    raw_tables = doc.get("tables") or []
    if not db_id or not raw_tables:
        raise EmptySchema("schema must declare db_id and at least one table")
    forced_conf = {c.lower() for c in extra_confidential}

    tables: list[Table] = []
    fields: list[Field] = []
    seen_tables: set[str] = set()
    for raw_t in raw_tables:
        tname = str(raw_t.get("name", "")).strip().lower()
        if not tname:
            raise EmptySchema("table without a name")
        if tname in seen_tables:
            raise DuplicateName(f"duplicate table name: {tname}")
        seen_tables.add(tname)
        columns = raw_t.get("columns") or []
        if not columns:
            raise EmptySchema(f"table {tname} has no columns")
        field_ids: list[str] = []
        seen_cols: set[str] = set()
        for raw_c in columns:
            cname = str(raw_c.get("name", "")).strip().lower()
            if not cname:
                raise EmptySchema(f"column without a name in table {tname}")
            if cname in seen_cols:
                raise DuplicateName(f"duplicate column name: {tname}.{cname}")
            seen_cols.add(cname)
            fid = f"{tname}.{cname}"
            fields.append(Field(
                field_id=fid,
                table_id=tname,
                canonical_name=cname,
                display_tokens=tuple(display_tokens_of(cname)),
                field_type=FieldType.from_string(str(raw_c.get("type", "text"))),
                is_primary=bool(raw_c.get("primary", False)),
                confidential=bool(raw_c.get("confidential", False)) or fid in forced_conf,
            ))
            field_ids.append(fid)
        tables.append(Table(
            table_id=tname,
            canonical_name=tname,
            display_tokens=tuple(display_tokens_of(tname)),
            field_ids=tuple(field_ids),
        ))

    field_index = {f.field_id: i for i, f in enumerate(fields)}
    foreign_pairs: list[tuple[str, str]] = []
    for pair in doc.get("foreign_keys") or []:
        if len(pair) != 2:
            raise UnresolvedForeignKey(f"malformed foreign key entry: {pair}")
        src, dst = (str(p).strip().lower() for p in pair)
        if src not in field_index:
            raise UnresolvedForeignKey(f"foreign key source does not resolve: {src}")
        if dst not in field_index:
            raise UnresolvedForeignKey(f"foreign key target does not resolve: {dst}")
        if fields[field_index[src]].table_id == fields[field_index[dst]].table_id:
            raise UnresolvedForeignKey(
                f"foreign key must join distinct tables: {src} -> {dst}")
        fields[field_index[src]] = replace(fields[field_index[src]], foreign_target=dst)
        foreign_pairs.append((src, dst))

    return DatabaseSchema(db_id=db_id, tables=tables, fields=fields,
                          foreign_pairs=foreign_pairs)


def load_picklists(schema: DatabaseSchema,
                   data: Mapping[str, Sequence[Sequence]],
                   cap: int = 1000) -> DatabaseSchema:
    """Attach the distinct observed values of each non-confidential field.

    ``data`` maps table name to rows aligned with the table's field order.
    Values are kept up to ``cap`` per field, most frequent first, ties in
    lexical order.
    """
    new_fields = list(schema.fields)
    index = {f.field_id: i for i, f in enumerate(new_fields)}
    for tname, rows in data.items():
        table = schema.table(tname)
        if table is None:
            raise ColumnMismatch(f"unknown table in data: {tname}")
        arity = len(table.field_ids)
        counters: list[Counter] = [Counter() for _ in range(arity)]
        for r, row in enumerate(rows):
            if len(row) != arity:
                raise ColumnMismatch(
                    f"{tname} row {r} has {len(row)} cells, expected {arity}")
            for c, cell in enumerate(row):
                if cell is None or cell == "":
                    continue
                counters[c][str(cell)] += 1
        for c, fid in enumerate(table.field_ids):
            f = new_fields[index[fid]]
            if f.confidential:
                continue
            ranked = sorted(counters[c].items(), key=lambda kv: (-kv[1], kv[0]))
            values = tuple(v for v, _ in ranked[:cap])
            new_fields[index[fid]] = replace(f, picklist=values)
    return DatabaseSchema(db_id=schema.db_id, tables=list(schema.tables),
                          fields=new_fields,
                          foreign_pairs=list(schema.foreign_pairs))


def schema_graph(schema: DatabaseSchema) -> dict:
    """Graph document for visualization: tables as nodes, FK pairs as edges."""
    nodes = []
    for t in schema.tables:
        nodes.append({
            "id": t.table_id,
            "name": t.display_name,
            "fields": [schema.field(fid).canonical_name for fid in t.field_ids],
        })
    edges = []
    for src, dst in schema.foreign_pairs:
        edges.append({
            "source": schema.field(src).table_id,
            "target": schema.field(dst).table_id,
            "fields": [src, dst],
        })
    return {"db_id": schema.db_id, "nodes": nodes, "edges": edges}


def load_spider_tables(document: str | list) -> dict[str, DatabaseSchema]:
    """Load schemas from the published cross-domain benchmark's tables.json."""
    entries = json.loads(document) if isinstance(document, str) else document
    out: dict[str, DatabaseSchema] = {}
    for entry in entries:
        db_id = entry["db_id"]
        table_names = [t.lower() for t in entry["table_names_original"]]
        col_entries = entry["column_names_original"]  # [table_idx, name]
        col_types = entry.get("column_types", ["text"] * len(col_entries))
        primary = set(entry.get("primary_keys", []))
        doc_tables: list[dict] = [{"name": t, "columns": []} for t in table_names]
        col_fid: dict[int, str] = {}
        for ci, (ti, cname) in enumerate(col_entries):
            if ti < 0 or cname == "*":
                continue
            cname_l = str(cname).lower()
            doc_tables[ti]["columns"].append({
                "name": cname_l,
                "type": col_types[ci],
                "primary": ci in primary,
            })
            col_fid[ci] = f"{table_names[ti]}.{cname_l}"
        fks = []
        for src, dst in entry.get("foreign_keys", []):
            if src in col_fid and dst in col_fid:
                fks.append([col_fid[src], col_fid[dst]])
        out[db_id] = load_schema({"db_id": db_id, "tables": doc_tables,
                                  "foreign_keys": fks})
    return out
