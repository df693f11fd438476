"""Table corpus and knowledge-base ingestion.

Input formats (one JSON object per line)::

    tables.jsonl  {"id", "caption", "pageTitle", "headings": [...], "rows": [[cell, ...], ...]}
                  cell = {"e": "<entityId>"} | {"t": "<text>"}
    kb.jsonl      {"id", "description", "properties": {label: [values]}}

A table is relational when it has a core column (the column holding the most
entity links, leftmost on ties, at least two links) and at least two rows and
two columns.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Optional, Union

from .text import DEFAULT_ANALYZER, Analyzer

logger = logging.getLogger(__name__)

ENTITY = "entity"
TEXT = "text"

REPRESENTATIONS = ("all", "description", "properties")

Source = Union[str, Path, IO[str], Iterable[str]]


class CorpusError(Exception):
    """Raised when an input stream cannot be read at all."""


@dataclass(frozen=True)
class Cell:
    kind: str
    value: str

    @property
    def is_entity(self) -> bool:
        return self.kind == ENTITY

    @property
    def is_empty(self) -> bool:
        return self.kind == TEXT and not self.value.strip()

    def to_record(self) -> dict:
        return {"e": self.value} if self.is_entity else {"t": self.value}


EMPTY_CELL = Cell(TEXT, "")


@dataclass
class RawTable:
    id: str
    caption: str
    page_title: str
    headings: list[str]
    rows: list[list[Cell]]

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.headings)

    def column(self, j: int) -> list[Cell]:
        return [row[j] for row in self.rows]

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "caption": self.caption,
            "pageTitle": self.page_title,
            "headings": list(self.headings),
            "rows": [[c.to_record() for c in row] for row in self.rows],
        }


@dataclass
class RelationalTable(RawTable):
    core_column: int = 0
    core_entities: list[str] = field(default_factory=list)

    def rows_of(self, entity_id: str) -> list[int]:
        """Row indexes whose core cell links to ``entity_id``."""
        j = self.core_column
        return [i for i, row in enumerate(self.rows) if row[j].is_entity and row[j].value == entity_id]


@dataclass
class Entity:
    id: str
    description: str
    properties: dict[str, list[str]]
    catchall: str = ""

    def __post_init__(self):
        if not self.catchall:
            self.catchall = assemble_catchall(self.description, self.properties)


def properties_text(properties: dict[str, list[str]]) -> str:
    parts = []
    for label, values in properties.items():
        parts.append(label)
        parts.extend(values)
    return " ".join(p for p in parts if p)


def assemble_catchall(description: str, properties: dict[str, list[str]]) -> str:
    return " ".join(p for p in (description, properties_text(properties)) if p)


def _lines(source: Source) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        try:
            with open(source, encoding="utf-8") as fh:
                yield from fh
        except OSError as exc:
            raise CorpusError(f"cannot read {source}: {exc}") from exc
        return
    if isinstance(source, io.IOBase) or hasattr(source, "read"):
        try:
            yield from source
        except (OSError, ValueError) as exc:
            raise CorpusError(f"cannot read stream: {exc}") from exc
        return
    yield from source


def _parse_cell(raw) -> Cell:
    if raw is None:
        return EMPTY_CELL
    if isinstance(raw, str):
        return Cell(TEXT, raw)
    if not isinstance(raw, dict):
        raise ValueError(f"bad cell {raw!r}")
    if "e" in raw and raw["e"]:
        link = raw["e"]
        # multi-link cells keep only the first link
        if isinstance(link, list):
            link = link[0]
        if not isinstance(link, str):
            raise ValueError(f"bad entity link {link!r}")
        return Cell(ENTITY, link)
    text = raw.get("t", "")
    if text is None:
        text = ""
    if not isinstance(text, str):
        text = str(text)
    return Cell(TEXT, text)


def table_from_record(rec: dict) -> RawTable:
    if not isinstance(rec, dict):
        raise ValueError("record is not an object")
    headings = rec["headings"]
    if not isinstance(headings, list) or not headings:
        raise ValueError("headings must be a non-empty list")
    headings = ["" if h is None else str(h) for h in headings]
    m = len(headings)
    rows = []
    for raw_row in rec.get("rows", []):
        if not isinstance(raw_row, list):
            raise ValueError("row is not a list")
        row = [_parse_cell(c) for c in raw_row[:m]]
        row.extend([EMPTY_CELL] * (m - len(row)))
        rows.append(row)
    return RawTable(
        id=str(rec["id"]),
        caption=rec.get("caption") or "",
        page_title=rec.get("pageTitle") or "",
        headings=headings,
        rows=rows,
    )


def parse_table_corpus(source: Source) -> tuple[list[RawTable], list[str]]:
    """Parse line-delimited table records.

    Returns the parsed tables and a list of per-line error messages; a bad
    line never stops the parse.
    """
    tables, errors = [], []
    for lineno, line in enumerate(_lines(source), 1):
        if not line.strip():
            continue
        try:
            tables.append(table_from_record(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            errors.append(f"line {lineno}: {exc}")
    if errors:
        logger.warning("skipped %d malformed table records", len(errors))
    return tables, errors


def write_table_corpus(tables: Iterable[RawTable], fh: IO[str]) -> None:
    for t in tables:
        fh.write(json.dumps(t.to_record(), ensure_ascii=False, sort_keys=True))
        fh.write("\n")


def detect_core_column(table: RawTable) -> Optional[int]:
    """Index of the column with the most entity links (leftmost on ties), or None below two."""
    best, best_count = None, -1
    for j in range(table.n_cols):
        count = sum(1 for row in table.rows if row[j].is_entity)
        if count > best_count:
            best, best_count = j, count
    if best is None or best_count < 2:
        return None
    return best


def classify_relational(table: RawTable) -> bool:
    if table.n_rows < 2 or table.n_cols < 2:
        return False
    return detect_core_column(table) is not None


def to_relational(table: RawTable) -> Optional[RelationalTable]:
    if not classify_relational(table):
        return None
    j = detect_core_column(table)
    seen, core = set(), []
    for row in table.rows:
        c = row[j]
        if c.is_entity and c.value not in seen:
            seen.add(c.value)
            core.append(c.value)
    return RelationalTable(
        id=table.id,
        caption=table.caption,
        page_title=table.page_title,
        headings=list(table.headings),
        rows=[list(r) for r in table.rows],
        core_column=j,
        core_entities=core,
    )


def resolve_links(table: RawTable, kb: dict[str, Entity]) -> RawTable:
    """Demote entity links that do not resolve in ``kb`` to text literals."""
    rows = []
    for row in table.rows:
        rows.append([c if not c.is_entity or c.value in kb else Cell(TEXT, c.value) for c in row])
    return RawTable(table.id, table.caption, table.page_title, list(table.headings), rows)


def parse_kb_dump(source: Source) -> tuple[dict[str, Entity], list[str]]:
    """Parse line-delimited KB records into an id-keyed entity store.

    Duplicate ids keep the later record; malformed lines and duplicates are
    reported in the returned message list.
    """
    store: dict[str, Entity] = {}
    messages = []
    for lineno, line in enumerate(_lines(source), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            eid = str(rec["id"])
            props = rec.get("properties") or {}
            if not isinstance(props, dict):
                raise ValueError("properties must be an object")
            clean = {}
            for label, values in props.items():
                if isinstance(values, str):
                    values = [values]
                clean[str(label)] = [str(v) for v in values]
            entity = Entity(eid, rec.get("description") or "", clean)
        except (ValueError, KeyError, TypeError) as exc:
            messages.append(f"line {lineno}: {exc}")
            continue
        if eid in store:
            messages.append(f"line {lineno}: duplicate id {eid}, later record wins")
        store[eid] = entity
    if messages:
        logger.warning("%d KB ingestion messages", len(messages))
    return store, messages


def entity_representation(entity: Entity, repr: str, analyzer: Analyzer = DEFAULT_ANALYZER) -> list[str]:
    if repr == "all":
        return analyzer.tokenize(entity.catchall)
    if repr == "description":
        return analyzer.tokenize(entity.description)
    if repr == "properties":
        return analyzer.tokenize(properties_text(entity.properties))
    raise ValueError(f"unknown entity representation {repr!r}; expected one of {REPRESENTATIONS}")


class Corpus:
    """Relational tables linked against a KB, with core-column lookups.

    Built once by :meth:`ingest`; read-only afterward.
    """

    def __init__(self, tables: list[RelationalTable], kb: dict[str, Entity],
                 n_nonrelational: int = 0, analyzer: Analyzer = DEFAULT_ANALYZER):
        self.tables = tables
        self.kb = kb
        self.n_nonrelational = n_nonrelational
        self.analyzer = analyzer
        self.by_id = {t.id: t for t in tables}
        self.tables_of_entity: dict[str, list[str]] = {}
        for t in tables:
            for e in t.core_entities:
                self.tables_of_entity.setdefault(e, []).append(t.id)

    @classmethod
    def ingest(cls, raw_tables: Iterable[RawTable], kb: dict[str, Entity],
               analyzer: Analyzer = DEFAULT_ANALYZER) -> "Corpus":
        relational, skipped = [], 0
        for raw in raw_tables:
            rel = to_relational(resolve_links(raw, kb))
            if rel is None:
                skipped += 1
            else:
                relational.append(rel)
        logger.info("ingested %d relational, %d non-relational tables", len(relational), skipped)
        return cls(relational, kb, skipped, analyzer)

    @classmethod
    def from_files(cls, tables_path, kb_path, analyzer: Analyzer = DEFAULT_ANALYZER) -> "Corpus":
        kb, _ = parse_kb_dump(kb_path)
        raw, _ = parse_table_corpus(tables_path)
        return cls.ingest(raw, kb, analyzer)

    def __len__(self) -> int:
        return len(self.tables)

    def representation(self, entity_id: str, repr: str) -> list[str]:
        entity = self.kb.get(entity_id)
        if entity is None:
            return []
        return entity_representation(entity, repr, self.analyzer)

    def table_labels(self, table: RawTable) -> list[str]:
        """Normalized heading labels of a table, empties dropped, order kept."""
        out = []
        for h in table.headings:
            n = self.analyzer.normalize_label(h)
            if n and n not in out:
                out.append(n)
        return out
