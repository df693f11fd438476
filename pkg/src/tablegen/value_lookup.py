"""Entity-oriented fact catalog and cell-value resolution.

Each candidate cell value is a quadruple (entity, label, value, provenance)
where provenance is either a KB fact or a specific table cell. Lookups pick
one value per (entity, label): any matching KB fact wins over table values;
among table values the one from the table most relevant to the query wins.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import IO, Mapping, Optional, Sequence

from .corpus import Corpus
from .schema_norm import LabelMatcher

KB = "kb"
TABLE = "table"

CATALOG_FORMAT = "tablegen.catalog"
CATALOG_VERSION = 1


@dataclass(frozen=True)
class Provenance:
    source: str
    table_id: Optional[str] = None
    row: Optional[int] = None
    col: Optional[int] = None
    label: Optional[str] = None
    index: Optional[int] = None

    def describe(self) -> str:
        if self.source == KB:
            return f"kb:{self.label}"
        return f"table:{self.table_id}"


@dataclass(frozen=True)
class FactQuadruple:
    entity: str
    label: str
    norm_label: str
    value: str
    is_entity: bool
    provenance: Provenance


class FactCatalog:
    def __init__(self, quads: Sequence[FactQuadruple] = ()):
        self.quads = list(quads)
        self.by_entity: dict[str, list[FactQuadruple]] = {}
        for q in self.quads:
            self.by_entity.setdefault(q.entity, []).append(q)

    def __len__(self) -> int:
        return len(self.quads)

    def entity_view(self, entity: str) -> list[FactQuadruple]:
        return self.by_entity.get(entity, [])

    def save(self, fh: IO[str] | str | Path) -> None:
        if isinstance(fh, (str, Path)):
            with open(fh, "w", encoding="utf-8") as out:
                return self.save(out)
        fh.write(json.dumps({"format": CATALOG_FORMAT, "version": CATALOG_VERSION,
                             "facts": len(self.quads)}, sort_keys=True) + "\n")
        for q in self.quads:
            rec = asdict(q)
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, fh: IO[str] | str | Path) -> "FactCatalog":
        if isinstance(fh, (str, Path)):
            with open(fh, encoding="utf-8") as src:
                return cls.load(src)
        header = json.loads(fh.readline())
        if header.get("format") != CATALOG_FORMAT or header.get("version") != CATALOG_VERSION:
            raise ValueError("unsupported catalog header")
        quads = []
        for line in fh:
            rec = json.loads(line)
            rec["provenance"] = Provenance(**rec["provenance"])
            quads.append(FactQuadruple(**rec))
        if len(quads) != header.get("facts"):
            raise ValueError("catalog fact count does not match header")
        return cls(quads)


def build_catalog(corpus: Corpus) -> FactCatalog:
    """KB facts for every (entity, property, value), then table facts for every
    non-empty attribute cell of a row whose core cell is an entity."""
    norm = corpus.analyzer.normalize_label
    quads = []
    for eid in sorted(corpus.kb):
        for label, values in corpus.kb[eid].properties.items():
            for i, v in enumerate(values):
                if not v:
                    continue
                prov = Provenance(KB, label=label, index=i)
                quads.append(FactQuadruple(eid, label, norm(label), v, v in corpus.kb, prov))
    for t in corpus.tables:
        j0 = t.core_column
        for i, row in enumerate(t.rows):
            core = row[j0]
            if not core.is_entity:
                continue
            for j, cell in enumerate(row):
                if j == j0 or cell.is_empty:
                    continue
                label = t.headings[j]
                prov = Provenance(TABLE, table_id=t.id, row=i, col=j, label=label)
                quads.append(FactQuadruple(core.value, label, norm(label), cell.value, cell.is_entity, prov))
    return FactCatalog(quads)


def refetch(corpus: Corpus, quad: FactQuadruple) -> Optional[str]:
    """Re-read a fact's value from its source; None if the source no longer has it."""
    p = quad.provenance
    if p.source == KB:
        entity = corpus.kb.get(quad.entity)
        if entity is None:
            return None
        values = entity.properties.get(p.label, [])
        return values[p.index] if p.index is not None and p.index < len(values) else None
    table = corpus.by_id.get(p.table_id)
    if table is None or p.row >= table.n_rows or p.col >= table.n_cols:
        return None
    row = table.rows[p.row]
    if not (row[table.core_column].is_entity and row[table.core_column].value == quad.entity):
        return None
    return row[p.col].value


def lookup_value(entity: str, label: str, catalog: FactCatalog, matcher: LabelMatcher,
                 table_relevance: Mapping[str, float]) -> Optional[FactQuadruple]:
    """The single fact chosen for cell (entity, label), or None for an empty cell.

    Confidence is two-tiered: KB facts first (catalog order), then table facts
    by descending ``table_relevance`` (ties by table id, row).
    """
    best_table, best_key = None, None
    for q in catalog.entity_view(entity):
        if not matcher.match(label, q.norm_label):
            continue
        if q.provenance.source == KB:
            return q
        p = q.provenance
        key = (-table_relevance.get(p.table_id, 0.0), p.table_id, p.row, p.col)
        if best_key is None or key < best_key:
            best_table, best_key = q, key
    return best_table


def fill_values(entities: Sequence[str], labels: Sequence[str], catalog: FactCatalog, matcher: LabelMatcher,
                table_relevance: Mapping[str, float]) -> list[list[Optional[FactQuadruple]]]:
    return [[lookup_value(e, s, catalog, matcher, table_relevance) for s in labels] for e in entities]
