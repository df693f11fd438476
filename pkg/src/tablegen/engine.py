"""Shared, read-only resources used by the ranking components."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .config import Config
from .corpus import Corpus
from .ranking import RankedList, minmax
from .schema_norm import LabelMatcher, SynonymSets, build_synonym_sets
from .semantic_match import DrrmTksModel
from .text import DEFAULT_ANALYZER
from .text_index import InvertedIndex, build_entity_index, build_table_index
from .value_lookup import FactCatalog, build_catalog

logger = logging.getLogger(__name__)


class MissingModelError(LookupError):
    pass


class ModelSet:
    """Trained matchers by role, with an optional fallback for unset roles.

    Roles: ``description`` (entity description side), ``properties``
    (entity properties side), ``combined`` (query+schema against
    description+properties) and ``label`` (query against heading label).
    """

    ROLES = ("description", "properties", "combined", "label")

    def __init__(self, default: DrrmTksModel | None = None, **roles: DrrmTksModel | None):
        unknown = set(roles) - set(self.ROLES)
        if unknown:
            raise ValueError(f"unknown model roles {sorted(unknown)}")
        self.default = default
        self.roles = {r: m for r, m in roles.items() if m is not None}

    def find(self, role: str) -> DrrmTksModel | None:
        return self.roles.get(role, self.default)

    def get(self, role: str, feature: str) -> DrrmTksModel:
        model = self.find(role)
        if model is None:
            raise MissingModelError(f"feature {feature} needs a trained '{role}' matcher, none is loaded")
        return model


class NullHits:
    """Search-hits provider that never reports hits."""

    def hits(self, label: str, entity: str) -> int:
        return 0


class FileHits:
    """Hit counts from a ``label<TAB>entity<TAB>count`` file; unknown pairs get 0."""

    def __init__(self, counts: dict[tuple[str, str], int], analyzer=None):
        self._norm = (analyzer or DEFAULT_ANALYZER).normalize_label
        self.counts = {(self._norm(l), e): c for (l, e), c in counts.items()}

    @classmethod
    def from_file(cls, path: str | Path, analyzer=None) -> "FileHits":
        counts = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected label<TAB>entity<TAB>count")
                counts[(parts[0], parts[1])] = int(float(parts[2]))
        return cls(counts, analyzer)

    def hits(self, label: str, entity: str) -> int:
        return self.counts.get((self._norm(label), entity), 0)


@dataclass
class TableEvidence:
    """Query-dependent table statistics shared by both subtasks and value lookup."""

    ranking: RankedList
    p_table: dict[str, float]
    bm25_all: dict[str, float]

    @property
    def best(self) -> Optional[str]:
        return self.ranking.items[0] if self.ranking.items else None


@dataclass
class Engine:
    corpus: Corpus
    entity_index: InvertedIndex
    table_index: InvertedIndex
    synonyms: SynonymSets
    catalog: FactCatalog
    config: Config = field(default_factory=Config)
    models: ModelSet = field(default_factory=ModelSet)
    hits: object = field(default_factory=NullHits)

    def __post_init__(self):
        self.matcher = LabelMatcher(self.synonyms, self.config.delta, self.corpus.analyzer)
        self._entity_labels: dict[str, frozenset[str]] = {}
        for t in self.corpus.tables:
            labels = self.corpus.table_labels(t)
            for e in t.core_entities:
                self._entity_labels[e] = self._entity_labels.get(e, frozenset()) | frozenset(labels)
        self._table_labels = {t.id: self.corpus.table_labels(t) for t in self.corpus.tables}

    @classmethod
    def build(cls, corpus: Corpus, config: Config | None = None, models: ModelSet | None = None,
              overrides=(), hits=None) -> "Engine":
        config = config or Config()
        synonyms = build_synonym_sets(corpus.kb, config.synonym_threshold, overrides, corpus.analyzer)
        return cls(corpus, build_entity_index(corpus), build_table_index(corpus), synonyms,
                   build_catalog(corpus), config, models or ModelSet(), hits or NullHits())

    def tokens(self, text: str) -> list[str]:
        return self.corpus.analyzer.tokenize(text)

    def table_labels(self, table_id: str) -> list[str]:
        return self._table_labels[table_id]

    def core_table_labels(self, entity: str) -> frozenset[str]:
        """Normalized labels of every table listing ``entity`` in its core column."""
        return self._entity_labels.get(entity, frozenset())

    def table_evidence(self, query: list[str]) -> TableEvidence:
        cfg = self.config
        bm25 = self.table_index.bm25_scores(query, cfg.bm25_k1, cfg.bm25_b)
        ranking = RankedList.from_scores(bm25.items(), cfg.table_k)
        p = dict(zip(ranking.items, minmax(ranking.scores, constant=1.0).tolist()))
        return TableEvidence(ranking, p, bm25)
