"""Inverted indexes with Dirichlet language-model and BM25 scoring.

Two indexes are built from a :class:`~tablegen.corpus.Corpus`: one over the
"all" (catchall) representation of every KB entity, used for candidate
entity retrieval, and one over table text (caption, page title, headings and
cell strings), used to rank tables for column population.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, RawTable
from .ranking import RankedList

FORMAT = "tablegen.inverted-index"
VERSION = 1

DEFAULT_MU = 2000.0
DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


class IndexFormatError(Exception):
    pass


class InvertedIndex:
    """Term postings plus the document and collection statistics LM/BM25 need."""

    def __init__(self):
        self.postings: dict[str, list[tuple[str, int]]] = {}
        self.doc_lengths: dict[str, int] = {}
        self.collection_tf: Counter = Counter()
        self.collection_length = 0
        self._doc_tf: dict[str, Counter] = {}
        self._order: list[str] = []
        self._arrays = None

    @classmethod
    def build(cls, docs: Mapping[str, Sequence[str]] | Iterable[tuple[str, Sequence[str]]]) -> "InvertedIndex":
        index = cls()
        items = docs.items() if isinstance(docs, Mapping) else docs
        for doc_id, tokens in items:
            index.add(doc_id, tokens)
        return index

    def add(self, doc_id: str, tokens: Sequence[str]) -> None:
        if doc_id in self.doc_lengths:
            raise ValueError(f"duplicate document {doc_id!r}")
        tf = Counter(tokens)
        self._doc_tf[doc_id] = tf
        self._order.append(doc_id)
        self.doc_lengths[doc_id] = len(tokens)
        self.collection_length += len(tokens)
        for term, n in tf.items():
            self.postings.setdefault(term, []).append((doc_id, n))
            self.collection_tf[term] += n
        self._arrays = None

    def __len__(self) -> int:
        return len(self._order)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.doc_lengths

    @property
    def doc_ids(self) -> list[str]:
        return list(self._order)

    def tf(self, term: str, doc_id: str) -> int:
        return self._doc_tf[doc_id].get(term, 0)

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def p_collection(self, term: str) -> float:
        if self.collection_length == 0:
            return 0.0
        return self.collection_tf.get(term, 0) / self.collection_length

    @property
    def avg_doc_length(self) -> float:
        return self.collection_length / len(self) if len(self) else 0.0

    def _dense(self):
        if self._arrays is None:
            pos = {d: i for i, d in enumerate(self._order)}
            lengths = np.array([self.doc_lengths[d] for d in self._order], dtype=float)
            self._arrays = (pos, lengths)
        return self._arrays

    # -- language model -------------------------------------------------

    def lm_score(self, query: Sequence[str], doc_id: str, mu: float = DEFAULT_MU) -> float:
        """Dirichlet-smoothed query log-likelihood of one document."""
        if mu <= 0:
            raise ValueError("mu must be positive")
        if doc_id not in self.doc_lengths:
            raise KeyError(f"unknown document {doc_id!r}")
        dlen = self.doc_lengths[doc_id]
        tf = self._doc_tf[doc_id]
        score = 0.0
        for t in query:
            p = self.p_collection(t)
            if p == 0.0:
                continue
            score += math.log((tf.get(t, 0) + mu * p) / (dlen + mu))
        return score

    def lm_scores(self, query: Sequence[str], mu: float = DEFAULT_MU) -> dict[str, float]:
        """:meth:`lm_score` for every document at once."""
        if mu <= 0:
            raise ValueError("mu must be positive")
        pos, lengths = self._dense()
        scores = np.zeros(len(self._order))
        for t in query:
            p = self.p_collection(t)
            if p == 0.0:
                continue
            background = mu * p
            contrib = np.full(len(self._order), math.log(background))
            for doc_id, n in self.postings[t]:
                contrib[pos[doc_id]] = math.log(n + background)
            scores += contrib - np.log(lengths + mu)
        return dict(zip(self._order, scores.tolist()))

    # -- BM25 -----------------------------------------------------------

    def idf(self, term: str) -> float:
        n, df = len(self), self.df(term)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def bm25_scores(self, query: Sequence[str], k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> dict[str, float]:
        """BM25 scores of every document sharing at least one query term."""
        avgdl = self.avg_doc_length or 1.0
        scores: dict[str, float] = {}
        for t in query:
            if t not in self.postings:
                continue
            idf = self.idf(t)
            for doc_id, f in self.postings[t]:
                norm = k1 * (1.0 - b + b * self.doc_lengths[doc_id] / avgdl)
                scores[doc_id] = scores.get(doc_id, 0.0) + idf * f * (k1 + 1.0) / (f + norm)
        return scores

    # -- persistence ----------------------------------------------------

    def save(self, fh: IO[str] | str | Path) -> None:
        if isinstance(fh, (str, Path)):
            with open(fh, "w", encoding="utf-8") as out:
                return self.save(out)
        header = {"format": FORMAT, "version": VERSION, "documents": len(self),
                  "collection_length": self.collection_length}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for doc_id in self._order:
            tf = self._doc_tf[doc_id]
            rec = {"id": doc_id, "length": self.doc_lengths[doc_id], "tf": dict(sorted(tf.items()))}
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, fh: IO[str] | str | Path) -> "InvertedIndex":
        if isinstance(fh, (str, Path)):
            with open(fh, encoding="utf-8") as src:
                return cls.load(src)
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise IndexFormatError(f"bad index header: {exc}") from exc
        if header.get("format") != FORMAT or header.get("version") != VERSION:
            raise IndexFormatError(f"unsupported index header {header}")
        index = cls()
        for line in fh:
            try:
                rec = json.loads(line)
                tokens = [t for t, n in rec["tf"].items() for _ in range(int(n))]
                index.add(rec["id"], tokens)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise IndexFormatError(f"bad index record: {exc}") from exc
        if len(index) != header.get("documents") or index.collection_length != header.get("collection_length"):
            raise IndexFormatError("index statistics do not match header")
        return index


def table_text(table: RawTable) -> str:
    parts = [table.caption, table.page_title, *table.headings]
    for row in table.rows:
        parts.extend(c.value for c in row)
    return " ".join(p for p in parts if p)


def build_entity_index(corpus: Corpus) -> InvertedIndex:
    return InvertedIndex.build((eid, corpus.representation(eid, "all")) for eid in sorted(corpus.kb))


def build_table_index(corpus: Corpus) -> InvertedIndex:
    return InvertedIndex.build((t.id, corpus.analyzer.tokenize(table_text(t))) for t in corpus.tables)


def retrieve_candidate_entities(index: InvertedIndex, query: Sequence[str], n: int = 100,
                                mu: float = DEFAULT_MU) -> RankedList:
    """Top-``n`` entities by Dirichlet LM score on the catchall representation."""
    if not any(index.p_collection(t) > 0 for t in query):
        return RankedList()
    return RankedList.from_scores(index.lm_scores(query, mu).items(), n)


def bm25_rank_tables(index: InvertedIndex, query: Sequence[str], k: int = 100,
                     k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> RankedList:
    """Top-``k`` tables by BM25; tables sharing no query term are not returned."""
    return RankedList.from_scores(index.bm25_scores(query, k1, b).items(), k)
