"""Iterative table generation.

Round 0 ranks entities and labels from the query alone. Every later round
ranks entities with the previous round's top-k labels and labels with the
previous round's top-k entities (both read round t-1, never each other's
round-t output). After a fixed number of rounds the cells are filled from
the fact catalog.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

from .engine import Engine, TableEvidence
from .entity_ranking import rank_entities
from .ranking import RankedList
from .schema_determination import rank_labels
from .value_lookup import KB, FactQuadruple, fill_values

GroundTruth = Union[Sequence[str], Mapping[str, int]]


class GenerationError(RuntimeError):
    pass


@dataclass
class RoundSnapshot:
    entities: RankedList
    labels: RankedList


@dataclass
class GeneratedTable:
    query: str
    entities: RankedList
    labels: RankedList
    values: list[list[Optional[FactQuadruple]]]
    rounds_executed: int
    snapshots: list[RoundSnapshot] = field(default_factory=list)

    @property
    def row_ids(self) -> list[str]:
        return self.entities.items[: len(self.values)]

    @property
    def column_labels(self) -> list[str]:
        return self.labels.items[: len(self.values[0])] if self.values else []

    def to_dict(self) -> dict:
        rows, cols = self.row_ids, self.column_labels
        cells = []
        for i, row in enumerate(self.values):
            for j, q in enumerate(row):
                if q is None:
                    continue
                p = q.provenance
                prov = {"source": p.source, "label": p.label}
                if p.source != KB:
                    prov.update(table=p.table_id, row=p.row, col=p.col)
                cells.append({"row": i, "col": j, "value": q.value, "provenance": prov})
        return {
            "query": self.query,
            "rounds": self.rounds_executed,
            "entities": [{"id": e, "score": self.entities.score_of(e)} for e in rows],
            "schema": [{"label": s, "score": self.labels.score_of(s)} for s in cols],
            "cells": cells,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    def to_tsv(self) -> str:
        """Tab-separated grid padded for terminal reading; every row keeps one field per column."""
        clean = lambda v: v.replace("\t", " ").replace("\n", " ")
        grid = [["entity", *self.column_labels]]
        for e, row in zip(self.row_ids, self.values):
            grid.append([e, *("" if q is None else clean(q.value) for q in row)])
        widths = [max(len(r[j]) for r in grid) for j in range(len(grid[0]))]
        widths[-1] = 0  # no padding after the last column
        lines = ["\t".join(c.ljust(w) for c, w in zip(r, widths)) for r in grid]
        return "\n".join([f"# {self.query}", *lines]) + "\n"


def _truth_list(truth: GroundTruth) -> list[str]:
    if isinstance(truth, Mapping):
        return [k for k, g in sorted(truth.items(), key=lambda p: (-p[1], p[0])) if g > 0]
    return list(truth)


class TableGenerator:
    def __init__(self, engine: Engine):
        self.engine = engine

    def _round(self, query: list[str], evidence: TableEvidence, prev: RoundSnapshot | None, k: int,
               entity_weights, label_weights) -> RoundSnapshot:
        schema = prev.labels.top(k) if prev else []
        entities = prev.entities.top(k) if prev else []
        e_rank = rank_entities(self.engine, query, schema, entity_weights).ranking
        s_rank = rank_labels(self.engine, query, entities, label_weights, evidence).ranking
        return RoundSnapshot(e_rank, s_rank)

    def _settings(self, rounds, k_feedback, n_out, m_out):
        cfg = self.engine.config
        rounds = cfg.rounds if rounds is None else rounds
        k = cfg.k_feedback if k_feedback is None else k_feedback
        if rounds < 0:
            raise ValueError("rounds must be >= 0")
        if k < 1:
            raise ValueError("k_feedback must be >= 1")
        return rounds, k, cfg.n_out if n_out is None else n_out, cfg.m_out if m_out is None else m_out

    def generate_table(self, query: str, rounds: int | None = None, k_feedback: int | None = None,
                       n_out: int | None = None, m_out: int | None = None,
                       entity_weights: Sequence[float] | None = None,
                       label_weights: Sequence[float] | None = None) -> GeneratedTable:
        rounds, k, n_out, m_out = self._settings(rounds, k_feedback, n_out, m_out)
        q = self.engine.tokens(query)
        evidence = self.engine.table_evidence(q)
        snapshots: list[RoundSnapshot] = []
        prev = None
        for t in range(rounds + 1):
            try:
                prev = self._round(q, evidence, prev, k, entity_weights, label_weights)
            except Exception as exc:
                raise GenerationError(f"round {t} failed for query {query!r}: {exc}") from exc
            snapshots.append(prev)
        return self._finish(query, evidence, prev, rounds, snapshots, n_out, m_out)

    def _finish(self, query, evidence, snap, rounds, snapshots, n_out, m_out) -> GeneratedTable:
        rows, cols = snap.entities.top(n_out), snap.labels.top(m_out)
        values = fill_values(rows, cols, self.engine.catalog, self.engine.matcher, evidence.bm25_all)
        return GeneratedTable(query, snap.entities, snap.labels, values, rounds, snapshots)

    def replay_round(self, table: GeneratedTable, t: int, k_feedback: int | None = None,
                     entity_weights: Sequence[float] | None = None,
                     label_weights: Sequence[float] | None = None) -> RoundSnapshot:
        """Recompute round ``t`` from the stored snapshot of round ``t - 1``."""
        if not 0 <= t < len(table.snapshots):
            raise IndexError(f"no round {t} in this table")
        k = self.engine.config.k_feedback if k_feedback is None else k_feedback
        q = self.engine.tokens(table.query)
        prev = table.snapshots[t - 1] if t > 0 else None
        return self._round(q, self.engine.table_evidence(q), prev, k, entity_weights, label_weights)

    def generate_table_oracle(self, query: str, schema_truth: GroundTruth | None = None,
                              entity_truth: GroundTruth | None = None, k_feedback: int | None = None,
                              n_out: int | None = None, m_out: int | None = None,
                              entity_weights: Sequence[float] | None = None,
                              label_weights: Sequence[float] | None = None) -> GeneratedTable:
        """One feedback pass that uses ground truth instead of the previous round.

        ``schema_truth`` drives entity ranking and ``entity_truth`` drives
        schema determination; at least one must be given, and a subtask
        without ground truth falls back to its query-only ranking. Mappings
        are read as graded qrels (grade > 0, best first); at most
        ``k_feedback`` items are used.
        """
        if schema_truth is None and entity_truth is None:
            raise ValueError("oracle run needs ground-truth schema labels or entities")
        _, k, n_out, m_out = self._settings(0, k_feedback, n_out, m_out)
        q = self.engine.tokens(query)
        evidence = self.engine.table_evidence(q)
        schema, entities = [], []
        if schema_truth is not None:
            schema = [self.engine.matcher.normalize(s) for s in _truth_list(schema_truth)][:k]
            if not schema:
                raise ValueError("ground-truth schema is empty")
        if entity_truth is not None:
            entities = _truth_list(entity_truth)[:k]
            if not entities:
                raise ValueError("ground-truth entity list is empty")
        e_rank = rank_entities(self.engine, q, schema, entity_weights).ranking
        s_rank = rank_labels(self.engine, q, entities, label_weights, evidence).ranking
        snap = RoundSnapshot(e_rank, s_rank)
        return self._finish(query, evidence, snap, 1, [snap], n_out, m_out)
