"""Schema determination: ranking heading labels for the generated table.

Features (each min-max normalized over the candidate labels of a query):

    phi1  P(s|q)     column population through BM25-retrieved tables
    phi2  P(s|q,E)   column population weighted by core-entity coverage
    phi3  DRRM_TKS(s, q)
    phi4  AR(s, E)   attribute retrieval
    phi5  ESC(s, E)  fraction of entities holding the label

phi2, phi4 and phi5 need the top-k entities of the previous round.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import LABEL_FEATURES
from .engine import Engine, TableEvidence
from .entity_ranking import combine, compatibility_matrix, match_kb, normalize_columns
from .ranking import RankedList

logger = logging.getLogger(__name__)


def p_s_given_t(engine: Engine, label: str, table_labels: Sequence[str], gamma: float | None = None) -> int:
    """1 when some heading of the table has edit similarity >= gamma with ``label``."""
    gamma = engine.config.gamma if gamma is None else gamma
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    sim = engine.matcher.similarity
    return int(any(sim(label, s) >= gamma for s in table_labels))


def candidate_labels(engine: Engine, evidence: TableEvidence) -> list[str]:
    """Normalized headings of the retrieved tables, in first-seen order."""
    seen: dict[str, None] = {}
    for tid in evidence.ranking.items:
        for s in engine.table_labels(tid):
            seen.setdefault(s, None)
    return list(seen)


def expanded_candidates(engine: Engine, entities: Sequence[str]) -> list[str]:
    """Headings of tables listing any of ``entities`` in their core column, plus
    the entities' KB property labels."""
    out: dict[str, None] = {}
    for e in entities:
        for tid in engine.corpus.tables_of_entity.get(e, ()):
            for s in engine.table_labels(tid):
                out.setdefault(s, None)
        ent = engine.corpus.kb.get(e)
        if ent is not None:
            for p in ent.properties:
                n = engine.matcher.normalize(p)
                if n:
                    out.setdefault(n, None)
    return list(out)


def column_population(engine: Engine, evidence: TableEvidence, labels: Sequence[str] | None = None,
                      gamma: float | None = None) -> dict[str, float]:
    """P(s|q) = sum over retrieved tables of P(s|T) P(T|q).

    Scores ``labels`` (default: the retrieved tables' own headings); labels
    supported by no table are left out.
    """
    if labels is None:
        labels = candidate_labels(engine, evidence)
    out: dict[str, float] = {}
    for s in labels:
        total, supported = 0.0, False
        for tid in evidence.ranking.items:
            if p_s_given_t(engine, s, engine.table_labels(tid), gamma):
                total += evidence.p_table[tid]
                supported = True
        if supported:
            out[s] = total
    return out


def table_coverage(engine: Engine, table_id: str, entities: Sequence[str]) -> float:
    """P(T|E): fraction of ``entities`` in the table's core column."""
    core = set(engine.corpus.by_id[table_id].core_entities)
    return len(core & set(entities)) / len(entities)


def entity_enhanced_cp(engine: Engine, evidence: TableEvidence, entities: Sequence[str],
                       labels: Sequence[str] | None = None, gamma: float | None = None) -> dict[str, float]:
    """P(s|q,E) = sum over tables of P(s|T) P(T|E) P(T|q), with a uniform P(T) dropped."""
    if not entities:
        raise ValueError("P(s|q,E) needs at least one entity")
    if labels is None:
        labels = candidate_labels(engine, evidence)
    weight = {}
    for tid in evidence.ranking.items:
        w = table_coverage(engine, tid, entities) * evidence.p_table[tid]
        if w > 0.0:
            weight[tid] = w
    out = {}
    for s in labels:
        out[s] = sum(w for tid, w in weight.items() if p_s_given_t(engine, s, engine.table_labels(tid), gamma))
    return out


# -- attribute retrieval ----------------------------------------------------

def cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    dot = sum(v * b.get(t, 0) for t, v in a.items())
    if dot == 0:
        return 0.0
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    return dot / (na * nb)


def _entity_vector(engine: Engine, entity: str) -> Counter:
    return Counter(engine.corpus.representation(entity, "description"))


def _cell_vectors(engine: Engine, table_id: str) -> list[list[Counter]]:
    table = engine.corpus.by_id[table_id]
    return [[Counter(engine.tokens(c.value)) for c in row] for row in table.rows]


def shadow_cells(engine: Engine, table_id: str, label: str, entity: str) -> set[tuple[int, int]]:
    """Cells sharing a row with the entity or the column whose heading best matches ``label``."""
    table = engine.corpus.by_id[table_id]
    cells = {(i, j) for i in table.rows_of(entity) for j in range(table.n_cols)}
    col = engine.matcher.best_match(label, table.headings)
    if col is not None:
        cells |= {(i, col) for i in range(table.n_rows)}
    return cells


def match_component(engine: Engine, label: str, entity: str, table_id: str) -> float:
    """match(s, e, T) = max cosine over the table minus max cosine over the shadow area."""
    ev = _entity_vector(engine, entity)
    vecs = _cell_vectors(engine, table_id)
    table_best = max((cosine(ev, v) for row in vecs for v in row), default=0.0)
    shadow = shadow_cells(engine, table_id, label, entity)
    shadow_best = max((cosine(ev, vecs[i][j]) for i, j in shadow), default=0.0)
    return table_best - shadow_best


def drel(evidence: TableEvidence, table_id: str) -> float:
    """(#results - rank) / #results for ``table_id`` in the query's table ranking (1-based rank)."""
    items = evidence.ranking.items
    if table_id not in items:
        return 0.0
    return (len(items) - (items.index(table_id) + 1)) / len(items)


def search_hits(engine: Engine, label: str, entity: str) -> int:
    return int(engine.hits.hits(label, entity) >= engine.config.hits_threshold)


def ar_components(engine: Engine, label: str, entity: str, evidence: TableEvidence) -> tuple[float, float, float, float]:
    """(match, drel, sh, kb) for one entity against the most relevant table."""
    best = evidence.best
    if best is None:
        m = d = 0.0
    else:
        m = match_component(engine, label, entity, best)
        d = drel(evidence, best)
    return m, d, float(search_hits(engine, label, entity)), float(match_kb(engine, entity, label))


def attribute_retrieval(engine: Engine, label: str, entities: Sequence[str], evidence: TableEvidence) -> float:
    """AR(s, E): mean over entities of the weighted four components."""
    if not entities:
        raise ValueError("AR(s, E) needs at least one entity")
    w = np.asarray(engine.config.ar_weights, dtype=float)
    total = sum(float(w @ np.array(ar_components(engine, label, e, evidence))) for e in entities)
    return total / len(entities)


def esc_label(engine: Engine, label: str, entities: Sequence[str]) -> float:
    """Fraction of ``entities`` holding ``label``."""
    if not entities:
        raise ValueError("ESC(s, E) is undefined for an empty entity set")
    return float(compatibility_matrix(engine, entities, [label]).entries[:, 0].mean())


# -- ranking ------------------------------------------------------------------

@dataclass
class LabelRanking:
    ranking: RankedList
    candidates: list[str]
    features: np.ndarray
    normalized: np.ndarray


def label_candidates(engine: Engine, evidence: TableEvidence, entities: Sequence[str] = ()) -> list[str]:
    """Top column-population labels, expanded with entity-derived labels when entities are given."""
    cp = column_population(engine, evidence)
    base = RankedList.from_scores(cp.items(), engine.config.candidate_labels).items
    if not entities:
        return base
    out = dict.fromkeys(base)
    for s in expanded_candidates(engine, entities):
        out.setdefault(s, None)
    return list(out)


def label_features(engine: Engine, query: Sequence[str], labels: Sequence[str], entities: Sequence[str],
                   evidence: TableEvidence, weights: Sequence[float] | None = None) -> np.ndarray:
    feats = np.zeros((len(labels), len(LABEL_FEATURES)))
    if not labels:
        return feats
    cp = column_population(engine, evidence, labels)
    feats[:, 0] = [cp.get(s, 0.0) for s in labels]
    model = engine.models.find("label")
    if model is not None:
        feats[:, 2] = [model.score(query, engine.tokens(s)) for s in labels]
    elif weights is None or weights[2] != 0.0:
        engine.models.get("label", "phi3")
    if entities:
        ecp = entity_enhanced_cp(engine, evidence, entities, labels)
        feats[:, 1] = [ecp[s] for s in labels]
        feats[:, 3] = [attribute_retrieval(engine, s, entities, evidence) for s in labels]
        C = compatibility_matrix(engine, entities, labels).entries
        feats[:, 4] = C.mean(axis=0)
    return feats


def rank_labels(engine: Engine, query: Sequence[str], entities: Sequence[str] = (),
                weights: Sequence[float] | None = None, evidence: TableEvidence | None = None,
                candidates: Sequence[str] | None = None) -> LabelRanking:
    weights = tuple(engine.config.label_weights if weights is None else weights)
    if len(weights) != len(LABEL_FEATURES):
        raise ValueError(f"expected {len(LABEL_FEATURES)} label weights, got {len(weights)}")
    if evidence is None:
        evidence = engine.table_evidence(list(query))
    entities = list(entities)
    labels = list(candidates) if candidates is not None else label_candidates(engine, evidence, entities)
    feats = label_features(engine, query, labels, entities, evidence, weights)
    norm = normalize_columns(feats)
    return LabelRanking(combine(norm, weights, labels), labels, feats, norm)
