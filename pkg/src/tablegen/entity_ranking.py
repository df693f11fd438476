"""Core column entity ranking.

Candidates are the top LM entities for the query; each is scored by a
weighted sum of seven per-query min-max normalized features:

    phi1  LM(q, e_all)
    phi2  DRRM_TKS(q, e_desc)
    phi3  DRRM_TKS(q, e_props)
    phi4  DRRM_TKS(s, e_desc)                      needs a schema
    phi5  DRRM_TKS(s, e_props)                     needs a schema
    phi6  DRRM_TKS(q + s, e_desc + e_props)        needs a schema
    phi7  ESC(S, e)                                needs a schema

where S is the top-k schema labels from the previous round and s is their
token concatenation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import ENTITY_FEATURES
from .engine import Engine
from .ranking import RankedList, minmax
from .text_index import retrieve_candidate_entities

logger = logging.getLogger(__name__)


def match_kb(engine: Engine, entity: str, label: str) -> int:
    ent = engine.corpus.kb.get(entity)
    if ent is None:
        logger.warning("match_kb: unknown entity %r", entity)
        return 0
    return int(any(engine.matcher.match(label, p) for p in ent.properties))


def match_tc(engine: Engine, entity: str, label: str) -> int:
    return int(any(engine.matcher.match(label, s) for s in engine.core_table_labels(entity)))


@dataclass
class CompatibilityMatrix:
    entries: np.ndarray
    entities: list[str]
    labels: list[str]

    def row(self, entity: str) -> np.ndarray:
        return self.entries[self.entities.index(entity)]

    def column(self, label: str) -> np.ndarray:
        return self.entries[:, self.labels.index(label)]


def compatibility_matrix(engine: Engine, entities: Sequence[str], labels: Sequence[str]) -> CompatibilityMatrix:
    C = np.zeros((len(entities), len(labels)), dtype=np.int8)
    for i, e in enumerate(entities):
        for j, s in enumerate(labels):
            C[i, j] = match_kb(engine, e, s) or match_tc(engine, e, s)
    return CompatibilityMatrix(C, list(entities), list(labels))


def esc_entity(engine: Engine, labels: Sequence[str], entity: str) -> float:
    """Fraction of ``labels`` the entity holds (KB property or core-column table heading)."""
    if not labels:
        raise ValueError("ESC(S, e) is undefined for an empty schema")
    return float(compatibility_matrix(engine, [entity], labels).entries[0].mean())


def schema_tokens(engine: Engine, labels: Sequence[str]) -> list[str]:
    out: list[str] = []
    for s in labels:
        out.extend(engine.tokens(s))
    return out


def _needs(weights, idx: int) -> bool:
    return weights is None or weights[idx] != 0.0


def entity_features(engine: Engine, entity: str, query: Sequence[str], schema: Sequence[str],
                    weights: Sequence[float] | None = None) -> np.ndarray:
    """Raw phi1..phi7 for one entity.

    With an empty ``schema`` only phi1-phi3 are computed (the rest are 0).
    A deep feature whose matcher is not loaded raises
    :class:`~tablegen.engine.MissingModelError` unless its weight is zero.
    """
    corpus, models = engine.corpus, engine.models
    phi = np.zeros(len(ENTITY_FEATURES))
    if entity in engine.entity_index:
        phi[0] = engine.entity_index.lm_score(query, entity, engine.config.mu)
    desc = corpus.representation(entity, "description")
    props = corpus.representation(entity, "properties")
    deep = [(1, "description", "phi2", query, desc), (2, "properties", "phi3", query, props)]
    if schema:
        s = schema_tokens(engine, schema)
        deep += [(3, "description", "phi4", s, desc), (4, "properties", "phi5", s, props),
                 (5, "combined", "phi6", list(query) + s, desc + props)]
    for idx, role, name, a, b in deep:
        model = models.find(role)
        if model is None:
            if _needs(weights, idx):
                models.get(role, name)
            continue
        phi[idx] = model.score(a, b)
    if schema:
        phi[6] = esc_entity(engine, schema, entity)
    return phi


@dataclass
class EntityRanking:
    ranking: RankedList
    candidates: list[str]
    features: np.ndarray
    normalized: np.ndarray


def combine(normalized: np.ndarray, weights: Sequence[float], ids: Sequence[str]) -> RankedList:
    w = np.asarray(weights, dtype=float)
    if normalized.size and normalized.shape[1] != len(w):
        raise ValueError(f"expected {normalized.shape[1]} weights, got {len(w)}")
    scores = normalized @ w if normalized.size else np.zeros(len(ids))
    return RankedList.from_scores(zip(ids, scores.tolist()))


def normalize_columns(features: np.ndarray) -> np.ndarray:
    out = np.zeros_like(features)
    for j in range(features.shape[1]):
        out[:, j] = minmax(features[:, j])
    return out


def rank_entities(engine: Engine, query: Sequence[str], schema: Sequence[str] = (),
                  weights: Sequence[float] | None = None, n_candidates: int | None = None) -> EntityRanking:
    """Re-rank the LM candidate set by the weighted feature sum."""
    weights = tuple(engine.config.entity_weights if weights is None else weights)
    if len(weights) != len(ENTITY_FEATURES):
        raise ValueError(f"expected {len(ENTITY_FEATURES)} entity weights, got {len(weights)}")
    n = n_candidates or engine.config.candidate_n
    candidates = retrieve_candidate_entities(engine.entity_index, query, n, engine.config.mu).items
    schema = list(schema)
    feats = np.array([entity_features(engine, e, query, schema, weights) for e in candidates])
    feats = feats.reshape(len(candidates), len(ENTITY_FEATURES))
    norm = normalize_columns(feats)
    return EntityRanking(combine(norm, weights, candidates), candidates, feats, norm)
