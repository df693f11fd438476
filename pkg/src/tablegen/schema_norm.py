"""Heading-label normalization.

Two labels are treated as the same label when they fall in the same
predicate-synonym group, or when their normalized Levenshtein similarity
reaches a threshold (0.8 by default).
"""

from __future__ import annotations

import itertools
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import IO, Iterable, Mapping

from .corpus import Entity
from .text import DEFAULT_ANALYZER, Analyzer

logger = logging.getLogger(__name__)

DEFAULT_DELTA = 0.8
DEFAULT_COOCCURRENCE = 3

SYNONYMS_FORMAT = "tablegen.synonyms"
SYNONYMS_VERSION = 1


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def _similarity(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


def edit_similarity(a: str, b: str, analyzer: Analyzer = DEFAULT_ANALYZER) -> float:
    """``1 - lev(a', b') / max(|a'|, |b'|)`` on normalized labels; 1 when both are empty."""
    return _similarity(analyzer.normalize_label(a), analyzer.normalize_label(b))


@dataclass
class SynonymSets:
    groups: list[frozenset[str]] = field(default_factory=list)
    canonical: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_groups(cls, groups: Iterable[Iterable[str]]) -> "SynonymSets":
        seen: set[str] = set()
        out, canonical = [], {}
        for g in groups:
            g = frozenset(g)
            if len(g) < 2:
                continue
            if g & seen:
                raise ValueError(f"synonym groups overlap on {sorted(g & seen)}")
            seen |= g
            rep = min(g)
            out.append(g)
            for label in g:
                canonical[label] = rep
        out.sort(key=min)
        return cls(out, canonical)

    def canon(self, label: str) -> str:
        return self.canonical.get(label, label)

    def to_json(self) -> str:
        payload = {"format": SYNONYMS_FORMAT, "version": SYNONYMS_VERSION,
                   "groups": [sorted(g) for g in self.groups]}
        return json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SynonymSets":
        payload = json.loads(text)
        if payload.get("format") != SYNONYMS_FORMAT or payload.get("version") != SYNONYMS_VERSION:
            raise ValueError("unsupported synonyms file header")
        return cls.from_groups(payload["groups"])


def read_overrides(source: str | Path | IO[str] | None) -> list[tuple[str, str, str]]:
    """Parse ``allow|deny<TAB>labelA<TAB>labelB`` lines."""
    if source is None:
        return []
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            return read_overrides(fh)
    out = []
    for lineno, line in enumerate(source, 1):
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3 or parts[0] not in ("allow", "deny"):
            raise ValueError(f"overrides line {lineno}: expected 'allow|deny<TAB>a<TAB>b'")
        out.append((parts[0], parts[1], parts[2]))
    return out


class _UnionFind:
    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def cooccurrence_counts(kb: Mapping[str, Entity], analyzer: Analyzer = DEFAULT_ANALYZER) -> Counter:
    """For each pair of normalized property labels, the number of distinct
    (entity, value) pairs they share."""
    counts: Counter = Counter()
    for eid, entity in kb.items():
        by_value: dict[str, set[str]] = {}
        for label, values in entity.properties.items():
            norm = analyzer.normalize_label(label)
            if not norm:
                continue
            for v in values:
                by_value.setdefault(v, set()).add(norm)
        for labels in by_value.values():
            for a, b in itertools.combinations(sorted(labels), 2):
                counts[(a, b)] += 1
    return counts


def build_synonym_sets(kb: Mapping[str, Entity], threshold: int = DEFAULT_COOCCURRENCE,
                       overrides: Iterable[tuple[str, str, str]] = (),
                       analyzer: Analyzer = DEFAULT_ANALYZER) -> SynonymSets:
    """Group property labels that connect the same subject and object at least
    ``threshold`` times, closed under transitivity.

    Overrides are applied last: ``allow`` pairs are joined, ``deny`` pairs are
    guaranteed to end up in different groups.
    """
    edges = {pair for pair, n in cooccurrence_counts(kb, analyzer).items() if n >= threshold}
    deny = set()
    for action, a, b in overrides:
        pair = tuple(sorted((analyzer.normalize_label(a), analyzer.normalize_label(b))))
        if action == "allow":
            edges.add(pair)
        else:
            deny.add(pair)
    edges -= deny

    uf = _UnionFind()
    members: dict[str, set[str]] = {}
    for a, b in sorted(edges):
        ra, rb = uf.find(a), uf.find(b)
        if ra == rb:
            continue
        ga, gb = members.get(ra, {a}), members.get(rb, {b})
        if any((min(x, y), max(x, y)) in deny for x in ga for y in gb):
            logger.info("deny override keeps %r and %r apart", a, b)
            continue
        uf.union(a, b)
        root = uf.find(a)
        members.pop(ra, None)
        members.pop(rb, None)
        members[root] = ga | gb
    return SynonymSets.from_groups(members.values())


class LabelMatcher:
    """Soft label equality: same synonym group, or edit similarity >= ``delta``.

    Labels passed in may be raw; they are normalized first. Results are
    cached, so one matcher instance should be shared per engine.
    """

    def __init__(self, synonyms: SynonymSets | None = None, delta: float = DEFAULT_DELTA,
                 analyzer: Analyzer = DEFAULT_ANALYZER):
        if not 0.0 <= delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        self.synonyms = synonyms or SynonymSets()
        self.delta = delta
        self.analyzer = analyzer
        self._norm = lru_cache(maxsize=None)(analyzer.normalize_label)
        self._sim = lru_cache(maxsize=1 << 18)(_similarity)

    def normalize(self, label: str) -> str:
        return self._norm(label)

    def canonical(self, label: str) -> str:
        return self.synonyms.canon(self._norm(label))

    def similarity(self, a: str, b: str) -> float:
        a, b = self._norm(a), self._norm(b)
        return self._sim(a, b) if a <= b else self._sim(b, a)

    def match(self, a: str, b: str) -> bool:
        if self.canonical(a) == self.canonical(b):
            return True
        return self.similarity(a, b) >= self.delta

    def best_match(self, label: str, candidates: Iterable[str]) -> int | None:
        """Index of the matching candidate with the highest similarity, or None."""
        best, best_sim = None, -1.0
        for i, c in enumerate(candidates):
            if not self.match(label, c):
                continue
            sim = 1.0 if self.canonical(label) == self.canonical(c) else self.similarity(label, c)
            if sim > best_sim:
                best, best_sim = i, sim
        return best


def labels_match(s: str, s2: str, delta: float = DEFAULT_DELTA, synonyms: SynonymSets | None = None,
                 analyzer: Analyzer = DEFAULT_ANALYZER) -> bool:
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    a, b = analyzer.normalize_label(s), analyzer.normalize_label(s2)
    syn = synonyms or SynonymSets()
    if syn.canon(a) == syn.canon(b):
        return True
    return _similarity(a, b) >= delta
