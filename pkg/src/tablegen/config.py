"""Run configuration.

Config files are plain ``key = value`` lines (``#`` starts a comment). Every
key matches a :class:`Config` field; command-line flags override file values.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any

ENTITY_FEATURES = ("phi1", "phi2", "phi3", "phi4", "phi5", "phi6", "phi7")
LABEL_FEATURES = ("phi1", "phi2", "phi3", "phi4", "phi5")


@dataclass
class Config:
    # Dirichlet smoothing for LM entity scoring (following the DBpedia-Entity v2 setup)
    mu: float = 2000.0
    # label-equivalence threshold for schema normalization
    delta: float = 0.8
    # edit-similarity threshold for P(s|T)
    gamma: float = 0.8
    # top-k labels / entities fed back between rounds
    k_feedback: int = 10
    rounds: int = 3
    # LM candidate entities re-ranked per query
    candidate_n: int = 100
    # column-population candidate labels re-ranked per query
    candidate_labels: int = 100
    # BM25 tables used as the bridge between query and labels
    table_k: int = 100
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    n_out: int = 10
    m_out: int = 5
    # co-occurrence count that makes two KB predicates synonyms
    synonym_threshold: int = 3
    # attribute-retrieval component weights: match, drel, sh, kb
    ar_weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    # search-hit count at which sh(s, e) fires
    hits_threshold: float = 1e6
    # search-hits provider: "null" or "file"
    provider: str = "null"
    hits_file: str | None = None
    entity_weights: tuple[float, ...] = (1.0,) * 7
    label_weights: tuple[float, ...] = (1.0,) * 5
    # deep matcher training
    lr: float = 1e-4
    epochs: int = 50
    k_signals: int = 50
    hidden: tuple[int, int] = (50, 20)
    embedding_dim: int = 50
    seed: int = 0
    threads: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("delta", "gamma"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        for name in ("k_feedback", "candidate_n", "candidate_labels", "table_k", "k_signals"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if len(self.entity_weights) != len(ENTITY_FEATURES):
            raise ValueError(f"entity_weights needs {len(ENTITY_FEATURES)} values")
        if len(self.label_weights) != len(LABEL_FEATURES):
            raise ValueError(f"label_weights needs {len(LABEL_FEATURES)} values")
        if len(self.ar_weights) != 4:
            raise ValueError("ar_weights needs 4 values")
        if self.provider not in ("null", "file"):
            raise ValueError(f"unknown hits provider {self.provider!r}")

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes)


def _coerce(field_type: Any, default: Any, raw: str):
    raw = raw.strip()
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(default, tuple):
        return tuple(type(default[0])(x) for x in raw.replace(",", " ").split())
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if raw.lower() in ("", "none"):
        return None
    return raw


def parse_config_text(text: str, base: Config | None = None) -> Config:
    base = base or Config()
    fields = {f.name: f for f in dataclasses.fields(Config)}
    changes = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in fields:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        changes[key] = _coerce(fields[key].type, getattr(base, key), raw)
    return base.replace(**changes)


def load_config(path: str | Path | None, base: Config | None = None) -> Config:
    if path is None:
        return base or Config()
    return parse_config_text(Path(path).read_text("utf-8"), base)


def read_weights(path: str | Path, names: tuple[str, ...]) -> tuple[float, ...]:
    """Parse a weights file: ``phi1 <w> phi2 <w> ...`` (any whitespace, any order)."""
    tokens = Path(path).read_text("utf-8").split()
    if len(tokens) % 2:
        raise ValueError(f"{path}: expected name/value pairs")
    found = {tokens[i]: float(tokens[i + 1]) for i in range(0, len(tokens), 2)}
    unknown = set(found) - set(names)
    if unknown:
        raise ValueError(f"{path}: unknown features {sorted(unknown)}")
    missing = [n for n in names if n not in found]
    if missing:
        raise ValueError(f"{path}: missing weights for {missing}")
    return tuple(found[n] for n in names)


def format_weights(weights, names: tuple[str, ...]) -> str:
    return " ".join(f"{n} {w!r}" for n, w in zip(names, weights)) + "\n"
