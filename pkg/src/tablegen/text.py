"""Shared text analyzer.

Every component (entity index, table index, label normalization, deep
matcher inputs) tokenizes through the same :class:`Analyzer` so that a term
means the same thing everywhere.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path
from typing import Iterable

_SPLIT = re.compile(r"[^0-9a-z]+")


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a stopword file (one word per line, ``#`` comments allowed).

    With no path, the bundled English list is used.
    """
    if path is None:
        text = resources.files("tablegen").joinpath("data/stopwords.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    words = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            words.add(line)
    return frozenset(words)


class Analyzer:
    """Lowercase, split on non-alphanumeric runs, drop empties and stopwords."""

    def __init__(self, stopwords: Iterable[str] | None = None):
        self.stopwords = frozenset(stopwords) if stopwords is not None else load_stopwords()

    def tokenize(self, text: str) -> list[str]:
        if not text:
            return []
        return [t for t in _SPLIT.split(text.lower()) if t and t not in self.stopwords]

    def __call__(self, text: str) -> list[str]:
        return self.tokenize(text)

    def normalize_label(self, label: str) -> str:
        """Canonical surface form of a heading label: analyzed tokens joined by one space."""
        return " ".join(self.tokenize(label))


DEFAULT_ANALYZER = Analyzer()
