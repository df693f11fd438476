from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np


@dataclass
class RankedList:
    """Items with scores, sorted by descending score then ascending item id."""

    items: list[str] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)

    @classmethod
    def from_scores(cls, scored: Iterable[tuple[str, float]], n: int | None = None) -> "RankedList":
        ordered = sorted(scored, key=lambda p: (-p[1], p[0]))
        if n is not None:
            ordered = ordered[:n]
        return cls([i for i, _ in ordered], [float(s) for _, s in ordered])

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[tuple[str, float]]:
        return iter(zip(self.items, self.scores))

    def top(self, k: int) -> list[str]:
        return self.items[:k]

    def score_of(self, item: str, default: float = 0.0) -> float:
        try:
            return self.scores[self.items.index(item)]
        except ValueError:
            return default

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.items, self.scores))


def minmax(values: Sequence[float], constant: float = 0.0) -> np.ndarray:
    """Min-max scale into [0, 1]; a constant vector maps to ``constant``."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return x
    lo, hi = x.min(), x.max()
    if hi - lo <= 0:
        return np.full_like(x, constant)
    return (x - lo) / (hi - lo)
