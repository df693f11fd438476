"""Ranking metrics, TREC-format files and feature-weight learning.

File formats (whitespace separated)::

    qrels    qid 0 itemid rel
    run      qid Q0 itemid rank score tag
    queries  qid<TAB>query text
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Mapping, Sequence

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

Qrels = dict[str, dict[str, int]]
Run = dict[str, list[tuple[str, float]]]

HELPED_THRESHOLD = 0.05
_EPS = 1e-12


class FormatError(ValueError):
    pass


def _open_lines(source) -> list[str]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            return fh.readlines()
    return list(source)


def read_qrels(source) -> Qrels:
    qrels: Qrels = {}
    for lineno, line in enumerate(_open_lines(source), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4:
            raise FormatError(f"qrels line {lineno}: expected 'qid 0 itemid rel'")
        try:
            rel = int(parts[3])
        except ValueError:
            raise FormatError(f"qrels line {lineno}: relevance {parts[3]!r} is not an integer") from None
        if rel < 0:
            raise FormatError(f"qrels line {lineno}: negative relevance")
        qrels.setdefault(parts[0], {})[parts[2]] = rel
    return qrels


def read_run(source) -> Run:
    rows: dict[str, list[tuple[int, str, float]]] = {}
    for lineno, line in enumerate(_open_lines(source), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 6:
            raise FormatError(f"run line {lineno}: expected 'qid Q0 itemid rank score tag'")
        try:
            rank, score = int(parts[3]), float(parts[4])
        except ValueError:
            raise FormatError(f"run line {lineno}: bad rank or score") from None
        rows.setdefault(parts[0], []).append((rank, parts[2], score))
    run: Run = {}
    for qid, items in rows.items():
        items.sort(key=lambda r: (-r[2], r[0], r[1]))
        run[qid] = [(item, score) for _, item, score in items]
    return run


def write_run(run: Mapping[str, Sequence[tuple[str, float]]], fh: IO[str], tag: str = "tablegen") -> None:
    for qid in sorted(run):
        for rank, (item, score) in enumerate(run[qid], 1):
            fh.write(f"{qid} Q0 {item} {rank} {score:.10g} {tag}\n")


def read_queries(source) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(_open_lines(source), 1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        if "\t" not in line:
            raise FormatError(f"queries line {lineno}: expected 'qid<TAB>query'")
        qid, text = line.split("\t", 1)
        out[qid] = text
    return out


@dataclass
class MetricResult:
    per_query: dict[str, float]
    mean: float
    flagged: list[str] = field(default_factory=list)


def _gain(rel: int) -> float:
    return 2.0 ** rel - 1.0


def dcg(grades: Sequence[int], k: int) -> float:
    return sum(_gain(g) / math.log2(i + 2) for i, g in enumerate(grades[:k]))


def _eval_queries(run: Mapping, qrels: Qrels) -> list[str]:
    out = []
    for qid in sorted(run):
        if qid not in qrels:
            logger.warning("run query %r has no qrels; skipped", qid)
            continue
        out.append(qid)
    return out


def ndcg_at_k(run: Mapping[str, Sequence[tuple[str, float]]], qrels: Qrels, k: int) -> MetricResult:
    """NDCG@k with exponential gain and log2(rank + 1) discount.

    Queries without any relevant item score 0 and are listed in ``flagged``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    per, flagged = {}, []
    for qid in _eval_queries(run, qrels):
        judged = qrels[qid]
        ideal = dcg(sorted(judged.values(), reverse=True), k)
        if ideal <= 0:
            per[qid] = 0.0
            flagged.append(qid)
            continue
        per[qid] = dcg([judged.get(item, 0) for item, _ in run[qid]], k) / ideal
    mean = float(np.mean(list(per.values()))) if per else 0.0
    return MetricResult(per, mean, flagged)


def average_precision(items: Sequence[str], relevant: set[str]) -> float:
    if not relevant:
        return 0.0
    hits, total = 0, 0.0
    for i, item in enumerate(items, 1):
        if item in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def reciprocal_rank(items: Sequence[str], relevant: set[str]) -> float:
    for i, item in enumerate(items, 1):
        if item in relevant:
            return 1.0 / i
    return 0.0


def map_mrr(run: Mapping[str, Sequence[tuple[str, float]]], qrels: Qrels) -> tuple[MetricResult, MetricResult]:
    """Mean average precision and mean reciprocal rank, relevance = grade >= 1."""
    ap, rr, flagged = {}, {}, []
    for qid in _eval_queries(run, qrels):
        relevant = {i for i, g in qrels[qid].items() if g >= 1}
        if not relevant:
            flagged.append(qid)
        items = [i for i, _ in run[qid]]
        ap[qid] = average_precision(items, relevant)
        rr[qid] = reciprocal_rank(items, relevant)
    mean = lambda d: float(np.mean(list(d.values()))) if d else 0.0
    return MetricResult(ap, mean(ap), flagged), MetricResult(rr, mean(rr), list(flagged))


def helped_hurt_unchanged(run_a, run_b, qrels: Qrels, threshold: float = HELPED_THRESHOLD,
                          k: int = 10) -> tuple[int, int, int]:
    """Count queries whose NDCG@k moves by >= threshold up, <= -threshold down, or neither (b relative to a)."""
    if set(run_a) != set(run_b):
        raise ValueError("runs cover different query sets")
    a = ndcg_at_k(run_a, qrels, k).per_query
    b = ndcg_at_k(run_b, qrels, k).per_query
    up = down = same = 0
    for qid in a:
        delta = b[qid] - a[qid]
        if delta >= threshold - _EPS:
            up += 1
        elif delta <= -threshold + _EPS:
            down += 1
        else:
            same += 1
    return up, down, same


# -- weight learning ----------------------------------------------------------

@dataclass
class WeightFit:
    weights: np.ndarray
    intercept: float
    fold_weights: list[np.ndarray]
    fold_intercepts: list[float]
    predictions: np.ndarray
    fold_of: np.ndarray


def fit_ols(X: np.ndarray, y: np.ndarray, ridge: float = 1e-6) -> tuple[np.ndarray, float]:
    """Least squares with an unpenalized intercept and a tiny ridge on the coefficients."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    design = np.hstack([X, np.ones((n, 1))])
    penalty = np.hstack([np.sqrt(ridge) * np.eye(d), np.zeros((d, 1))])
    A = np.vstack([design, penalty])
    b = np.concatenate([y, np.zeros(d)])
    sol, *_ = scipy.linalg.lstsq(A, b)
    return sol[:d], float(sol[d])


def fold_assignment(n: int, folds: int, groups: Sequence | None = None, seed: int = 0) -> np.ndarray:
    """Fold index per sample; with ``groups`` (e.g. query ids) a group never spans folds."""
    rng = np.random.default_rng(seed)
    if groups is None:
        return rng.permutation(n) % folds
    keys = sorted(set(groups), key=str)
    order = rng.permutation(len(keys))
    fold_of_group = {keys[i]: r % folds for r, i in enumerate(order)}
    return np.array([fold_of_group[g] for g in groups])


def learn_weights(features, labels, folds: int = 5, groups: Sequence | None = None,
                  ridge: float = 1e-6, seed: int = 0) -> WeightFit:
    """k-fold cross-validated linear weights.

    Each fold fits on the other folds and predicts its own samples; the
    reported weights are the mean of the per-fold coefficients.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("features must be (n, d) with one label per row")
    const = [j for j in range(X.shape[1]) if np.ptp(X[:, j]) == 0]
    if const:
        warnings.warn(f"constant feature columns {const}; their weights stay near zero", stacklevel=2)
    fold_of = fold_assignment(len(X), folds, groups, seed)
    preds = np.zeros(len(X))
    ws, bs = [], []
    for f in range(folds):
        test = fold_of == f
        train = ~test
        if not train.any():
            continue
        w, b = fit_ols(X[train], y[train], ridge)
        ws.append(w)
        bs.append(b)
        preds[test] = X[test] @ w + b
    return WeightFit(np.mean(ws, axis=0), float(np.mean(bs)), ws, bs, preds, fold_of)


def ranking_to_run(rankings: Mapping[str, Sequence[tuple[str, float]]]) -> Run:
    return {qid: [(i, float(s)) for i, s in items] for qid, items in rankings.items()}
