"""DRRM_TKS-style deep matcher in plain numpy.

Architecture::

    a, b token sequences
      -> unit embedding vectors            A (n x d), B (m x d)
      -> matching matrix M = A @ B.T       entries in [-1, 1]
      -> top-k entries of M (global), padded with -1, sorted descending
      -> softmax over the k selected values
      -> tanh dense (h1) -> tanh dense (h2) -> linear output

Training uses pairwise hinge loss ``max(0, 1 - s(q, d+) + s(q, d-))`` with
Adam. Gradients are computed analytically; :func:`loss_and_grads` exposes
them so they can be checked against finite differences.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus

logger = logging.getLogger(__name__)

DEFAULT_DIM = 50
DEFAULT_K = 50
DEFAULT_HIDDEN = (50, 20)
DEFAULT_LR = 1e-4
DEFAULT_EPOCHS = 50
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
PAD = -1.0

MODEL_FORMAT = "tablegen.drrm-tks"
MODEL_VERSION = 1

DENSE_PARAMS = ("W1", "b1", "W2", "b2", "w3", "b3")


class TrainingError(Exception):
    pass


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


class EmbeddingTable:
    """Term vectors, all unit length.

    Terms without a stored vector get a random unit vector seeded from a hash
    of the term (and the table seed), so every process sees the same vector.
    """

    def __init__(self, dim: int = DEFAULT_DIM, vectors: dict[str, np.ndarray] | None = None,
                 seed: int = 0, trainable: bool = False):
        self.dim = dim
        self.seed = seed
        self.trainable = trainable
        self.vectors: dict[str, np.ndarray] = {}
        for term, v in (vectors or {}).items():
            v = np.asarray(v, dtype=float)
            if v.shape != (dim,):
                raise ValueError(f"vector for {term!r} has shape {v.shape}, expected ({dim},)")
            self.vectors[term] = _unit(v)
        self._stored = set(self.vectors)

    def oov_vector(self, term: str) -> np.ndarray:
        digest = hashlib.blake2b(f"{self.seed}\x00{term}".encode(), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        return _unit(rng.standard_normal(self.dim))

    def vector(self, term: str) -> np.ndarray:
        v = self.vectors.get(term)
        if v is None:
            v = self.oov_vector(term)
            self.vectors[term] = v
        return v

    def matrix(self, tokens: Sequence[str]) -> np.ndarray:
        return np.stack([self.vector(t) for t in tokens])

    def set_vector(self, term: str, v: np.ndarray) -> None:
        self.vectors[term] = _unit(np.asarray(v, dtype=float))
        self._stored.add(term)

    @classmethod
    def from_file(cls, path: str | Path, seed: int = 0, trainable: bool = False) -> "EmbeddingTable":
        """Read ``term v1 v2 ... vd`` lines."""
        vectors, dim = {}, None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts:
                    continue
                vec = np.array([float(x) for x in parts[1:]])
                if dim is None:
                    dim = len(vec)
                elif len(vec) != dim:
                    raise ValueError(f"{path}:{lineno}: expected {dim} components, got {len(vec)}")
                vectors[parts[0]] = vec
        if dim is None:
            raise ValueError(f"{path}: no vectors")
        return cls(dim, vectors, seed, trainable)

    def stored_terms(self) -> list[str]:
        """Terms whose vectors did not come from the hash-seeded fallback."""
        return sorted(self._stored)


def matching_matrix(a: Sequence[str], b: Sequence[str], emb: EmbeddingTable) -> np.ndarray:
    if not a or not b:
        raise ValueError("matching matrix needs two non-empty token sequences")
    return emb.matrix(a) @ emb.matrix(b).T


def _topk_positions(flat: np.ndarray, k: int) -> np.ndarray:
    # stable on ties: equal values keep flat order
    order = np.argsort(-flat, kind="stable")
    return order[:k]


def topk_signals(matrix: np.ndarray, k: int) -> np.ndarray:
    """Softmax over the ``k`` largest matrix entries (padded with -1), descending."""
    if k < 1:
        raise ValueError("k must be >= 1")
    flat = np.asarray(matrix, dtype=float).ravel()
    vals = flat[_topk_positions(flat, k)]
    if len(vals) < k:
        vals = np.concatenate([vals, np.full(k - len(vals), PAD)])
    return _softmax(vals)


def _softmax(v: np.ndarray) -> np.ndarray:
    z = np.exp(v - v.max())
    return z / z.sum()


@dataclass
class DrrmTksModel:
    embedding: EmbeddingTable
    k: int = DEFAULT_K
    hidden: tuple[int, int] = DEFAULT_HIDDEN
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        h1, h2 = self.hidden
        shapes = self.param_shapes()
        if not self.params:
            self.params = {name: np.zeros(shape) for name, shape in shapes.items()}
        for name, shape in shapes.items():
            if self.params[name].shape != shape:
                raise ValueError(f"parameter {name} has shape {self.params[name].shape}, expected {shape}")

    def param_shapes(self) -> dict[str, tuple]:
        h1, h2 = self.hidden
        return {"W1": (h1, self.k), "b1": (h1,), "W2": (h2, h1), "b2": (h2,), "w3": (h2,), "b3": ()}

    @classmethod
    def initialized(cls, embedding: EmbeddingTable | None = None, k: int = DEFAULT_K,
                    hidden: tuple[int, int] = DEFAULT_HIDDEN, seed: int = 0) -> "DrrmTksModel":
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(seed)
        model = cls(embedding or EmbeddingTable(seed=seed), k, tuple(hidden))
        for name, shape in model.param_shapes().items():
            if name.startswith("b"):
                continue
            fan_in = shape[1] if len(shape) == 2 else shape[0]
            fan_out = shape[0] if len(shape) == 2 else 1
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            model.params[name] = rng.uniform(-limit, limit, size=shape)
        return model

    # -- forward / backward ---------------------------------------------

    def _forward(self, a: Sequence[str], b: Sequence[str]):
        emb = self.embedding
        A, B = emb.matrix(a), emb.matrix(b)
        M = A @ B.T
        flat = M.ravel()
        pos = _topk_positions(flat, self.k)
        vals = flat[pos]
        if len(vals) < self.k:
            vals = np.concatenate([vals, np.full(self.k - len(vals), PAD)])
        x = _softmax(vals)
        p = self.params
        h1 = np.tanh(p["W1"] @ x + p["b1"])
        h2 = np.tanh(p["W2"] @ h1 + p["b2"])
        out = float(p["w3"] @ h2 + p["b3"].item())
        cache = (a, b, A, B, M.shape, pos, x, h1, h2)
        return out, cache

    def _backward(self, cache, dout: float) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
        a, b, A, B, shape, pos, x, h1, h2 = cache
        p = self.params
        g = {"w3": dout * h2, "b3": np.array(dout)}
        dz2 = dout * p["w3"] * (1.0 - h2 ** 2)
        g["W2"] = np.outer(dz2, h1)
        g["b2"] = dz2
        dz1 = (p["W2"].T @ dz2) * (1.0 - h1 ** 2)
        g["W1"] = np.outer(dz1, x)
        g["b1"] = dz1
        emb_grads: dict[str, np.ndarray] = {}
        if self.embedding.trainable:
            dx = p["W1"].T @ dz1
            dvals = x * (dx - dx @ x)
            dM = np.zeros(shape[0] * shape[1])
            dM[pos] = dvals[: len(pos)]
            dM = dM.reshape(shape)
            dA, dB = dM @ B, dM.T @ A
            for tokens, grads in ((a, dA), (b, dB)):
                for t, row in zip(tokens, grads):
                    if t in emb_grads:
                        emb_grads[t] = emb_grads[t] + row
                    else:
                        emb_grads[t] = row.copy()
        return g, emb_grads

    def score_with_flag(self, a: Sequence[str], b: Sequence[str]) -> tuple[float, bool]:
        """Score plus a flag that is True when an input was empty (score forced to 0)."""
        if not a or not b:
            return 0.0, True
        return self._forward(a, b)[0], False

    def score(self, a: Sequence[str], b: Sequence[str]) -> float:
        return self.score_with_flag(a, b)[0]

    # -- persistence ----------------------------------------------------

    def save(self, path: str | Path) -> None:
        emb = self.embedding
        terms = emb.stored_terms()
        meta = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "k": self.k, "hidden": list(self.hidden),
                "dim": emb.dim, "embedding_seed": emb.seed, "trainable": emb.trainable, "terms": terms}
        arrays = {name: self.params[name] for name in DENSE_PARAMS}
        arrays["vectors"] = np.stack([emb.vectors[t] for t in terms]) if terms else np.zeros((0, emb.dim))
        arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
        buf = io.BytesIO()
        # np.savez stamps entries with the wall clock; fixed timestamps keep saves byte-identical
        with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
            for name in sorted(arrays):
                entry = io.BytesIO()
                np.lib.format.write_array(entry, arrays[name], allow_pickle=False)
                zf.writestr(zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0)), entry.getvalue())
        Path(path).write_bytes(buf.getvalue())

    @classmethod
    def load(cls, path: str | Path) -> "DrrmTksModel":
        try:
            with np.load(path, allow_pickle=False) as data:
                meta = json.loads(str(data["meta"]))
                if meta.get("format") != MODEL_FORMAT or meta.get("version") != MODEL_VERSION:
                    raise ValueError(f"unsupported model file {path}")
                vectors = dict(zip(meta["terms"], data["vectors"]))
                params = {name: np.array(data[name], dtype=float) for name in DENSE_PARAMS}
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise ValueError(f"cannot load model {path}: {exc}") from exc
        emb = EmbeddingTable(meta["dim"], vectors, meta["embedding_seed"], meta["trainable"])
        return cls(emb, meta["k"], tuple(meta["hidden"]), params)


def score(model: DrrmTksModel, a: Sequence[str], b: Sequence[str]) -> float:
    return model.score(a, b)


# -- training -------------------------------------------------------------

Pair = tuple[Sequence[str], Sequence[str], int]
Triplet = tuple[Sequence[str], Sequence[str], Sequence[str]]


def hinge_loss(model: DrrmTksModel, triplet: Triplet) -> float:
    q, pos, neg = triplet
    return max(0.0, 1.0 - model.score(q, pos) + model.score(q, neg))


def loss_and_grads(model: DrrmTksModel, triplet: Triplet):
    """Hinge loss of one (query, positive, negative) triplet and its gradients.

    Returns ``(loss, dense_grads, embedding_grads)``; the gradient of
    ``max(0, .)`` at exactly zero is taken as zero.
    """
    q, pos, neg = triplet
    s_pos, c_pos = model._forward(q, pos)
    s_neg, c_neg = model._forward(q, neg)
    loss = 1.0 - s_pos + s_neg
    if loss <= 0.0:
        zeros = {n: np.zeros_like(v) for n, v in model.params.items()}
        return 0.0, zeros, {}
    g_pos, e_pos = model._backward(c_pos, -1.0)
    g_neg, e_neg = model._backward(c_neg, 1.0)
    grads = {n: g_pos[n] + g_neg[n] for n in g_pos}
    emb = dict(e_pos)
    for t, v in e_neg.items():
        emb[t] = emb[t] + v if t in emb else v
    return loss, grads, emb


def make_triplets(pairs: Sequence[Pair], rng: np.random.Generator) -> list[Triplet]:
    """Match each positive with a negative sampled for the same query."""
    groups: dict[tuple, tuple[list, list]] = {}
    for q, d, label in pairs:
        pos, neg = groups.setdefault(tuple(q), ([], []))
        (pos if label > 0 else neg).append(tuple(d))
    triplets = []
    for q in sorted(groups):
        pos, neg = groups[q]
        if not neg:
            continue
        for d in pos:
            triplets.append((list(q), list(d), list(neg[rng.integers(len(neg))])))
    return triplets


class Adam:
    def __init__(self, lr: float = DEFAULT_LR, beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
                 eps: float = ADAM_EPS):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict = {}
        self.v: dict = {}

    def step(self, params: dict, grads: dict) -> None:
        """In-place update of every entry of ``params`` that has a gradient."""
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            m = self.m.get(name, 0.0) * self.beta1 + (1.0 - self.beta1) * g
            v = self.v.get(name, 0.0) * self.beta2 + (1.0 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            params[name] = params[name] - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainResult:
    model: DrrmTksModel
    losses: list[float]


def train(model: DrrmTksModel, pairs: Sequence[Pair], lr: float = DEFAULT_LR, epochs: int = DEFAULT_EPOCHS,
          batch_size: int = 1, seed: int = 0) -> TrainResult:
    """Pairwise hinge training with Adam.

    Negatives are resampled every epoch; triplet order is shuffled with the
    same seeded generator, so a fixed seed gives an identical loss curve.
    The model is updated in place and also returned.
    """
    if not pairs:
        raise TrainingError("no training pairs")
    rng = np.random.default_rng(seed)
    if not make_triplets(pairs, np.random.default_rng(seed)):
        raise TrainingError("no query has both a positive and a negative example")
    opt, emb_opt = Adam(lr), Adam(lr)
    emb = model.embedding
    losses = []
    for epoch in range(epochs):
        triplets = make_triplets(pairs, rng)
        order = rng.permutation(len(triplets))
        total = 0.0
        for start in range(0, len(order), batch_size):
            batch = [triplets[i] for i in order[start:start + batch_size]]
            acc: dict[str, np.ndarray] = {}
            acc_emb: dict[str, np.ndarray] = {}
            for trip in batch:
                loss, grads, emb_grads = loss_and_grads(model, trip)
                total += loss
                for n, g in grads.items():
                    acc[n] = acc[n] + g if n in acc else g
                for t, g in emb_grads.items():
                    acc_emb[t] = acc_emb[t] + g if t in acc_emb else g
            scale = 1.0 / len(batch)
            opt.step(model.params, {n: g * scale for n, g in acc.items()})
            if acc_emb:
                vecs = {t: emb.vectors[t] for t in acc_emb}
                emb_opt.step(vecs, {t: g * scale for t, g in acc_emb.items()})
                for t, v in vecs.items():
                    emb.set_vector(t, v)
        losses.append(total / len(triplets))
        logger.debug("epoch %d mean hinge loss %.6f", epoch + 1, losses[-1])
    return TrainResult(model, losses)


# -- training pair generation ---------------------------------------------

def _balanced_pairs(positives: dict[tuple, set[tuple]], universe: list[tuple],
                    rng: np.random.Generator) -> list[Pair]:
    pairs: list[Pair] = []
    for q in sorted(positives):
        pos = sorted(positives[q])
        for d in pos:
            pairs.append((list(q), list(d), 1))
        pool = [d for d in universe if d not in positives[q]]
        if not pool:
            logger.warning("no negative labels available for %r", " ".join(q))
            continue
        n_neg = min(len(pos), len(pool))
        for i in sorted(rng.choice(len(pool), size=n_neg, replace=False)):
            pairs.append((list(q), list(pool[i]), -1))
    return pairs


def generate_schema_training_pairs(corpus: Corpus, seed: int = 0) -> list[Pair]:
    """(caption tokens, label tokens, +-1) pairs; one sampled negative label per positive."""
    rng = np.random.default_rng(seed)
    positives: dict[tuple, set[tuple]] = {}
    for t in corpus.tables:
        cap = tuple(corpus.analyzer.tokenize(t.caption))
        if not cap:
            continue
        labels = {tuple(corpus.analyzer.tokenize(h)) for h in t.headings}
        labels.discard(())
        positives.setdefault(cap, set()).update(labels)
    universe = sorted({lab for labs in positives.values() for lab in labs})
    return _balanced_pairs(positives, universe, rng)


def generate_entity_label_pairs(corpus: Corpus, repr: str = "description", seed: int = 0) -> list[Pair]:
    """(entity representation tokens, label tokens, +-1) pairs from core-column co-occurrence."""
    rng = np.random.default_rng(seed)
    positives: dict[tuple, set[tuple]] = {}
    universe: set[tuple] = set()
    for t in corpus.tables:
        labels = {tuple(corpus.analyzer.tokenize(h)) for h in t.headings}
        labels.discard(())
        universe |= labels
        for e in t.core_entities:
            toks = tuple(corpus.representation(e, repr))
            if toks:
                positives.setdefault(toks, set()).update(labels)
    return _balanced_pairs(positives, sorted(universe), rng)


def pair_counts(pairs: Iterable[Pair]) -> tuple[int, int]:
    pos = sum(1 for *_, y in pairs if y > 0)
    neg = sum(1 for *_, y in pairs if y <= 0)
    return pos, neg
