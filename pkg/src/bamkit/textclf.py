"""Pluggable classifier backend: hashed n-gram features + linear models.

Two feature sources share one linear-model trainer:

* ``featurize``  — character n-grams (sizes 1-3 by default) hashed into a
  fixed-dimension sparse vector, counts l2-normalized.
* ``EmbeddingVector`` — dense vectors imported from the embedding
  interchange file (see ``load_embeddings``).

Hash definition (stable across platforms and implementations): for an
n-gram with codepoints c1..cn,

    h = n
    for c in (c1..cn):  h = (h * 0x100000001B3 + c)  mod 2**64
    h ^= h >> 30;  h = h * 0xBF58476D1CE4E5B9  mod 2**64
    h ^= h >> 27;  h = h * 0x94D049BB133111EB  mod 2**64
    h ^= h >> 31
    index = h mod dim

The multiplier is the 64-bit FNV prime; the finalizer is the splitmix64
mixing function.  Seeding with the n-gram length keeps n-grams of
different sizes from colliding systematically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateId,
    EmptyClass,
    EmptyInput,
    MalformedDocument,
    NonFiniteLoss,
)

_POLY = 0x100000001B3
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_U64 = np.uint64


DEFAULT_DIM = 2**18
DEFAULT_NGRAMS = (1, 2, 3)


@dataclass(frozen=True)
class FeaturizerConfig:
    dim: int = DEFAULT_DIM
    ngram_sizes: tuple[int, ...] = DEFAULT_NGRAMS


@dataclass
class FeatureVector:
    """Sparse feature vector: strictly increasing indices in [0, dim)."""

    indices: np.ndarray  # int64, sorted unique
    values: np.ndarray  # float64
    dim: int


@dataclass
class EmbeddingVector:
    """Dense vector keyed by a stable id (expr_id or budget id)."""

    id: str
    values: np.ndarray  # float64

    @property
    def dim(self) -> int:
        return len(self.values)


def hash_ngram(ngram: str, dim: int) -> int:
    """Scalar reference implementation of the feature hash."""
    h = len(ngram)
    for ch in ngram:
        h = (h * _POLY + ord(ch)) & 0xFFFFFFFFFFFFFFFF
    h ^= h >> 30
    h = (h * _MIX1) & 0xFFFFFFFFFFFFFFFF
    h ^= h >> 27
    h = (h * _MIX2) & 0xFFFFFFFFFFFFFFFF
    h ^= h >> 31
    return h % dim


def _mix64(h: np.ndarray) -> np.ndarray:
    h = h ^ (h >> _U64(30))
    h = h * _U64(_MIX1)
    h = h ^ (h >> _U64(27))
    h = h * _U64(_MIX2)
    h = h ^ (h >> _U64(31))
    return h


def featurize(text: str, config: FeaturizerConfig = FeaturizerConfig()) -> FeatureVector:
    """Hash character n-grams of ``text`` into a sparse counted vector.

    Deterministic given (text, config); counts are l2-normalized.
    """
    cp = np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32).astype(_U64)
    pieces = []
    for n in config.ngram_sizes:
        if len(cp) < n:
            continue
        h = np.full(len(cp) - n + 1, n, dtype=_U64)
        for k in range(n):
            h = h * _U64(_POLY) + cp[k : len(cp) - n + 1 + k]
        pieces.append(_mix64(h) % _U64(config.dim))
    if not pieces:
        return FeatureVector(
            indices=np.empty(0, dtype=np.int64),
            values=np.empty(0, dtype=np.float64),
            dim=config.dim,
        )
    indices, counts = np.unique(np.concatenate(pieces), return_counts=True)
    values = counts.astype(np.float64)
    values /= math.sqrt(float(np.dot(values, values)))
    return FeatureVector(indices=indices.astype(np.int64), values=values, dim=config.dim)


@dataclass
class Hyperparams:
    learning_rate: float = 0.1
    epochs: int = 30
    l2: float = 1e-4
    seed: int = 42
    batch_size: int = 32


@dataclass
class LinearModel:
    """Multinomial logistic regression over a declared class order."""

    classes: list
    weights: np.ndarray  # (C, dim) float64
    bias: np.ndarray  # (C,) float64
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    final_loss: float | None = None

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_grad(
    W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Full-batch objective and analytic gradient (dense inputs).

    Objective: mean cross-entropy + (l2/2)*||W||^2; bias unregularized.
    """
    n = len(y)
    logits = X @ W.T + b
    logp = logits - logits.max(axis=1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), y].mean() + 0.5 * l2 * float(np.sum(W * W))
    P = np.exp(logp)
    P[np.arange(n), y] -= 1.0
    grad_W = P.T @ X / n + l2 * W
    grad_b = P.mean(axis=0)
    return float(loss), grad_W, grad_b


def _check_vectors(vectors: Sequence) -> tuple[bool, int]:
    first = vectors[0]
    if isinstance(first, FeatureVector):
        sparse, dim = True, first.dim
    elif isinstance(first, EmbeddingVector):
        sparse, dim = False, first.dim
    else:
        raise DimensionMismatch(f"unsupported sample vector type {type(first).__name__}")
    for v in vectors:
        if sparse and not isinstance(v, FeatureVector):
            raise DimensionMismatch("samples mix sparse and dense vectors")
        if not sparse and not isinstance(v, EmbeddingVector):
            raise DimensionMismatch("samples mix sparse and dense vectors")
        if v.dim != dim:
            raise DimensionMismatch(f"vector dim {v.dim} != {dim}")
    return sparse, dim


def _sparse_scores(W: np.ndarray, b: np.ndarray, vectors: Sequence[FeatureVector]) -> np.ndarray:
    """Logits for a list of sparse vectors without densifying anything."""
    n = len(vectors)
    C = W.shape[0]
    lens = np.array([len(v.indices) for v in vectors])
    if lens.sum() == 0:
        return np.tile(b, (n, 1))
    flat_idx = np.concatenate([v.indices for v in vectors])
    flat_val = np.concatenate([v.values for v in vectors])
    rows = np.repeat(np.arange(n), lens)
    logits = np.empty((n, C))
    for c in range(C):
        logits[:, c] = np.bincount(rows, weights=W[c, flat_idx] * flat_val, minlength=n)
    return logits + b


def train(
    samples: Sequence[tuple[FeatureVector | EmbeddingVector, object]],
    classes: Sequence,
    hyperparams: Hyperparams | None = None,
) -> LinearModel:
    """Fit by deterministic mini-batch gradient descent.

    Learning rate decays as lr0/sqrt(t) over epochs t = 1..epochs; the
    L2 penalty is applied exactly through a lazily tracked weight scale
    so each step touches only the batch's feature columns.  Identical
    (samples, hyperparams, seed) give bit-identical weights.
    """
    hp = hyperparams or Hyperparams()
    if not samples:
        raise EmptyInput("no training samples")
    if hp.epochs < 1 or hp.batch_size < 1:
        raise ValueError("epochs and batch_size must be positive")
    if not classes:
        raise EmptyClass("no classes declared")
    class_index = {c: i for i, c in enumerate(classes)}
    counts = {c: 0 for c in classes}
    for _, label in samples:
        if label not in class_index:
            raise ValueError(f"sample label {label!r} not in declared classes")
        counts[label] += 1
    for c, n in counts.items():
        if n == 0:
            raise EmptyClass(f"declared class {c!r} has no samples")

    vectors = [v for v, _ in samples]
    sparse, dim = _check_vectors(vectors)
    y = np.array([class_index[label] for _, label in samples])
    N, C = len(samples), len(classes)
    rng = np.random.default_rng(hp.seed)
    W = np.zeros((C, dim))
    b = np.zeros(C)
    X_dense = None if sparse else np.stack([v.values for v in vectors])
    scale = 1.0
    for epoch in range(hp.epochs):
        lr = hp.learning_rate / math.sqrt(epoch + 1)
        order = rng.permutation(N)
        for ofs in range(0, N, hp.batch_size):
            batch = order[ofs : ofs + hp.batch_size]
            B = len(batch)
            onehot = np.zeros((B, C))
            onehot[np.arange(B), y[batch]] = 1.0
            if sparse:
                idx_list = [vectors[i].indices for i in batch]
                val_list = [vectors[i].values for i in batch]
                lens = np.array([len(a) for a in idx_list])
                if lens.sum() == 0:
                    P = _softmax(np.tile(b, (B, 1)))
                    b -= lr * (P - onehot).mean(axis=0)
                    scale *= 1.0 - lr * hp.l2
                    continue
                flat_idx = np.concatenate(idx_list)
                flat_val = np.concatenate(val_list)
                cols, inv = np.unique(flat_idx, return_inverse=True)
                Xsub = np.zeros((B, len(cols)))
                Xsub[np.repeat(np.arange(B), lens), inv] = flat_val
                P = _softmax(Xsub @ (W[:, cols] * scale).T + b)
                G = (P - onehot).T @ Xsub / B
                scale *= 1.0 - lr * hp.l2
                W[:, cols] -= (lr / scale) * G
                if abs(scale) < 1e-9:  # refold to avoid overflow in 1/scale
                    W *= scale
                    scale = 1.0
            else:
                Xb = X_dense[batch]
                P = _softmax(Xb @ W.T + b)
                G = (P - onehot).T @ Xb / B
                W *= 1.0 - lr * hp.l2
                W -= lr * G
            b -= lr * (P - onehot).mean(axis=0)
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(W))):
            raise NonFiniteLoss("non-finite weights during training")
    W *= scale

    model = LinearModel(classes=list(classes), weights=W, bias=b, hyperparams=hp)
    if sparse:
        logits = _sparse_scores(W, b, vectors)
    else:
        logits = X_dense @ W.T + b
    logp = logits - logits.max(axis=1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(N), y].mean() + 0.5 * hp.l2 * float(np.sum(W * W))
    if not math.isfinite(loss):
        raise NonFiniteLoss(f"final loss is {loss}")
    model.final_loss = float(loss)
    return model


def _as_logit_input(model: LinearModel, x) -> np.ndarray:
    if isinstance(x, FeatureVector):
        if x.dim != model.dim:
            raise DimensionMismatch(f"input dim {x.dim} != model dim {model.dim}")
        return _sparse_scores(model.weights, model.bias, [x])[0]
    if isinstance(x, EmbeddingVector):
        x = x.values
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise DimensionMismatch(f"input dim {x.shape} != model dim {model.dim}")
    return model.weights @ x + model.bias


def predict_proba(model: LinearModel, x) -> np.ndarray:
    """Softmax class probabilities for one input vector."""
    return _softmax(_as_logit_input(model, x))


def predict_proba_many(model: LinearModel, xs: Sequence) -> np.ndarray:
    """Row-per-sample probabilities; order-stable."""
    if len(xs) == 0:
        return np.empty((0, len(model.classes)))
    sparse, dim = _check_vectors(list(xs))
    if dim != model.dim:
        raise DimensionMismatch(f"input dim {dim} != model dim {model.dim}")
    if sparse:
        logits = _sparse_scores(model.weights, model.bias, xs)
    else:
        logits = np.stack([v.values for v in xs]) @ model.weights.T + model.bias
    return _softmax(logits)


def predict(model: LinearModel, x):
    """Argmax class; ties break to the lowest class index."""
    return model.classes[int(np.argmax(predict_proba(model, x)))]


class HashedBackend:
    """Turns text into hashed n-gram vectors; needs no external data."""

    name = "hashed"

    def __init__(self, config: FeaturizerConfig | None = None) -> None:
        self.config = config or FeaturizerConfig()

    @property
    def dim(self) -> int:
        return self.config.dim

    def vectorize(self, key: str, text: str) -> FeatureVector:
        return featurize(text, self.config)


class EmbeddingTableBackend:
    """Looks inputs up by id in a preloaded embedding table."""

    name = "embeddings"

    def __init__(self, table: dict[str, EmbeddingVector]) -> None:
        if not table:
            raise EmptyInput("embedding table is empty")
        self.table = table
        self._dim = next(iter(table.values())).dim

    @property
    def dim(self) -> int:
        return self._dim

    def vectorize(self, key: str, text: str) -> EmbeddingVector:
        from .errors import MissingEmbedding

        if key not in self.table:
            raise MissingEmbedding(f"no embedding for id {key!r}")
        return self.table[key]


# ---------------------------------------------------------------------------
# Embedding interchange file: line 1 is a JSON header {"dim": D,
# "encoder": name}; each following line is {"id": str, "v": [D floats]}.
# ---------------------------------------------------------------------------


def load_embeddings(path: str | Path) -> dict[str, EmbeddingVector]:
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise MalformedDocument(f"{path}: missing header line")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"{path}: invalid header JSON") from exc
        dim = header.get("dim")
        if not isinstance(dim, int) or dim <= 0:
            raise MalformedDocument(f"{path}: header dim must be a positive integer")
        out: dict[str, EmbeddingVector] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedDocument(f"{path}:{lineno}: invalid JSON") from exc
            if "id" not in rec or "v" not in rec:
                raise MalformedDocument(f"{path}:{lineno}: row needs 'id' and 'v'")
            vid = str(rec["id"])
            if vid in out:
                raise DuplicateId(f"{path}:{lineno}: duplicate embedding id {vid!r}")
            values = np.asarray(rec["v"], dtype=np.float64)
            if values.shape != (dim,):
                raise DimensionMismatch(
                    f"{path}:{lineno}: row has {values.size} values, header dim is {dim}"
                )
            if not np.all(np.isfinite(values)):
                raise MalformedDocument(f"{path}:{lineno}: non-finite value")
            out[vid] = EmbeddingVector(id=vid, values=values)
    return out


def write_embeddings(
    path: str | Path, vectors: Sequence[EmbeddingVector], encoder: str
) -> None:
    if not vectors:
        raise EmptyInput("no vectors to write")
    dim = vectors[0].dim
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"dim": dim, "encoder": encoder}) + "\n")
        for v in vectors:
            if v.dim != dim:
                raise DimensionMismatch(f"vector {v.id!r} has dim {v.dim}, expected {dim}")
            fh.write(
                json.dumps({"id": v.id, "v": [float(x) for x in v.values]}) + "\n"
            )
