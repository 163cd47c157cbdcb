"""Relation detection: link a monetary expression to its budget item.

Two stages per expression:

1. A binary pair classifier scores every (proposition, budget item)
   candidate; candidates whose related-probability clears the threshold
   survive.  No survivor means "no related item" (the linker returns
   None and never touches embedding lookups).
2. Survivors are reranked by cosine similarity between the proposition
   vector and the budget-item vector; the best cosine wins, ties going
   to the lexicographically smallest budget id.

Vectors for the rerank come from an embedding interchange file when one
is available, else from a built-in hashed text encoder, so the pipeline
runs offline end to end.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import GATED_CLASSES, BudgetItem, MonetaryExpression, Utterance
from .errors import (
    EmptyInput,
    MalformedDocument,
    MissingEmbedding,
    MissingGoldLabel,
)
from .segment import Proposition, segment
from .textclf import (
    EmbeddingVector,
    FeaturizerConfig,
    HashedBackend,
    Hyperparams,
    LinearModel,
    featurize,
    predict_proba_many,
    train,
)

SCHEMA = "rid-model/1"

UNRELATED = "unrelated"
RELATED = "related"
PAIR_CLASSES = (UNRELATED, RELATED)

SEPARATOR = "\t"
DEFAULT_THRESHOLD = 0.5
DEFAULT_NEGATIVES = 5
RERANK_DIM = 4096


@dataclass
class CandidatePair:
    """One (expression proposition, budget item) scoring unit."""

    expr_id: str
    budget_id: str
    proposition: str
    item_text: str
    description: str
    related: bool | None = None  # gold label; None for prediction-time pairs
    related_prob: float | None = None  # filled by the pair classifier
    cosine: float | None = None  # filled only for threshold survivors

    @property
    def pair_text(self) -> str:
        """Classifier input: proposition, item, description, tab-separated."""
        return f"{self.proposition}{SEPARATOR}{self.item_text}{SEPARATOR}{self.description}"

    @property
    def budget_text(self) -> str:
        """Budget-side text used for rerank vectors."""
        return f"{self.item_text} {self.description}".strip()


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; zero-norm inputs score 0.0 by convention."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise MalformedDocument(f"cosine shapes differ: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


class HashedVectorProvider:
    """Rerank vectors from hashed character n-grams of the text itself."""

    name = "hashed"

    def __init__(self, dim: int = RERANK_DIM) -> None:
        self.config = FeaturizerConfig(dim=dim)

    def vector_for(self, key: str, text: str) -> np.ndarray:
        fv = featurize(text, self.config)
        dense = np.zeros(self.config.dim)
        dense[fv.indices] = fv.values
        return dense


class TableVectorProvider:
    """Rerank vectors looked up by id in a loaded embedding table."""

    name = "table"

    def __init__(self, table: dict[str, EmbeddingVector]) -> None:
        if not table:
            raise EmptyInput("embedding table is empty")
        self.table = table

    def vector_for(self, key: str, text: str) -> np.ndarray:
        if key not in self.table:
            raise MissingEmbedding(f"no embedding for id {key!r}")
        return self.table[key].values


class PairEmbeddingBackend:
    """Pair-classifier vectors by concatenating the two side embeddings."""

    name = "embeddings"

    def __init__(self, provider) -> None:
        self.provider = provider

    def pair_vector(self, cand: CandidatePair) -> EmbeddingVector:
        left = self.provider.vector_for(cand.expr_id, cand.proposition)
        right = self.provider.vector_for(cand.budget_id, cand.budget_text)
        return EmbeddingVector(
            id=f"{cand.expr_id}::{cand.budget_id}",
            values=np.concatenate([left, right]),
        )


@dataclass
class RidModel:
    pair_model: LinearModel
    backend: HashedBackend | PairEmbeddingBackend
    provider: HashedVectorProvider | TableVectorProvider
    threshold: float = DEFAULT_THRESHOLD
    region_filter: bool = False


@dataclass
class RelationPrediction:
    expr_id: str
    budget_id: str | None
    related_prob: float | None = None  # winner's pair probability
    cosine: float | None = None  # winner's rerank score
    n_survivors: int = 0


def _pair_vectors(backend, candidates: Sequence[CandidatePair]) -> list:
    if isinstance(backend, PairEmbeddingBackend):
        return [backend.pair_vector(c) for c in candidates]
    return [
        backend.vectorize(f"{c.expr_id}::{c.budget_id}", c.pair_text)
        for c in candidates
    ]


def make_pairs(prop: Proposition, budget: Sequence[BudgetItem]) -> list[CandidatePair]:
    """One candidate per budget item for one proposition."""
    if not budget:
        raise EmptyInput("budget list is empty")
    return [
        CandidatePair(
            expr_id=prop.expr_id,
            budget_id=b.id,
            proposition=prop.text,
            item_text=b.item,
            description=b.description,
        )
        for b in budget
    ]


def _filter_by_region(
    budget: Sequence[BudgetItem], region: str
) -> list[BudgetItem]:
    """Keep items whose title or categories mention the region.

    Falls back to the full list when nothing matches, so an unknown
    region never silently produces an empty candidate set.
    """
    if not region:
        return list(budget)
    kept = [
        b
        for b in budget
        if region in b.title or any(region in c for c in b.categories)
    ]
    return kept or list(budget)


def build_training_pairs(
    pairs: Sequence[tuple[MonetaryExpression, Utterance]],
    budget: Sequence[BudgetItem],
    k_negatives: int = DEFAULT_NEGATIVES,
    seed: int = 62,
    context: int = 0,
) -> list[CandidatePair]:
    """Positive pair per gold relation plus k sampled negative pairs.

    Gated-class expressions and expressions without a gold relation
    contribute nothing; negative sampling is uniform over non-gold
    items, without replacement, seeded.
    """
    by_id = {b.id: b for b in budget}
    rng = np.random.default_rng(seed)
    out: list[CandidatePair] = []
    for expr, host in pairs:
        if expr.gold_class in GATED_CLASSES:
            continue
        gold = expr.gold_relation_id
        if gold is None:
            continue
        if gold not in by_id:
            raise MalformedDocument(
                f"expression {expr.expr_id}: gold relation {gold!r} is not a budget id"
            )
        prop = segment(expr, host, context).text
        gold_item = by_id[gold]
        out.append(
            CandidatePair(
                expr_id=expr.expr_id,
                budget_id=gold,
                proposition=prop,
                item_text=gold_item.item,
                description=gold_item.description,
                related=True,
            )
        )
        pool = [b for b in budget if b.id != gold]
        take = min(k_negatives, len(pool))
        for j in rng.choice(len(pool), size=take, replace=False):
            b = pool[int(j)]
            out.append(
                CandidatePair(
                    expr_id=expr.expr_id,
                    budget_id=b.id,
                    proposition=prop,
                    item_text=b.item,
                    description=b.description,
                    related=False,
                )
            )
    if not out:
        raise MissingGoldLabel("no expression carries a gold relation")
    return out


def train_pair_classifier(
    candidates: Sequence[CandidatePair],
    backend: HashedBackend | PairEmbeddingBackend | None = None,
    hyperparams: Hyperparams | None = None,
) -> LinearModel:
    """Fit the binary relatedness model on labeled candidate pairs."""
    backend = backend or HashedBackend()
    labeled = [c for c in candidates if c.related is not None]
    if not labeled:
        raise EmptyInput("no labeled candidate pairs")
    vectors = _pair_vectors(backend, labeled)
    samples = [
        (vec, RELATED if cand.related else UNRELATED)
        for vec, cand in zip(vectors, labeled)
    ]
    return train(samples, list(PAIR_CLASSES), hyperparams)


def train_rid(
    pairs: Sequence[tuple[MonetaryExpression, Utterance]],
    budget: Sequence[BudgetItem],
    backend: HashedBackend | PairEmbeddingBackend | None = None,
    provider: HashedVectorProvider | TableVectorProvider | None = None,
    hyperparams: Hyperparams | None = None,
    k_negatives: int = DEFAULT_NEGATIVES,
    threshold: float = DEFAULT_THRESHOLD,
    region_filter: bool = False,
    context: int = 0,
) -> RidModel:
    """Build training pairs (negative sampling seeded at seed + 20) and fit."""
    hp = hyperparams or Hyperparams()
    backend = backend or HashedBackend()
    provider = provider or HashedVectorProvider()
    training = build_training_pairs(
        pairs, budget, k_negatives=k_negatives, seed=hp.seed + 20, context=context
    )
    pair_model = train_pair_classifier(training, backend, hp)
    return RidModel(
        pair_model=pair_model,
        backend=backend,
        provider=provider,
        threshold=threshold,
        region_filter=region_filter,
    )


def detect_relation(
    model: RidModel,
    expr: MonetaryExpression,
    host: Utterance,
    budget: Sequence[BudgetItem],
    context: int = 0,
) -> RelationPrediction:
    """Link one expression to a budget item, or to None.

    Rerank vectors are looked up only for threshold survivors, so a
    missing embedding for an item nothing relates to is never an error.
    """
    prop = segment(expr, host, context)
    items = (
        _filter_by_region(budget, host.region) if model.region_filter else budget
    )
    candidates = make_pairs(prop, items)
    vectors = _pair_vectors(model.backend, candidates)
    probs = predict_proba_many(model.pair_model, vectors)
    related_col = model.pair_model.classes.index(RELATED)
    survivors = []
    for cand, p in zip(candidates, probs[:, related_col]):
        cand.related_prob = float(p)
        if cand.related_prob >= model.threshold:
            survivors.append(cand)
    if not survivors:
        return RelationPrediction(expr_id=expr.expr_id, budget_id=None)
    best: CandidatePair | None = None
    for cand in survivors:
        left = model.provider.vector_for(cand.expr_id, cand.proposition)
        right = model.provider.vector_for(cand.budget_id, cand.budget_text)
        cand.cosine = cosine(left, right)
        if best is None or (-cand.cosine, cand.budget_id) < (-best.cosine, best.budget_id):
            best = cand
    return RelationPrediction(
        expr_id=expr.expr_id,
        budget_id=best.budget_id,
        related_prob=best.related_prob,
        cosine=best.cosine,
        n_survivors=len(survivors),
    )


def detect_relations(
    model: RidModel,
    pairs: Sequence[tuple[MonetaryExpression, Utterance]],
    budget: Sequence[BudgetItem],
    context: int = 0,
) -> list[RelationPrediction]:
    return [detect_relation(model, e, h, budget, context=context) for e, h in pairs]


# ---------------------------------------------------------------------------
# Persistence (same JSON conventions as the argument-class models).
# ---------------------------------------------------------------------------


def save_rid_model(model: RidModel, path: str | Path) -> None:
    from .cascade import _linear_to_json

    doc = {
        "schema": SCHEMA,
        "threshold": model.threshold,
        "region_filter": model.region_filter,
        "backend": model.backend.name,
        "provider": model.provider.name,
        "pair_model": _linear_to_json(model.pair_model),
    }
    if isinstance(model.backend, HashedBackend):
        doc["featurizer"] = {
            "dim": model.backend.config.dim,
            "ngram_sizes": list(model.backend.config.ngram_sizes),
        }
    if isinstance(model.provider, HashedVectorProvider):
        doc["rerank_dim"] = model.provider.config.dim
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False),
        encoding="utf-8",
    )


def load_rid_model(path: str | Path, embeddings: dict | None = None) -> RidModel:
    from .cascade import _linear_from_json

    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"{path}: invalid model JSON") from exc
    if doc.get("schema") != SCHEMA:
        raise MalformedDocument(f"{path}: expected schema {SCHEMA!r}, got {doc.get('schema')!r}")
    if doc["backend"] == "hashed":
        fz = doc.get("featurizer", {})
        backend = HashedBackend(
            FeaturizerConfig(
                dim=fz.get("dim", 2**18),
                ngram_sizes=tuple(fz.get("ngram_sizes", (1, 2, 3))),
            )
        )
    elif doc["backend"] == "embeddings":
        if embeddings is None:
            raise MalformedDocument(
                f"{path}: embedding-backed model needs an embedding table to load"
            )
        backend = PairEmbeddingBackend(TableVectorProvider(embeddings))
    else:
        raise MalformedDocument(f"{path}: unknown backend {doc['backend']!r}")
    if doc["provider"] == "hashed":
        provider = HashedVectorProvider(dim=doc.get("rerank_dim", RERANK_DIM))
    elif doc["provider"] == "table":
        if embeddings is None:
            raise MalformedDocument(
                f"{path}: table-backed reranker needs an embedding table to load"
            )
        provider = TableVectorProvider(embeddings)
    else:
        raise MalformedDocument(f"{path}: unknown provider {doc['provider']!r}")
    return RidModel(
        pair_model=_linear_from_json(doc["pair_model"]),
        backend=backend,
        provider=provider,
        threshold=doc.get("threshold", DEFAULT_THRESHOLD),
        region_filter=doc.get("region_filter", False),
    )
