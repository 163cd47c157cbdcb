"""Argument-class models: flat, rule-gated flat, and two-level cascade.

Three interchangeable strategies sit behind one train/classify API:

* ``FLAT7``            — a single 7-class model, no rule gate.
* ``FLAT5_PLUS_RULES`` — the rule gate handles the two gated classes, a
  single 5-class model covers the rest.
* ``CASCADE``          — the rule gate, then a premise/claim binary
  model, then a per-branch head (3-way premise, 2-way claim).

Gated predictions never consult model weights.  All argmax decisions
break ties toward the lowest class index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import (
    ArgumentClass,
    CLAIM_CLASSES,
    GATED_CLASSES,
    Level1,
    MonetaryExpression,
    NON_GATED_CLASSES,
    PREMISE_CLASSES,
    Utterance,
    parse_class,
)
from .errors import EmptyInput, MalformedDocument, MissingGoldLabel
from .gate import Gate
from .segment import segment
from .textclf import (
    EmbeddingTableBackend,
    FeaturizerConfig,
    HashedBackend,
    Hyperparams,
    LinearModel,
    predict_proba,
    train,
)

SCHEMA = "ac-model/1"

Pair = tuple[MonetaryExpression, Utterance]


class AcStrategy(Enum):
    FLAT7 = "flat7"
    FLAT5_PLUS_RULES = "flat5_plus_rules"
    CASCADE = "cascade"


@dataclass
class AcPrediction:
    expr_id: str
    label: ArgumentClass
    gate_rule: str | None = None
    level1_probs: np.ndarray | None = None
    head_probs: np.ndarray | None = None
    flat_probs: np.ndarray | None = None

    @property
    def is_gated(self) -> bool:
        return self.gate_rule is not None


@dataclass
class AcModel:
    strategy: AcStrategy
    backend: HashedBackend | EmbeddingTableBackend
    gate: Gate | None
    context: int = 0
    flat: LinearModel | None = None
    level1: LinearModel | None = None
    premise: LinearModel | None = None
    claim: LinearModel | None = None


def _gold(expr: MonetaryExpression) -> ArgumentClass:
    if expr.gold_class is None:
        raise MissingGoldLabel(f"expression {expr.expr_id} has no gold class")
    return expr.gold_class


def balance_resample(pairs: Sequence[Pair], seed: int) -> list[Pair]:
    """Downsample the larger premise/claim branch to the smaller's size.

    Per-class quotas within the downsampled branch follow largest-remainder
    rounding of the proportional share (remainder ties go to the earlier
    class in canonical order), so the branch's class mix is preserved as
    closely as integers allow.  Selection within a class is seeded and the
    survivors keep their original order.
    """
    if not pairs:
        raise EmptyInput("no samples to balance")
    branch_of = {}
    by_class: dict[ArgumentClass, list[int]] = {}
    for i, (expr, _) in enumerate(pairs):
        cls = _gold(expr)
        if cls in GATED_CLASSES:
            raise MissingGoldLabel(
                f"expression {expr.expr_id}: gated class {cls.value} cannot be balanced"
            )
        branch_of[i] = cls.level1()
        by_class.setdefault(cls, []).append(i)
    totals = {
        Level1.PREMISE: sum(1 for b in branch_of.values() if b is Level1.PREMISE),
        Level1.CLAIM: sum(1 for b in branch_of.values() if b is Level1.CLAIM),
    }
    if totals[Level1.PREMISE] == totals[Level1.CLAIM]:
        return list(pairs)
    big = Level1.PREMISE if totals[Level1.PREMISE] > totals[Level1.CLAIM] else Level1.CLAIM
    target = min(totals.values())
    big_total = totals[big]
    big_classes = [c for c in NON_GATED_CLASSES if c.level1() is big and c in by_class]

    shares = [len(by_class[c]) * target / big_total for c in big_classes]
    quotas = [int(s) for s in shares]
    leftover = target - sum(quotas)
    order = sorted(range(len(big_classes)), key=lambda i: (-(shares[i] - quotas[i]), i))
    for i in order[:leftover]:
        quotas[i] += 1

    rng = np.random.default_rng(seed)
    keep = set()
    for cls, quota in zip(big_classes, quotas):
        rows = by_class[cls]
        chosen = rng.choice(len(rows), size=quota, replace=False)
        keep.update(rows[j] for j in chosen)
    return [
        p
        for i, p in enumerate(pairs)
        if branch_of[i] is not big or i in keep
    ]


def _texts(pairs: Sequence[Pair], context: int) -> list[str]:
    return [segment(expr, host, context).text for expr, host in pairs]


def _fit(
    pairs: Sequence[Pair],
    labels: Sequence,
    classes: Sequence,
    backend,
    context: int,
    hp: Hyperparams,
) -> LinearModel:
    texts = _texts(pairs, context)
    samples = [
        (backend.vectorize(expr.expr_id, text), label)
        for (expr, _), text, label in zip(pairs, texts, labels)
    ]
    return train(samples, classes, hp)


def train_ac(
    pairs: Sequence[Pair],
    strategy: AcStrategy,
    gate: Gate | None = None,
    backend: HashedBackend | EmbeddingTableBackend | None = None,
    hyperparams: Hyperparams | None = None,
    balance: bool = False,
    context: int = 0,
) -> AcModel:
    """Fit an argument-class model.

    Gated strategies train only on samples whose gold class is one of
    the five learned classes; gated-class samples are the rule set's
    responsibility.  Seeds fan out from ``hyperparams.seed``: level-1
    uses it as-is, the premise head adds 1, the claim head adds 2, and
    balancing adds 10, so stages stay decoupled.
    """
    if not pairs:
        raise EmptyInput("no training samples")
    hp = hyperparams or Hyperparams()
    backend = backend or HashedBackend()
    if strategy is AcStrategy.FLAT7:
        gate = None
    elif gate is None:
        gate = Gate.default()
    model = AcModel(strategy=strategy, backend=backend, gate=gate, context=context)

    if strategy is AcStrategy.FLAT7:
        labels = [_gold(e) for e, _ in pairs]
        model.flat = _fit(pairs, labels, list(ArgumentClass), backend, context, hp)
        return model

    learned = [(e, h) for e, h in pairs if _gold(e) not in GATED_CLASSES]
    if not learned:
        raise EmptyInput("every training sample belongs to a gated class")

    if strategy is AcStrategy.FLAT5_PLUS_RULES:
        if balance:
            learned = balance_resample(learned, hp.seed + 10)
        labels = [_gold(e) for e, _ in learned]
        model.flat = _fit(learned, labels, NON_GATED_CLASSES, backend, context, hp)
        return model

    level1_pairs = balance_resample(learned, hp.seed + 10) if balance else learned
    level1_labels = [_gold(e).level1() for e, _ in level1_pairs]
    model.level1 = _fit(
        level1_pairs,
        level1_labels,
        [Level1.PREMISE, Level1.CLAIM],
        backend,
        context,
        hp,
    )
    premise_pairs = [(e, h) for e, h in learned if _gold(e) in PREMISE_CLASSES]
    claim_pairs = [(e, h) for e, h in learned if _gold(e) in CLAIM_CLASSES]
    hp_premise = Hyperparams(hp.learning_rate, hp.epochs, hp.l2, hp.seed + 1, hp.batch_size)
    hp_claim = Hyperparams(hp.learning_rate, hp.epochs, hp.l2, hp.seed + 2, hp.batch_size)
    model.premise = _fit(
        premise_pairs,
        [_gold(e) for e, _ in premise_pairs],
        PREMISE_CLASSES,
        backend,
        context,
        hp_premise,
    )
    model.claim = _fit(
        claim_pairs,
        [_gold(e) for e, _ in claim_pairs],
        CLAIM_CLASSES,
        backend,
        context,
        hp_claim,
    )
    return model


def classify(model: AcModel, expr: MonetaryExpression, host: Utterance) -> AcPrediction:
    """Predict the argument class of one expression in its utterance."""
    if model.gate is not None:
        decision = model.gate.gate(expr, host)
        if decision.is_gated:
            return AcPrediction(
                expr_id=expr.expr_id,
                label=decision.gated_class,
                gate_rule=decision.rule_name,
            )
    text = segment(expr, host, model.context).text
    vec = model.backend.vectorize(expr.expr_id, text)
    if model.strategy in (AcStrategy.FLAT7, AcStrategy.FLAT5_PLUS_RULES):
        probs = predict_proba(model.flat, vec)
        label = model.flat.classes[int(np.argmax(probs))]
        return AcPrediction(expr_id=expr.expr_id, label=label, flat_probs=probs)
    l1 = predict_proba(model.level1, vec)
    branch = model.level1.classes[int(np.argmax(l1))]
    head = model.premise if branch is Level1.PREMISE else model.claim
    hp = predict_proba(head, vec)
    label = head.classes[int(np.argmax(hp))]
    return AcPrediction(
        expr_id=expr.expr_id, label=label, level1_probs=l1, head_probs=hp
    )


def classify_many(model: AcModel, pairs: Sequence[Pair]) -> list[AcPrediction]:
    return [classify(model, expr, host) for expr, host in pairs]


# ---------------------------------------------------------------------------
# Persistence: one UTF-8 JSON document per model.  Weight matrices wider
# than 1024 columns keep only their nonzero columns.
# ---------------------------------------------------------------------------

_DENSE_LIMIT = 1024


def _classes_to_json(classes: list) -> dict:
    if all(isinstance(c, Level1) for c in classes):
        return {"kind": "level1", "names": [c.value for c in classes]}
    if all(isinstance(c, ArgumentClass) for c in classes):
        return {"kind": "argument", "names": [c.value for c in classes]}
    return {"kind": "str", "names": [str(c) for c in classes]}


def _classes_from_json(doc: dict) -> list:
    if doc["kind"] == "level1":
        return [Level1(n) for n in doc["names"]]
    if doc["kind"] == "argument":
        return [parse_class(n) for n in doc["names"]]
    return list(doc["names"])


def _linear_to_json(m: LinearModel) -> dict:
    W = m.weights
    out = {
        "classes": _classes_to_json(m.classes),
        "dim": m.dim,
        "bias": m.bias.tolist(),
        "hyperparams": {
            "learning_rate": m.hyperparams.learning_rate,
            "epochs": m.hyperparams.epochs,
            "l2": m.hyperparams.l2,
            "seed": m.hyperparams.seed,
            "batch_size": m.hyperparams.batch_size,
        },
        "final_loss": m.final_loss,
    }
    if m.dim > _DENSE_LIMIT:
        cols = np.nonzero(np.any(W != 0.0, axis=0))[0]
        out["weights"] = {
            "format": "sparse_cols",
            "cols": cols.tolist(),
            "values": W[:, cols].tolist(),
        }
    else:
        out["weights"] = {"format": "dense", "values": W.tolist()}
    return out


def _linear_from_json(doc: dict) -> LinearModel:
    classes = _classes_from_json(doc["classes"])
    dim = doc["dim"]
    wdoc = doc["weights"]
    if wdoc["format"] == "sparse_cols":
        W = np.zeros((len(classes), dim))
        cols = np.asarray(wdoc["cols"], dtype=np.int64)
        if len(cols):
            W[:, cols] = np.asarray(wdoc["values"], dtype=np.float64)
    elif wdoc["format"] == "dense":
        W = np.asarray(wdoc["values"], dtype=np.float64).reshape(len(classes), dim)
    else:
        raise MalformedDocument(f"unknown weight format {wdoc['format']!r}")
    hp = Hyperparams(**doc["hyperparams"])
    return LinearModel(
        classes=classes,
        weights=W,
        bias=np.asarray(doc["bias"], dtype=np.float64),
        hyperparams=hp,
        final_loss=doc.get("final_loss"),
    )


def save_ac_model(model: AcModel, path: str | Path) -> None:
    doc = {
        "schema": SCHEMA,
        "strategy": model.strategy.value,
        "context": model.context,
        "backend": model.backend.name,
        "gate_rules": model.gate.rules_json() if model.gate is not None else None,
    }
    if isinstance(model.backend, HashedBackend):
        doc["featurizer"] = {
            "dim": model.backend.config.dim,
            "ngram_sizes": list(model.backend.config.ngram_sizes),
        }
    else:
        doc["embedding_dim"] = model.backend.dim
    parts = {}
    for name in ("flat", "level1", "premise", "claim"):
        part = getattr(model, name)
        if part is not None:
            parts[name] = _linear_to_json(part)
    doc["models"] = parts
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False),
        encoding="utf-8",
    )


def load_ac_model(path: str | Path, embeddings: dict | None = None) -> AcModel:
    """Reload a saved model; embedding-backed models need their table."""
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
        backend = EmbeddingTableBackend(embeddings)
    else:
        raise MalformedDocument(f"{path}: unknown backend {doc['backend']!r}")
    gate = None
    if doc.get("gate_rules") is not None:
        gate = Gate.from_rules_json(doc["gate_rules"])
    model = AcModel(
        strategy=AcStrategy(doc["strategy"]),
        backend=backend,
        gate=gate,
        context=doc.get("context", 0),
    )
    for name, part in doc.get("models", {}).items():
        setattr(model, name, _linear_from_json(part))
    return model
