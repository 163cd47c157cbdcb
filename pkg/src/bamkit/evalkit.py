"""Scoring and cross-validation.

Metric conventions, fixed so scores are comparable across runs:

* precision/recall with a zero denominator are 0.0, and the F1 of a
  class absent from both gold and predictions is 0.0;
* macro-F1 averages over every declared class, including absent ones;
* the combined task score counts an expression only when both its class
  and its linked budget id (None matching None) are right, so it can
  never exceed the smaller of the two component scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import ALL_CLASSES, ArgumentClass, MonetaryExpression, Utterance
from .errors import EmptyInput, LengthMismatch, TooFewSamples
from .gate import Gate
from .textclf import Hyperparams

Pair = tuple[MonetaryExpression, Utterance]


@dataclass
class ClassScore:
    precision: float
    recall: float
    f1: float
    support: int  # gold count


@dataclass
class EvalReport:
    n: int
    accuracy: float
    macro_f1: float
    per_class: dict
    confusion: np.ndarray  # rows gold, cols predicted

    def summary(self) -> str:
        lines = [f"n={self.n} accuracy={self.accuracy:.4f} macro_f1={self.macro_f1:.4f}"]
        for cls, s in self.per_class.items():
            name = cls.value if hasattr(cls, "value") else str(cls)
            lines.append(
                f"  {name:<15} P={s.precision:.4f} R={s.recall:.4f} "
                f"F1={s.f1:.4f} support={s.support}"
            )
        return "\n".join(lines)


def confusion_matrix(gold: Sequence, pred: Sequence, classes: Sequence) -> np.ndarray:
    if len(gold) != len(pred):
        raise LengthMismatch(f"{len(gold)} gold labels vs {len(pred)} predictions")
    index = {c: i for i, c in enumerate(classes)}
    M = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for g, p in zip(gold, pred):
        if g not in index:
            raise LengthMismatch(f"gold label {g!r} not in declared classes")
        if p not in index:
            raise LengthMismatch(f"predicted label {p!r} not in declared classes")
        M[index[g], index[p]] += 1
    return M


def evaluate_labels(gold: Sequence, pred: Sequence, classes: Sequence = ALL_CLASSES) -> EvalReport:
    """Accuracy, per-class P/R/F1, and macro-F1 over declared classes."""
    if len(gold) == 0:
        raise EmptyInput("nothing to evaluate")
    M = confusion_matrix(gold, pred, classes)
    n = int(M.sum())
    correct = int(np.trace(M))
    per_class = {}
    f1_sum = 0.0
    for i, cls in enumerate(classes):
        tp = int(M[i, i])
        fp = int(M[:, i].sum()) - tp
        fn = int(M[i, :].sum()) - tp
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_class[cls] = ClassScore(precision, recall, f1, support=tp + fn)
        f1_sum += f1
    return EvalReport(
        n=n,
        accuracy=correct / n,
        macro_f1=f1_sum / len(classes),
        per_class=per_class,
        confusion=M,
    )


def _aligned(gold: Mapping, pred: Mapping, what: str) -> tuple[list, list]:
    missing = sorted(set(gold) - set(pred))
    extra = sorted(set(pred) - set(gold))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing {len(missing)} (first: {missing[0]!r})")
        if extra:
            parts.append(f"unexpected {len(extra)} (first: {extra[0]!r})")
        raise LengthMismatch(f"{what} ids do not line up: " + ", ".join(parts))
    keys = sorted(gold)
    return [gold[k] for k in keys], [pred[k] for k in keys]


def evaluate_ac(
    gold: Mapping[str, ArgumentClass],
    pred: Mapping[str, ArgumentClass],
    classes: Sequence = ALL_CLASSES,
) -> EvalReport:
    """Keyed wrapper: both maps must cover exactly the same expr_ids."""
    g, p = _aligned(gold, pred, "argument-class")
    return evaluate_labels(g, p, classes)


@dataclass
class TaskScore:
    n: int
    ac: float  # fraction with correct argument class
    rid: float  # fraction with correct linked budget id (None matches None)
    combined: float  # fraction with both correct


def task_score(
    gold_ac: Mapping[str, ArgumentClass],
    pred_ac: Mapping[str, ArgumentClass],
    gold_rid: Mapping[str, str | None],
    pred_rid: Mapping[str, str | None],
) -> TaskScore:
    ac_g, ac_p = _aligned(gold_ac, pred_ac, "argument-class")
    if set(gold_ac) != set(gold_rid):
        raise LengthMismatch("class and relation gold maps cover different expr_ids")
    rid_g, rid_p = _aligned(gold_rid, pred_rid, "relation")
    n = len(ac_g)
    if n == 0:
        raise EmptyInput("nothing to score")
    ac_hits = [g == p for g, p in zip(ac_g, ac_p)]
    rid_hits = [g == p for g, p in zip(rid_g, rid_p)]
    both = sum(1 for a, r in zip(ac_hits, rid_hits) if a and r)
    return TaskScore(
        n=n,
        ac=sum(ac_hits) / n,
        rid=sum(rid_hits) / n,
        combined=both / n,
    )


def assign_folds(labels: Sequence, n_folds: int, seed: int) -> np.ndarray:
    """Stratified fold assignment.

    Indices of each class are shuffled (seeded), then classes are walked
    in first-appearance order while one global counter deals samples
    round-robin, keeping fold sizes within one of each other overall and
    per class.  Any class with fewer than two samples cannot appear in
    every training split, so it is rejected.
    """
    if n_folds < 2:
        raise TooFewSamples(f"need at least 2 folds, got {n_folds}")
    if len(labels) < n_folds:
        raise TooFewSamples(f"{len(labels)} samples cannot fill {n_folds} folds")
    order: list = []
    by_class: dict = {}
    for i, lab in enumerate(labels):
        if lab not in by_class:
            by_class[lab] = []
            order.append(lab)
        by_class[lab].append(i)
    for lab in order:
        if len(by_class[lab]) < 2:
            raise TooFewSamples(
                f"class {lab!r} has {len(by_class[lab])} sample(s); "
                "every class needs at least 2 for cross-validation"
            )
    rng = np.random.default_rng(seed)
    folds = np.empty(len(labels), dtype=np.int64)
    counter = 0
    for lab in order:
        rows = np.asarray(by_class[lab])
        rows = rows[rng.permutation(len(rows))]
        for r in rows:
            folds[r] = counter % n_folds
            counter += 1
    return folds


@dataclass
class CvResult:
    n_folds: int
    reports: list[EvalReport] = field(default_factory=list)

    @property
    def accuracies(self) -> list[float]:
        return [r.accuracy for r in self.reports]

    @property
    def macro_f1s(self) -> list[float]:
        return [r.macro_f1 for r in self.reports]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.accuracies))

    @property
    def mean_macro_f1(self) -> float:
        return float(np.mean(self.macro_f1s))

    @property
    def std_macro_f1(self) -> float:
        return float(np.std(self.macro_f1s))

    def summary(self) -> str:
        return (
            f"{self.n_folds}-fold accuracy {self.mean_accuracy:.4f}"
            f" +/- {self.std_accuracy:.4f}, macro-F1 {self.mean_macro_f1:.4f}"
            f" +/- {self.std_macro_f1:.4f}"
        )


def cross_validate(
    pairs: Sequence[Pair],
    strategy,
    n_folds: int = 10,
    gate: Gate | None = None,
    backend=None,
    hyperparams: Hyperparams | None = None,
    balance: bool = False,
    context: int = 0,
) -> CvResult:
    """Stratified k-fold over labeled expressions.

    Folds derive from seed + 30 so they stay fixed while model seeds
    vary.  Each fold trains a fresh model on the other folds and is
    scored with accuracy and 7-class macro-F1.
    """
    from .cascade import classify, train_ac

    hp = hyperparams or Hyperparams()
    labels = [expr.gold_class for expr, _ in pairs]
    folds = assign_folds(labels, n_folds, seed=hp.seed + 30)
    result = CvResult(n_folds=n_folds)
    for k in range(n_folds):
        train_pairs = [p for p, f in zip(pairs, folds) if f != k]
        test_pairs = [p for p, f in zip(pairs, folds) if f == k]
        model = train_ac(
            train_pairs,
            strategy,
            gate=gate,
            backend=backend,
            hyperparams=hp,
            balance=balance,
            context=context,
        )
        gold = [expr.gold_class for expr, _ in test_pairs]
        pred = [classify(model, expr, host).label for expr, host in test_pairs]
        result.reports.append(evaluate_labels(gold, pred, ALL_CLASSES))
    return result
