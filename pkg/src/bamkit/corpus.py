"""Corpus data model and loaders for the three task documents.

Input files (all UTF-8 JSON, schemas documented in README.md):

* budget list   — JSON array of budget-item objects
* minutes files — JSON array of utterance objects, each nesting its
                  monetary-expression anchors

All text is normalized to NFKC at load time so half-width/full-width
variants never leak into rule matching or featurization.  The loaded
corpus is immutable in practice: loaders never mutate input files and
callers treat the returned records as read-only.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import (
    DuplicateId,
    MalformedDocument,
    MissingGoldLabel,
    SpanOutOfBounds,
)


def normalize(text: str) -> str:
    """NFKC-normalize text (full-width digits -> ASCII, etc.)."""
    return unicodedata.normalize("NFKC", text)


class Level1(Enum):
    """Top level of the class taxonomy: the cascade's routing label."""

    PREMISE = "Premise"
    CLAIM = "Claim"
    GATED = "Gated"


class ArgumentClass(Enum):
    """The seven argument classes, with their two-level structure."""

    PREMISE_PAST = "PremisePast"
    PREMISE_FUTURE = "PremiseFuture"
    PREMISE_OTHER = "PremiseOther"
    CLAIM_OPINIONS = "ClaimOpinions"
    CLAIM_OTHER = "ClaimOther"
    NON_MONETARY = "NonMonetary"
    OTHER = "Other"

    @property
    def label(self) -> str:
        """Long-form task label for this class."""
        return _LONG_LABELS[self]

    def level1(self) -> Level1:
        if self in (self.PREMISE_PAST, self.PREMISE_FUTURE, self.PREMISE_OTHER):
            return Level1.PREMISE
        if self in (self.CLAIM_OPINIONS, self.CLAIM_OTHER):
            return Level1.CLAIM
        return Level1.GATED

    def level2(self) -> int:
        """Index of this class within its level-1 branch."""
        return _LEVEL2_INDEX[self]


_LONG_LABELS = {
    ArgumentClass.PREMISE_PAST: "Premise: Past and Decisions",
    ArgumentClass.PREMISE_FUTURE: "Premise: Current and Future",
    ArgumentClass.PREMISE_OTHER: "Premise: Other",
    ArgumentClass.CLAIM_OPINIONS: "Claim: Opinions, suggestions and questions",
    ArgumentClass.CLAIM_OTHER: "Claim: Other",
    ArgumentClass.NON_MONETARY: "Not monetary expression",
    ArgumentClass.OTHER: "Other",
}

# Canonical class order used everywhere a class list is needed.
ALL_CLASSES: tuple[ArgumentClass, ...] = (
    ArgumentClass.PREMISE_PAST,
    ArgumentClass.PREMISE_FUTURE,
    ArgumentClass.PREMISE_OTHER,
    ArgumentClass.CLAIM_OPINIONS,
    ArgumentClass.CLAIM_OTHER,
    ArgumentClass.NON_MONETARY,
    ArgumentClass.OTHER,
)
PREMISE_CLASSES: tuple[ArgumentClass, ...] = ALL_CLASSES[:3]
CLAIM_CLASSES: tuple[ArgumentClass, ...] = ALL_CLASSES[3:5]
NON_GATED_CLASSES: tuple[ArgumentClass, ...] = ALL_CLASSES[:5]
GATED_CLASSES: tuple[ArgumentClass, ...] = ALL_CLASSES[5:]

_LEVEL2_INDEX = {
    cls: branch.index(cls)
    for branch in (PREMISE_CLASSES, CLAIM_CLASSES, GATED_CLASSES)
    for cls in branch
}

_CLASS_BY_NAME = {cls.value: cls for cls in ALL_CLASSES}
_CLASS_BY_LABEL = {cls.label: cls for cls in ALL_CLASSES}


def parse_class(name: str) -> ArgumentClass:
    """Parse a class from its short name or long task label."""
    cls = _CLASS_BY_NAME.get(name) or _CLASS_BY_LABEL.get(name)
    if cls is None:
        raise MalformedDocument(f"unknown argument class: {name!r}")
    return cls


class Source(Enum):
    LOCAL_PROCEEDING = "local_proceeding"
    NATIONAL_DIET_SPEECH = "national_diet_speech"


@dataclass
class BudgetItem:
    """One budget record with its eleven descriptive features.

    Monetary amount fields stay as published text; nothing parses them
    to numbers.  Only ``item`` and ``description`` feed relation
    detection; they may be empty strings but must be present.
    """

    id: str
    title: str = ""
    url: str = ""
    item: str = ""
    budget_amount: str = ""
    categories: list[str] = field(default_factory=list)
    types_of_account: str = ""
    department: str = ""
    last_year_budget: str = ""
    description: str = ""
    budget_difference: str = ""

    @property
    def pair_text(self) -> str:
        """Text used on the budget side of relation scoring."""
        return f"{self.item} {self.description}".strip()


@dataclass
class MonetaryExpression:
    """One evaluation unit: a money span inside a host utterance."""

    expr_id: str
    surface: str
    span: tuple[int, int]
    doc_id: str = ""
    gold_class: ArgumentClass | None = None
    gold_relation_id: str | None = None
    predicted_class: ArgumentClass | None = None
    predicted_relation_id: str | None = None

    @property
    def is_labeled(self) -> bool:
        """True for training samples, False for test samples."""
        return self.gold_class is not None


@dataclass
class Utterance:
    """A local-proceeding utterance or national-diet speech."""

    source: Source
    region: str
    doc_id: str
    text: str
    expressions: list[MonetaryExpression] = field(default_factory=list)


@dataclass
class Corpus:
    """Everything one run consumes, indexed for lookup."""

    budget: list[BudgetItem] = field(default_factory=list)
    utterances: list[Utterance] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.budget_by_id = {b.id: b for b in self.budget}
        self.utterances_by_id = {u.doc_id: u for u in self.utterances}

    @property
    def expressions(self) -> list[MonetaryExpression]:
        return [e for u in self.utterances for e in u.expressions]

    def host_of(self, expr: MonetaryExpression) -> Utterance:
        return self.utterances_by_id[expr.doc_id]


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise MalformedDocument(f"{where}: missing required field {key!r}")
    return record[key]


def _read_json(path: str | Path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"{path}: invalid JSON ({exc})") from exc


def load_budget(path: str | Path) -> list[BudgetItem]:
    """Load the budget list.

    Raises MalformedDocument on schema violations and DuplicateId when
    two items share an id.  Unknown keys are ignored.
    """
    doc = _read_json(path)
    if isinstance(doc, dict) and "items" in doc:
        doc = doc["items"]
    if not isinstance(doc, list):
        raise MalformedDocument(f"{path}: budget document must be a JSON array")

    items: list[BudgetItem] = []
    seen: set[str] = set()
    for i, rec in enumerate(doc):
        where = f"{path}: item[{i}]"
        if not isinstance(rec, dict):
            raise MalformedDocument(f"{where}: not an object")
        item_id = _require(rec, "id", where)
        if not isinstance(item_id, str) or not item_id:
            raise MalformedDocument(f"{where}: id must be a non-empty string")
        if item_id in seen:
            raise DuplicateId(f"{path}: duplicate budget id {item_id!r}")
        seen.add(item_id)
        # item/description may be empty but not absent
        item_text = _require(rec, "item", where)
        description = _require(rec, "description", where)
        items.append(
            BudgetItem(
                id=item_id,
                title=normalize(str(rec.get("title", ""))),
                url=str(rec.get("url", "")),
                item=normalize(str(item_text)),
                budget_amount=normalize(str(rec.get("budget_amount", ""))),
                categories=[normalize(str(c)) for c in rec.get("categories", [])],
                types_of_account=normalize(str(rec.get("types_of_account", ""))),
                department=normalize(str(rec.get("department", ""))),
                last_year_budget=normalize(str(rec.get("last_year_budget", ""))),
                description=normalize(str(description)),
                budget_difference=normalize(str(rec.get("budget_difference", ""))),
            )
        )
    return items


def _parse_expression(rec: dict, text: str, doc_id: str, where: str) -> MonetaryExpression:
    expr_id = _require(rec, "expr_id", where)
    surface = normalize(str(_require(rec, "surface", where)))
    span = _require(rec, "span", where)
    if (
        not isinstance(span, (list, tuple))
        or len(span) != 2
        or not all(isinstance(v, int) for v in span)
    ):
        raise MalformedDocument(f"{where}: span must be a [start, end] pair of ints")
    start, end = span
    if not (0 <= start < end <= len(text)):
        raise SpanOutOfBounds(
            f"{where}: span ({start}, {end}) outside text of length {len(text)}"
        )
    if text[start:end] != surface:
        # NFKC can shift offsets for length-changing compatibility chars;
        # realign to the nearest occurrence of the normalized surface.
        best = None
        pos = text.find(surface)
        while pos != -1:
            if best is None or abs(pos - start) < abs(best - start):
                best = pos
            pos = text.find(surface, pos + 1)
        if best is None:
            raise MalformedDocument(
                f"{where}: surface {surface!r} does not match text at span "
                f"({start}, {end}) and occurs nowhere in the utterance"
            )
        start, end = best, best + len(surface)

    gold_class = rec.get("gold_class")
    gold_relation = rec.get("gold_relation_id")
    return MonetaryExpression(
        expr_id=expr_id,
        surface=surface,
        span=(start, end),
        doc_id=doc_id,
        gold_class=parse_class(gold_class) if gold_class is not None else None,
        gold_relation_id=str(gold_relation) if gold_relation is not None else None,
    )


def load_minutes(path: str | Path) -> tuple[list[Utterance], list[MonetaryExpression]]:
    """Load a minutes file (training or test).

    Returns (utterances, expressions).  Expressions without gold labels
    are test samples (``is_labeled`` False).  Span/surface consistency
    is enforced against the NFKC-normalized utterance text.
    """
    doc = _read_json(path)
    if isinstance(doc, dict) and "utterances" in doc:
        doc = doc["utterances"]
    if not isinstance(doc, list):
        raise MalformedDocument(f"{path}: minutes document must be a JSON array")

    utterances: list[Utterance] = []
    expressions: list[MonetaryExpression] = []
    seen_docs: set[str] = set()
    seen_exprs: set[str] = set()
    for i, rec in enumerate(doc):
        where = f"{path}: utterance[{i}]"
        if not isinstance(rec, dict):
            raise MalformedDocument(f"{where}: not an object")
        source_raw = _require(rec, "source", where)
        try:
            source = Source(source_raw)
        except ValueError:
            raise MalformedDocument(f"{where}: unknown source {source_raw!r}") from None
        doc_id = _require(rec, "doc_id", where)
        if doc_id in seen_docs:
            raise DuplicateId(f"{path}: duplicate doc_id {doc_id!r}")
        seen_docs.add(doc_id)
        text = normalize(str(_require(rec, "text", where)))
        utt = Utterance(
            source=source,
            region=normalize(str(_require(rec, "region", where))),
            doc_id=doc_id,
            text=text,
        )
        for j, erec in enumerate(rec.get("expressions", [])):
            ewhere = f"{where}.expressions[{j}]"
            if not isinstance(erec, dict):
                raise MalformedDocument(f"{ewhere}: not an object")
            expr = _parse_expression(erec, text, doc_id, ewhere)
            if expr.expr_id in seen_exprs:
                raise DuplicateId(f"{path}: duplicate expr_id {expr.expr_id!r}")
            seen_exprs.add(expr.expr_id)
            utt.expressions.append(expr)
            expressions.append(expr)
        utterances.append(utt)
    return utterances, expressions


def class_histogram(
    expressions: list[MonetaryExpression],
) -> dict[ArgumentClass, int]:
    """Gold-class counts over all seven classes (zero-filled)."""
    counts = {cls: 0 for cls in ALL_CLASSES}
    for expr in expressions:
        if expr.gold_class is None:
            raise MissingGoldLabel(f"expression {expr.expr_id!r} has no gold class")
        counts[expr.gold_class] += 1
    return counts


# ---------------------------------------------------------------------------
# Internal interchange format: one JSON record per line, UTF-8.
# Record kinds: budget_item, utterance, proposition (see README.md).
# ---------------------------------------------------------------------------


def _dumps(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def _expression_record(e: MonetaryExpression) -> dict:
    return {
        "expr_id": e.expr_id,
        "surface": e.surface,
        "span": [e.span[0], e.span[1]],
        "gold_class": e.gold_class.value if e.gold_class else None,
        "gold_relation_id": e.gold_relation_id,
    }


def dump_interchange(
    path: str | Path,
    budget: list[BudgetItem] = (),
    utterances: list[Utterance] = (),
    propositions: list = (),
) -> None:
    """Write corpus records to the line-JSON interchange file."""
    with open(path, "w", encoding="utf-8") as fh:
        for b in budget:
            fh.write(
                _dumps(
                    {
                        "kind": "budget_item",
                        "id": b.id,
                        "title": b.title,
                        "url": b.url,
                        "item": b.item,
                        "budget_amount": b.budget_amount,
                        "categories": b.categories,
                        "types_of_account": b.types_of_account,
                        "department": b.department,
                        "last_year_budget": b.last_year_budget,
                        "description": b.description,
                        "budget_difference": b.budget_difference,
                    }
                )
                + "\n"
            )
        for u in utterances:
            fh.write(
                _dumps(
                    {
                        "kind": "utterance",
                        "source": u.source.value,
                        "region": u.region,
                        "doc_id": u.doc_id,
                        "text": u.text,
                        "expressions": [_expression_record(e) for e in u.expressions],
                    }
                )
                + "\n"
            )
        for p in propositions:
            fh.write(
                _dumps(
                    {
                        "kind": "proposition",
                        "expr_id": p.expr_id,
                        "text": p.text,
                        "sentence_spans": [[s, e] for s, e in p.sentence_spans],
                    }
                )
                + "\n"
            )


def load_interchange(path: str | Path):
    """Read an interchange file back into corpus records.

    Returns (budget_items, utterances, proposition_records); proposition
    records come back as plain dicts since they only feed the embedding
    exporter.
    """
    budget: list[BudgetItem] = []
    utterances: list[Utterance] = []
    propositions: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedDocument(f"{path}:{lineno}: invalid JSON") from exc
            kind = rec.get("kind")
            if kind == "budget_item":
                budget.append(
                    BudgetItem(
                        id=rec["id"],
                        title=rec.get("title", ""),
                        url=rec.get("url", ""),
                        item=rec.get("item", ""),
                        budget_amount=rec.get("budget_amount", ""),
                        categories=list(rec.get("categories", [])),
                        types_of_account=rec.get("types_of_account", ""),
                        department=rec.get("department", ""),
                        last_year_budget=rec.get("last_year_budget", ""),
                        description=rec.get("description", ""),
                        budget_difference=rec.get("budget_difference", ""),
                    )
                )
            elif kind == "utterance":
                utt = Utterance(
                    source=Source(rec["source"]),
                    region=rec["region"],
                    doc_id=rec["doc_id"],
                    text=rec["text"],
                )
                for erec in rec.get("expressions", []):
                    gold = erec.get("gold_class")
                    utt.expressions.append(
                        MonetaryExpression(
                            expr_id=erec["expr_id"],
                            surface=erec["surface"],
                            span=tuple(erec["span"]),
                            doc_id=utt.doc_id,
                            gold_class=parse_class(gold) if gold else None,
                            gold_relation_id=erec.get("gold_relation_id"),
                        )
                    )
                utterances.append(utt)
            elif kind == "proposition":
                propositions.append(rec)
            else:
                raise MalformedDocument(f"{path}:{lineno}: unknown record kind {kind!r}")
    return budget, utterances, propositions
