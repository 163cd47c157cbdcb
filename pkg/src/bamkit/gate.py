"""Handcrafted rule gate applied before any learned model.

The gate inspects each expression (NFKC-normalized) and either assigns
one of the two non-argumentative classes directly or passes the sample
on to the classifiers.  Samples the gate fires on never reach a learned
model, which shrinks the learned label space from seven to five classes.

Rule semantics: rules are tried in order; the first matching rule
decides.  A matching rule with a gated-class verdict yields that class;
a matching rule with the PassThrough verdict short-circuits to Pass
(useful as a guard in front of broader rules).  If nothing matches the
sample passes.  An empty rule list is the identity gate.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .corpus import (
    GATED_CLASSES,
    ArgumentClass,
    MonetaryExpression,
    Utterance,
    normalize,
    parse_class,
)
from .errors import MalformedDocument, MissingGoldLabel


class RuleKind(Enum):
    LEXICON_PRESENCE = "lexicon_presence"
    LEXICON_ABSENCE = "lexicon_absence"
    PATTERN = "pattern"


PASS_THROUGH = "PassThrough"


@dataclass
class GateRule:
    """One surface rule.

    payload is a list of lexicon entries for the lexicon kinds or a
    regex string for ``pattern``.  ``scope`` selects what the rule
    matches against: the expression surface (default) or the whole
    host text.
    """

    name: str
    kind: RuleKind
    payload: list[str] | str
    verdict: ArgumentClass | None  # None = PassThrough
    scope: str = "surface"

    def __post_init__(self) -> None:
        if self.verdict is not None and self.verdict not in GATED_CLASSES:
            raise MalformedDocument(
                f"rule {self.name!r}: verdict must be NonMonetary, Other or "
                f"{PASS_THROUGH}"
            )
        if self.scope not in ("surface", "host"):
            raise MalformedDocument(f"rule {self.name!r}: unknown scope {self.scope!r}")
        if self.kind is RuleKind.PATTERN:
            if not isinstance(self.payload, str):
                raise MalformedDocument(f"rule {self.name!r}: pattern payload must be a string")
            self._regex = re.compile(self.payload)
        else:
            if not isinstance(self.payload, list):
                raise MalformedDocument(f"rule {self.name!r}: lexicon payload must be a list")
            self._regex = None

    def matches(self, surface: str, host_text: str) -> bool:
        target = surface if self.scope == "surface" else host_text
        if self.kind is RuleKind.LEXICON_PRESENCE:
            return any(entry in target for entry in self.payload)
        if self.kind is RuleKind.LEXICON_ABSENCE:
            return all(entry not in target for entry in self.payload)
        return self._regex.search(target) is not None


@dataclass
class GateDecision:
    """Either Gated(class) or Pass (gated_class None)."""

    gated_class: ArgumentClass | None = None
    rule_name: str | None = None

    @property
    def is_gated(self) -> bool:
        return self.gated_class is not None


PASS = GateDecision()


class Gate:
    """Ordered rule list; pure function of (surface, host text, rules)."""

    def __init__(self, rules: list[GateRule]):
        self.rules = list(rules)

    def gate(self, expr: MonetaryExpression, host: Utterance) -> GateDecision:
        surface = normalize(expr.surface)
        host_text = normalize(host.text)
        for rule in self.rules:
            if rule.matches(surface, host_text):
                if rule.verdict is None:
                    return PASS
                return GateDecision(gated_class=rule.verdict, rule_name=rule.name)
        return PASS

    @classmethod
    def from_rules_json(cls, doc: list) -> Gate:
        rules = []
        for i, rec in enumerate(doc):
            if not isinstance(rec, dict):
                raise MalformedDocument(f"rule[{i}]: not an object")
            try:
                kind = RuleKind(rec["kind"])
            except (KeyError, ValueError):
                raise MalformedDocument(f"rule[{i}]: bad or missing kind") from None
            verdict_raw = rec.get("verdict", PASS_THROUGH)
            verdict = None if verdict_raw == PASS_THROUGH else parse_class(verdict_raw)
            payload = rec.get("payload")
            if isinstance(payload, list):
                payload = [normalize(p) for p in payload]
            rules.append(
                GateRule(
                    name=rec.get("name", f"rule-{i}"),
                    kind=kind,
                    payload=payload,
                    verdict=verdict,
                    scope=rec.get("scope", "surface"),
                )
            )
        return cls(rules)

    @classmethod
    def from_file(cls, path: str | Path) -> Gate:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(doc, list):
            raise MalformedDocument(f"{path}: rule file must be a JSON array")
        return cls.from_rules_json(doc)

    @classmethod
    def default(cls) -> Gate:
        """The shipped rule list (see data/gate_rules.json)."""
        text = resources.files("bamkit.data").joinpath("gate_rules.json").read_text("utf-8")
        return cls.from_rules_json(json.loads(text))

    def rules_json(self) -> list[dict]:
        """Serialize the rule list back to its config form."""
        return [
            {
                "name": r.name,
                "kind": r.kind.value,
                "payload": r.payload,
                "verdict": r.verdict.value if r.verdict else PASS_THROUGH,
                "scope": r.scope,
            }
            for r in self.rules
        ]


@dataclass
class GateClassStats:
    """Precision/recall of one gated-class verdict against gold labels."""

    gated_class: ArgumentClass
    tp: int = 0
    fp: int = 0
    fn: int = 0
    precision: float = 0.0
    recall: float = 0.0
    precision_undefined: bool = False  # no predictions at all


@dataclass
class GateReport:
    per_class: dict[ArgumentClass, GateClassStats]
    n_gated: int
    n_passed: int


def gate_stats(
    pairs: list[tuple[MonetaryExpression, Utterance]], gate: Gate
) -> GateReport:
    """Per-class precision/recall of the gate over labeled expressions."""
    stats = {cls: GateClassStats(gated_class=cls) for cls in GATED_CLASSES}
    n_gated = 0
    for expr, host in pairs:
        if expr.gold_class is None:
            raise MissingGoldLabel(f"expression {expr.expr_id!r} has no gold class")
        decision = gate.gate(expr, host)
        if decision.is_gated:
            n_gated += 1
            if decision.gated_class == expr.gold_class:
                stats[decision.gated_class].tp += 1
            else:
                stats[decision.gated_class].fp += 1
                if expr.gold_class in stats:
                    stats[expr.gold_class].fn += 1
        elif expr.gold_class in stats:
            stats[expr.gold_class].fn += 1
    for st in stats.values():
        predicted = st.tp + st.fp
        st.precision_undefined = predicted == 0
        st.precision = st.tp / predicted if predicted else 0.0
        gold = st.tp + st.fn
        st.recall = st.tp / gold if gold else 0.0
    return GateReport(per_class=stats, n_gated=n_gated, n_passed=len(pairs) - n_gated)
