"""Sentence segmentation: build the argument proposition for an expression.

A proposition is the minimal contiguous run of full sentences of the
host utterance that covers the expression span, optionally widened by
``context`` sentences on each side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import MonetaryExpression, Utterance
from .errors import SpanOutOfBounds

# Sentence terminators.  NFKC maps full-width ？！ to ?! but both forms
# are listed so un-normalized text still splits sensibly.
TERMINATORS = frozenset("。？！?!\n")


@dataclass
class Proposition:
    """Segmented argument text for one monetary expression."""

    expr_id: str
    text: str
    sentence_spans: list[tuple[int, int]] = field(default_factory=list)


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Partition text into sentence spans.

    Each span ends just after a maximal run of terminator characters,
    or at end-of-text.  Concatenating the spans reconstructs the input
    exactly.
    """
    spans: list[tuple[int, int]] = []
    n = len(text)
    start = 0
    i = 0
    while i < n:
        if text[i] in TERMINATORS:
            j = i
            while j + 1 < n and text[j + 1] in TERMINATORS:
                j += 1
            spans.append((start, j + 1))
            start = j + 1
            i = j + 1
        else:
            i += 1
    if start < n:
        spans.append((start, n))
    return spans


def segment(
    expr: MonetaryExpression, host: Utterance, context: int = 0
) -> Proposition:
    """Return the proposition covering ``expr`` inside ``host``.

    ``context`` widens the minimal covering run by that many sentences
    on each side (clamped to the utterance).
    """
    start, end = expr.span
    if not (0 <= start < end <= len(host.text)):
        raise SpanOutOfBounds(
            f"expression {expr.expr_id!r}: span ({start}, {end}) outside "
            f"text of length {len(host.text)}"
        )
    spans = split_sentences(host.text)
    first = next(i for i, (_, e) in enumerate(spans) if e > start)
    last = max(i for i, (s, _) in enumerate(spans) if s < end)
    first = max(0, first - context)
    last = min(len(spans) - 1, last + context)
    chosen = spans[first : last + 1]
    return Proposition(
        expr_id=expr.expr_id,
        text=host.text[chosen[0][0] : chosen[-1][1]],
        sentence_spans=chosen,
    )
