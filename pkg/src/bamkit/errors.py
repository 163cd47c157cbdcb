"""Exception taxonomy shared across the pipeline.

Every error that a loader, trainer, or scorer can raise on bad input
derives from :class:`DataError` so the CLI can map it to exit code 2.
"""

from __future__ import annotations


class BamkitError(Exception):
    """Base class for all pipeline errors."""


class DataError(BamkitError):
    """Invalid or inconsistent input data."""


class MalformedDocument(DataError):
    """File is unparsable or missing a required field."""


class DuplicateId(DataError):
    """An identifier occurs more than once where uniqueness is required."""


class SpanOutOfBounds(DataError):
    """A character span does not fit inside its host text."""


class MissingGoldLabel(DataError):
    """An operation requiring gold labels met an unlabeled sample."""


class EmptyClass(DataError):
    """A declared class has no training samples."""


class NonFiniteLoss(BamkitError):
    """Training produced non-finite loss or weights."""


class DimensionMismatch(DataError):
    """Vector dimensions disagree (also raised for embedding-file rows)."""


class MissingEmbedding(DataError):
    """No embedding vector exists for a required id."""


class LengthMismatch(DataError):
    """Parallel sequences have different lengths."""


class EmptyInput(DataError):
    """An operation requiring at least one record got none."""


class TooFewSamples(DataError):
    """Not enough samples for the requested fold count."""
