"""Exception hierarchy shared by all xaieval modules."""
from __future__ import annotations


class XaiEvalError(Exception):
    """Base class for all errors raised by this package."""


class AllZeroScores(XaiEvalError):
    """Every saliency score is exactly zero; the explanation cannot be normalized."""


class TopNOutOfRange(XaiEvalError):
    """Requested cutoff is below 1 or exceeds the token count."""


class InstanceMismatch(XaiEvalError):
    """Two inputs that must describe the same instance do not."""


class FractionOutOfRange(XaiEvalError):
    """Perturbation fraction must lie in (0, 1]."""


class IndexOutOfRange(XaiEvalError):
    """Word index outside the original token list."""


class EmptyInput(XaiEvalError):
    """An aggregation was asked to reduce zero items."""


class LengthMismatch(XaiEvalError):
    """Paired vectors or series have different lengths."""


class ZeroVector(XaiEvalError):
    """Cosine distance is undefined for an all-zero vector."""


class DegenerateSeries(XaiEvalError):
    """Rank correlation is undefined when a rank vector is constant."""


class InsufficientInstances(XaiEvalError):
    """Fewer instances available than the metric requires."""


class AlignmentError(XaiEvalError):
    """Per-instance vectors that must align between model variants do not."""


class NotADistribution(XaiEvalError):
    """Vector is not strictly positive or does not sum to one."""


class TokenOrderMismatch(XaiEvalError):
    """Contrast pair explanations must share an identical token sequence."""


class WeightInvalid(XaiEvalError):
    """Metric weights must be non-negative and sum to one."""


class FixtureIncomplete(XaiEvalError):
    """Embedded reference tables are missing cells."""


class InconsistentGrid(XaiEvalError):
    """Reports to be rendered do not form a single-dataset grid."""


class EmptyAfterMerge(XaiEvalError):
    """Majority vote over annotators produced an empty rationale."""


class CorpusValidationError(XaiEvalError):
    """Corpus construction aborted because of error-severity issues.

    Carries the full issue list so callers can render every problem,
    not just the first one encountered.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        errors = [i for i in self.issues if i.severity == "error"]
        super().__init__(f"{len(errors)} error(s) while loading corpus")
