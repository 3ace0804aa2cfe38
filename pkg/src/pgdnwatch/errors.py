"""Exception hierarchy shared across the package.

Every error raised by this package derives from :class:`PgdnError` so the
CLI can turn any of them into a single-line diagnostic and a non-zero exit.
"""


class PgdnError(Exception):
    """Base class for all errors raised by pgdnwatch."""


class MalformedDomain(PgdnError):
    """A raw domain string cannot be parsed (no dot, empty label, ...)."""


class UnknownSuffix(PgdnError):
    """No entry of the suffix list matches the domain (strict mode only)."""


class QueueUnavailable(PgdnError):
    """The work-queue backend refused a publish or fetch."""


class StoreUnavailable(PgdnError):
    """The observation store refused a commit; tasks must be re-queued."""


class FixtureMiss(PgdnError):
    """A (fqdn, day, probe) triple was requested that the fixture does not
    script.  Signals a test-authoring bug, never a runtime condition."""


class EmptyWindow(PgdnError):
    """Feature assembly was asked to run over zero observations."""


class InsufficientTitledRecords(PgdnError):
    """Augmentation quotas for title-based strategies exceed the number of
    titled records available."""


class EmptyTitle(PgdnError):
    """Character replacement needs at least one character to work on."""


class ProviderUnavailable(PgdnError):
    """The embedding provider could not be reached."""


class BadDimension(PgdnError):
    """The embedding provider returned vectors of the wrong width."""


class ShapeMismatch(PgdnError):
    """An input array does not have the shape the model expects."""


class SingleClassData(PgdnError):
    """Training data contains only one class."""


class LengthMismatch(PgdnError):
    """Predictions and ground truth differ in length."""


class EmptyCounts(PgdnError):
    """A confusion table with zero records cannot be scored."""


class EmptyDataset(PgdnError):
    """Sampling was asked to draw from an empty dataset."""


class UnknownLabel(PgdnError):
    """A label string is none of pornography / gambling / others."""


class DuplicateDomain(PgdnError):
    """A single-day label file lists the same fqdn twice."""


class GapInCoverage(PgdnError):
    """A timeline label file misses a day inside the detection window."""


class MissingTimeline(PgdnError):
    """Forecast analysis received a timeline without a date of change, or
    lacks features for a (domain, day) it must classify."""


class ArtifactMissing(PgdnError):
    """A pipeline step needs an upstream artifact that does not exist."""
