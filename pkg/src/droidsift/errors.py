"""Exception taxonomy shared by all pipeline stages.

Every anticipated failure raises a subclass of DroidsiftError so callers
(and the CLI) can distinguish bad input from bugs.  Anything else escaping
a pipeline function is a defect.
"""


class DroidsiftError(Exception):
    """Base class for all typed pipeline errors."""


# container ----------------------------------------------------------------

class BadContainer(DroidsiftError):
    """Archive directory structure is missing, truncated, or inconsistent."""


class UnsupportedCompression(DroidsiftError):
    """Entry uses a compression method other than stored or deflate."""


class EntryNotFound(DroidsiftError):
    """Requested entry name is not present in the archive."""


class CorruptEntry(DroidsiftError):
    """Entry payload fails its checksum, size, or structural checks."""


# dexparse -----------------------------------------------------------------

class BadMagic(DroidsiftError):
    """Input does not start with a recognized dex header magic."""


class Truncated(DroidsiftError):
    """A declared table offset or length exceeds the input."""


class BadStringEncoding(DroidsiftError):
    """A length-prefixed string constant is malformed."""


# manifest -----------------------------------------------------------------

class BadManifest(DroidsiftError):
    """Bytes are neither a binary-XML chunk stream nor well-formed XML."""


# detect -------------------------------------------------------------------

class BadCatalog(DroidsiftError):
    """Feature catalog violates its invariants (dup id, bad kind, ...)."""


class NoDex(DroidsiftError):
    """Archive holds no parseable bytecode and no manifest."""


# rank ---------------------------------------------------------------------

class EmptyCorpus(DroidsiftError):
    """Tallying requires at least one profile."""


class UnlabeledSample(DroidsiftError):
    """A profile without a benign/suspicious label reached a labeled stage."""


class BadK(DroidsiftError):
    """Requested count is outside the valid range."""


# bayes --------------------------------------------------------------------

class MissingClass(DroidsiftError):
    """Training corpus lacks one of the two classes."""


class EmptyFeatureSet(DroidsiftError):
    """Training requires at least one selected feature."""


class LengthMismatch(DroidsiftError):
    """Vector length disagrees with the expected dimension."""


class BadModel(DroidsiftError):
    """Model file is malformed or violates model invariants."""


# eval ---------------------------------------------------------------------

class Empty(DroidsiftError):
    """Metric computation over zero samples."""


class OneClassOnly(DroidsiftError):
    """ROC/AUC needs scores from both classes."""


# corpus -------------------------------------------------------------------

class BadSpec(DroidsiftError):
    """Synthetic-generator marginals are invalid for the active catalog."""


class BadStore(DroidsiftError):
    """Profile store file is malformed."""


class CatalogMismatch(DroidsiftError):
    """Stored catalog version differs from the active catalog."""


class NoReadableSamples(DroidsiftError):
    """Batch extraction produced no profiles at all."""


class InternalError(RuntimeError):
    """An internal invariant failed; indicates a bug, not bad input."""
